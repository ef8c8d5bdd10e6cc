import json

import pytest

from obslearn.cli import main


@pytest.fixture(autouse=True)
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("OBSLEARN_OUT", str(tmp_path))
    return tmp_path


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_corpus_list(capsys):
    code, out = run(capsys, "corpus", "list")
    assert code == 0
    assert "fig1" in out and "fig9" in out


def test_validate_corpus_and_file(capsys, out_dir):
    code, out = run(capsys, "validate", "--game", "fig2")
    assert code == 0 and "ok" in out
    bad = out_dir / "bad.json"
    bad.write_text(json.dumps({"players": 1, "nodes": [{"id": "r", "terminal": True, "payoffs": [1, 2]}]}))
    code, _ = run(capsys, "validate", "--game", str(bad))
    assert code == 2


def test_normal_form_written(capsys, out_dir):
    code, out = run(capsys, "normal-form", "--game", "fig1", "--out", "nf.json")
    assert code == 0 and "(In2, L) -> (2.0, 1.0)" in out
    code, _ = run(capsys, "validate", "--game", str(out_dir / "nf.json"))
    assert code == 0


def test_coalesce(capsys, out_dir):
    code, out = run(capsys, "coalesce", "--game", "fig3-right", "--role", "0", "--h1", "h1", "--h2", "h1b",
                    "--out", "c.json")
    assert code == 0
    assert (out_dir / "c.json").exists()
    assert "In/2 -> 2" in out


def test_eliminate(capsys, out_dir):
    code, out = run(capsys, "eliminate", "--game", "fig5-left", "--generator", "bi", "--out", "e.json")
    assert code == 0 and "certificates verified: True" in out
    data = json.loads((out_dir / "e.json").read_text())
    assert data["survivors"] == [["Pass"], ["Pass"], ["Pass"]]


def test_eliminate_custom_breach(capsys, out_dir):
    seq = out_dir / "seq.json"
    seq.write_text(json.dumps([{"0": ["Out"]}]))
    code, out = run(capsys, "eliminate", "--game", "fig1", "--generator", "custom", "--custom", str(seq))
    assert code == 1 and "invalid sequence" in out


def test_policy_and_steady(capsys, out_dir):
    prior = out_dir / "p.json"
    prior.write_text(json.dumps({"role": 0, "weights": {"h2": {"L": 2, "R": 1}}}))
    code, out = run(capsys, "policy", "--game", "fig1", "--prior", str(prior), "--role", "0",
                    "--delta", "0.9", "--gamma", "0.9", "--cap", "8", "--dump", "pol.json")
    assert code == 0 and "belief states" in out
    assert json.loads((out_dir / "pol.json").read_text())["states"]
    code, out = run(capsys, "steady", "--game", "fig8", "--delta", "0.5", "--gamma", "0.5", "--cap", "8",
                    "--out", "s.json")
    assert code == 0
    assert json.loads((out_dir / "s.json").read_text())["converged"]


def test_policy_role_mismatch(capsys, out_dir):
    prior = out_dir / "p.json"
    prior.write_text(json.dumps({"role": 1, "weights": {}}))
    code, _ = run(capsys, "policy", "--game", "fig1", "--prior", str(prior), "--role", "0",
                  "--delta", "0.9", "--gamma", "0.9")
    assert code == 2


def test_sweep(capsys, out_dir):
    cfg = out_dir / "sweep.json"
    cfg.write_text(json.dumps({"game": "fig8", "deltas": [0.5], "gammas": {"0.5": [0.95, 0.99]}, "cap": 8,
                               "priors": [{"role": 0, "weights": {"h2": {"X": 0.1, "Y": 50}}}]}))
    code, out = run(capsys, "sweep", "--config", str(cfg), "--out", "sw.json")
    assert code == 0 and out.count("delta=0.5") == 2
    assert len(json.loads((out_dir / "sw.json").read_text())["cells"]) == 2


def test_replicate_writes_report(capsys, out_dir):
    code, out = run(capsys, "replicate", "claim3")
    assert code == 0 and "claim3: PASS" in out
    data = json.loads((out_dir / "claim3.json").read_text())
    assert data["passed"]
    assert (out_dir / "claim3.txt").exists()


def test_unknown_game(capsys):
    code, _ = run(capsys, "validate", "--game", "nope")
    assert code == 2
