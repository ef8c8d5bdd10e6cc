"""End-to-end replication runs driven by JSON spec files.

Each run returns a :class:`Report` with one :class:`Criterion` per checked
statement plus the numbers behind it.  Grids, priors, seeds and tolerances
come from the spec file; nothing here hard-codes them.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import corpus
from .beliefs import DirichletPrior, check_supportive, make_supportive_priors, prior_from_dict, verify_equilibrium_form
from .elimination import (
    bi_profile,
    eliminable,
    is_simple_game,
    run_valid_sequence,
    verify_certificates,
    weakly_dominated,
)
from .game import GameError, GameTree, default_partitions, derive_normal_form, p_equivalent_partition
from .observation import from_normal_form, from_tree, models_isomorphic
from .policy import policy_invariance_check
from .population import Learners, SweepResult, patient_sweep, steady_state
from .transforms import CoalescePlan, box_measure_check, coalesce, phi, phi_inverse, transform_prior

IDS = ("claim1", "claim2", "claim3", "claim4", "claim5", "prop2", "prop4", "prop5", "prop6")


@dataclass
class Criterion:
    name: str
    passed: bool
    detail: str


@dataclass
class Report:
    id: str
    criteria: list[Criterion] = field(default_factory=list)
    results: dict[str, Any] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        self.criteria.append(Criterion(name, bool(passed), detail))
        return bool(passed)

    def summary(self) -> str:
        lines = [f"{self.id}: {'PASS' if self.passed else 'FAIL'} ({self.seconds:.1f}s)"]
        lines += [f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in self.criteria]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"id": self.id, "passed": self.passed, "seconds": self.seconds,
                "criteria": [vars(c) for c in self.criteria], "results": _jsonable(self.results)}

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{self.id}.json").write_text(json.dumps(self.to_dict(), indent=2))
        (out / f"{self.id}.txt").write_text(self.summary() + "\n")
        return out / f"{self.id}.json"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Fraction):
        return str(x)
    return x


def load_spec(spec_id_or_path: str) -> dict:
    """A shipped spec by id, or any spec file by path."""
    p = Path(spec_id_or_path)
    if p.suffix == ".json" and p.exists():
        return json.loads(p.read_text())
    if spec_id_or_path not in IDS:
        raise GameError(f"unknown replication {spec_id_or_path!r}; known: {', '.join(IDS)}")
    return json.loads(resources.files("obslearn").joinpath(f"specs/{spec_id_or_path}.json").read_text())


def priors_from_spec(items: Sequence[Mapping], tree: GameTree) -> list[DirichletPrior]:
    given = {int(d["role"]): prior_from_dict(d, tree) for d in items}
    return [given.get(i) or DirichletPrior.uniform(tree, i) for i in range(tree.players)]


def _gammas(sweep: Mapping) -> dict[float, list[float]]:
    return {float(k): [float(g) for g in v] for k, v in sweep["gammas"].items()}


def _run_sweep(tree, parts, priors, sweep: Mapping, init=None, monitors=None) -> SweepResult:
    return patient_sweep(tree, parts, priors, [float(d) for d in sweep["deltas"]], _gammas(sweep),
                         cap=sweep.get("cap", 64), init=init, damping=sweep.get("damping", 0.5),
                         tol=sweep.get("tol", 1e-10), monitors=monitors)


def _monotone(series: Sequence[float], tol: float, increasing: bool = True) -> bool:
    d = np.diff(series)
    return bool(np.all(d >= -tol) if increasing else np.all(d <= tol))


def _sweep_table(res: SweepResult, tree: GameTree) -> list[dict]:
    rows = []
    for c in res.cells:
        rows.append({"delta": c.delta, "gamma": c.gamma, "converged": c.steady.converged,
                     "residual": c.steady.residual, "iterations": c.steady.iterations,
                     "mixed": [m.tolist() for m in c.steady.mixed],
                     "behavior": {h: v.tolist() for h, v in c.steady.behavior.items()},
                     "nash_slack": c.nash_slack, "monitored": c.monitored})
    return rows


def _slack_decreasing(res: SweepResult, tol: float = 1e-9) -> bool:
    for d in sorted({c.delta for c in res.cells}):
        s = [max(c.nash_slack) for c in res.cells if c.delta == d]
        if not _monotone(s, tol, increasing=False):
            return False
    return True


# ------------------------------------------------------------------ runs
def run_claim1(spec: Mapping) -> Report:
    rep = Report("claim1")
    tree, parts = corpus.load(spec["game"])
    nf = derive_normal_form(tree)
    el = spec["elimination"]
    profile = {int(k): v for k, v in spec["profile"].items()}

    t0 = time.perf_counter()
    wd = weakly_dominated(nf, 0)
    first = {nf.strategies[0][k] for k in wd}
    need = set(el["must_delete_first"]["0"])
    rep.check("first-stage deletions", need <= first, f"weakly dominated for role 1: {sorted(first)}")
    runs = {}
    simple = is_simple_game(tree)
    for gen in el["generators"]:
        if gen == "bi" and not simple.relaxed:
            runs[gen] = "not applicable: the game is not a simple game"
            continue
        st = run_valid_sequence(nf, gen, tree=tree)
        runs[gen] = st.to_dict()
        rep.check(f"{gen}: certificates verify", verify_certificates(st), f"{len(st.log)} deletions")
        rep.check(f"{gen}: target profile survives", st.contains(profile), f"survivors {st.survivors()}")
        if gen == "sw":
            rep.check("sw survivors", st.survivors() == el["expected_sw"], f"{st.survivors()}")
    el_secs = time.perf_counter() - t0
    rep.check("elimination time", el_secs < spec["criteria"]["elimination_seconds"], f"{el_secs:.3f}s")
    rep.results["elimination"] = runs

    priors, sup = make_supportive_priors(tree, spec["target"], spec["supportive_horizon"])
    rep.check("supportive priors", sup.ok, f"{sup.checked_states} states checked; "
              + ", ".join(f"{h}: {w.tolist()}" for p in priors for h, w in p.weights.items()))
    rep.results["priors"] = [p.to_dict(tree) for p in priors]

    sweep = spec["sweep"]
    a_out = tree.infosets["h1"].index(spec["target"]["h1"])
    a_r = tree.infosets["h2"].index(spec["target"]["h2"])
    res = _run_sweep(tree, parts, priors, sweep, monitors={
        "pi1_out": lambda c: c.steady.prob("h1", a_out),
        "pi2_r": lambda c: c.steady.prob("h2", a_r)})
    rep.results["sweep"] = _sweep_table(res, tree)
    crit = spec["criteria"]
    rep.check("all sweep cells converged", all(c.steady.converged for c in res.cells), "")
    for d in sorted({c.delta for c in res.cells}):
        out = res.series(d, lambda c: c.monitored["pi1_out"])
        r = res.series(d, lambda c: c.monitored["pi2_r"])
        rep.check(f"delta={d}: terminal pi1(Out) >= {crit['min_out']}", out[-1] >= crit["min_out"], f"{out}")
        rep.check(f"delta={d}: terminal pi2(R) >= {crit['min_r']}", r[-1] >= crit["min_r"], f"{r}")
        rep.check(f"delta={d}: monotone along gamma", _monotone(out, crit["monotone_tol"])
                  and _monotone(r, crit["monotone_tol"]), "")
    rep.check("Nash slack decreasing along gamma", _slack_decreasing(res),
              f"{[round(max(c.nash_slack), 8) for c in res.cells]}")
    return rep


def run_claim2(spec: Mapping) -> Report:
    rep = Report("claim2")
    rng = np.random.default_rng(spec["seed"])
    crit = spec["criteria"]
    worst_rt = 0.0
    for pair in spec["pairs"]:
        g, parts = corpus.load(pair["game"])
        c = coalesce(g, CoalescePlan.infer(g, pair["role"], pair["h1"], pair["h2"]), parts)
        ref, _ = corpus.load(pair["coalesced_equals"])
        same = sorted((z, ref.path(z), ref.payoff(z)) for z in ref.terminals) == \
            sorted((z, c.tree.path(z), c.tree.payoff(z)) for z in c.tree.terminals)
        rep.check(f"{pair['game']}: coalesces to {pair['coalesced_equals']}", same, "")

        m = len(g.infosets[pair["h1"]].actions) - 1
        n = len(g.infosets[pair["h2"]].actions)
        for _ in range(spec["roundtrip_draws"]):
            a1, a2 = rng.dirichlet(np.ones(m + 1)), rng.dirichlet(np.ones(n))
            b1, b2 = phi_inverse(phi(a1, a2, c.pass_index), m, c.pass_index)
            worst_rt = max(worst_rt, float(np.abs(b1 - a1).max()), float(np.abs(b2 - a2).max()))

        priors = priors_from_spec(pair["priors"], g)
        hat = [p if p.role == pair["role"] else transform_prior(p, c).to_dirichlet() for p in priors]
        opp = next(p for p in priors if p.role != pair["role"])
        boxes = box_measure_check(transform_prior(opp, c), rng, spec["boxes"], spec["box_samples"])
        zmax = max(b.z for b in boxes)
        rep.check(f"{pair['game']}: prior measure preserved on {len(boxes)} boxes", zmax <= crit["box_z"],
                  f"max |z| = {zmax:.2f}")

        worst = 0.0
        cells = []
        for d in spec["deltas"]:
            for gm in spec["gammas"]:
                A = Learners.build(g, parts, priors, d, gm, spec["cap"])
                B = Learners.build(c.tree, c.partitions, hat, d, gm, spec["cap"])
                sa = steady_state(A)
                sb = steady_state(B, init=[c.map_mixed(i, x) for i, x in enumerate(A.newborn_play())])
                diff = max(float(np.abs(c.map_mixed(i, sa.mixed[i]) - sb.mixed[i]).max()) for i in range(g.players))
                worst = max(worst, diff)
                cells.append({"delta": d, "gamma": gm, "diff": diff, "converged": [sa.converged, sb.converged],
                              "original": [x.tolist() for x in sa.mixed], "coalesced": [x.tolist() for x in sb.mixed]})
        rep.check(f"{pair['game']}: steady states agree", worst <= crit["steady_tol"]
                  and all(all(x["converged"]) for x in cells), f"max difference {worst:.2e}")
        rep.results[pair["game"]] = {"cells": cells, "boxes": [vars(b) for b in boxes]}
    rep.check("phi round trip", worst_rt <= crit["roundtrip_tol"], f"max error {worst_rt:.2e}")
    return rep


def run_claim3(spec: Mapping) -> Report:
    rep = Report("claim3")
    tree, _ = corpus.load(spec["game"])
    nf = derive_normal_form(tree)
    t0 = time.perf_counter()
    st = run_valid_sequence(nf, spec["generator"], tree=tree)
    secs = time.perf_counter() - t0
    rep.check("survivors", st.survivors() == spec["expected"], f"{st.survivors()}")
    rep.check("every deletion certified", verify_certificates(st), f"{len(st.log)} deletions in {st.stage} stages")
    rep.check("time", secs < spec["criteria"]["seconds"], f"{secs:.3f}s")
    ct = spec["eta_zero_contrast"]
    surv = [{nf.strategies[i].index(s) for s in labs} for i, labs in enumerate(ct["after"])]
    k = nf.strategies[ct["role"]].index(ct["strategy"])
    pos = eliminable(nf, ct["role"], k, surv, Fraction(ct["eps"]), Fraction(ct["eta"]))
    zero = eliminable(nf, ct["role"], k, surv, Fraction(ct["eps"]), 0)
    rep.check("positive floor eliminates, zero floor does not", (not pos.feasible) and zero.feasible,
              f"eta>0 feasible={pos.feasible}, eta=0 feasible={zero.feasible}")
    rep.results["trace"] = st.to_dict()
    return rep


def run_claim4(spec: Mapping) -> Report:
    rep = Report("claim4")
    tree, parts = corpus.load(spec["game"])
    priors = priors_from_spec(spec["priors"], tree)
    init = [np.asarray(x, dtype=float) for x in spec["init"]]
    i_in = tree.infosets["h1"].index("In")
    res = _run_sweep(tree, parts, priors, spec["sweep"], init=init, monitors={
        "pi1_in_scaled": lambda c: c.steady.prob("h1", i_in) / (1 - c.gamma),
        "pi2_out": lambda c: c.steady.prob("h2", tree.infosets["h2"].index("Out")),
        "pi3_r": lambda c: c.steady.prob("h3", tree.infosets["h3"].index("R"))})
    rep.results["sweep"] = _sweep_table(res, tree)
    crit = spec["criteria"]
    rep.check("all sweep cells converged", all(c.steady.converged for c in res.cells), "")
    for d in sorted({c.delta for c in res.cells}):
        r3 = res.series(d, lambda c: c.monitored["pi3_r"])
        o2 = res.series(d, lambda c: c.monitored["pi2_out"])
        k = res.series(d, lambda c: c.monitored["pi1_in_scaled"])
        rep.check(f"delta={d}: terminal pi3(R) >= {crit['min_r3']}", r3[-1] >= crit["min_r3"], f"{r3}")
        rep.check(f"delta={d}: terminal pi2(Out) >= {crit['min_out2']}", o2[-1] >= crit["min_out2"], f"{o2}")
        ratio = max(k) / min(k) if min(k) > 0 else float("inf")
        rep.check(f"delta={d}: pi1(In)/(1-gamma) bounded", ratio <= crit["ratio_max"],
                  f"series {[round(x, 4) for x in k]}, max/min {ratio:.3f}")
    nv = spec["never_played"]
    used = set()
    for d in sorted({c.delta for c in res.cells}):
        for g in _gammas(spec["sweep"])[d]:
            learners = Learners.build(tree, parts, priors, d, g, spec["sweep"].get("cap", 64))
            used |= learners.policies[nv["role"]].strategies_used()
    rep.check(f"role {nv['role'] + 1} never plays {nv['strategy']} at any belief state", nv["strategy"] not in used,
              f"strategies used: {sorted(used)}")
    rep.check("Nash slack decreasing along gamma", _slack_decreasing(res),
              f"{[round(max(c.nash_slack), 8) for c in res.cells]}")
    return rep


def run_claim5(spec: Mapping) -> Report:
    rep = Report("claim5")
    crit = spec["criteria"]
    fine = spec["fine"]
    tree, parts = corpus.load(fine["game"])
    priors = priors_from_spec(fine["priors"], tree)
    target = [np.asarray(x, dtype=float) for x in fine["profile"]]
    worst = 0.0
    for d in fine["deltas"]:
        for g in fine["gammas"]:
            learners = Learners.build(tree, parts, priors, d, g)
            resp = learners.response_all(target)
            worst = max(worst, max(float(np.abs(r - t).max()) for r, t in zip(resp, target)))
    rep.check(f"{fine['game']}: target is an exact steady state at every cell", worst <= crit["exact_tol"],
              f"max |R(pi) - pi| = {worst:.1e}")

    coarse = spec["coarse"]
    tree, parts = corpus.load(coarse["game"])
    priors = priors_from_spec(coarse["priors"], tree)
    i_r = tree.infosets["h2"].index("R")
    res = _run_sweep(tree, parts, priors, coarse["sweep"], monitors={"pi2_r": lambda c: c.steady.prob("h2", i_r)})
    rep.results["coarse_sweep"] = _sweep_table(res, tree)
    rep.check("coarse sweep converged", all(c.steady.converged for c in res.cells), "")
    for d in sorted({c.delta for c in res.cells}):
        r = res.series(d, lambda c: c.monitored["pi2_r"])
        rep.check(f"delta={d}: pi2(R) strictly decreasing", bool(np.all(np.diff(r) < 0)), f"{r}")
        rep.check(f"delta={d}: terminal pi2(R) <= {crit['max_terminal_r']}", r[-1] <= crit["max_terminal_r"], "")
    return rep


def run_prop2(spec: Mapping) -> Report:
    rep = Report("prop2")
    for case in spec["cases"]:
        tree, _ = corpus.load(case["game"])
        label = f"{case['game']} {case['target']}"
        form = verify_equilibrium_form(tree, case["target"])
        rep.check(f"{label}: form conditions {'hold' if case['form'] else 'fail'}", form.ok == case["form"],
                  form.reason)
        if case["supportive"]:
            priors, sup = make_supportive_priors(tree, case["target"], spec["horizon"])
            again = check_supportive(tree, case["target"], priors, spec["horizon"])
            rep.check(f"{label}: supportive priors found and re-verified", sup.ok and again.ok,
                      f"{again.checked_states} states")
            rep.results[label] = [p.to_dict(tree) for p in priors]
        else:
            try:
                make_supportive_priors(tree, case["target"], spec["horizon"])
                rep.check(f"{label}: no supportive priors", False, "constructor succeeded unexpectedly")
            except GameError as exc:
                rep.check(f"{label}: no supportive priors", True, str(exc))
    return rep


def run_prop4(spec: Mapping) -> Report:
    rep = Report("prop4")
    t0 = time.perf_counter()
    tree, parts = corpus.load(spec["game"])
    nf = derive_normal_form(tree)
    st = run_valid_sequence(nf, "sw", tree=tree)
    rep.check("sw survivors", st.survivors() == spec["expected_sw"], f"{st.survivors()}")
    rep.check("sw certificates verify", verify_certificates(st), "")
    priors = priors_from_spec(spec["priors"], tree)
    target = [np.asarray(x, dtype=float) for x in spec["profile"]]
    labels = [nf.strategies[i][int(np.argmax(t))] for i, t in enumerate(target)]
    rep.check("steady-state profile lies in the survivors", st.contains(labels), f"{labels}")
    for d, g in spec["exact_cells"]:
        ss = steady_state(Learners.build(tree, parts, priors, d, g))
        diff = max(float(np.abs(m - t).max()) for m, t in zip(ss.mixed, target))
        rep.check(f"(delta, gamma)=({d}, {g}): steady state exactly {labels}", diff == 0.0, f"{diff:.1e}")
    for d, g in spec["near_cells"]:
        ss = steady_state(Learners.build(tree, parts, priors, d, g))
        diff = max(float(np.abs(m - t).max()) for m, t in zip(ss.mixed, target))
        rep.check(f"(delta, gamma)=({d}, {g}): steady state within tolerance", diff <= spec["criteria"]["near_tol"],
                  f"{diff:.1e}")
    secs = time.perf_counter() - t0
    rep.check("time", secs < spec["criteria"]["seconds"], f"{secs:.2f}s")
    sizes = {}
    for name in corpus.GAMES:
        g, _ = corpus.load(name)
        gnf = derive_normal_form(g)
        gens = list(spec["corpus_generators"]) + (["bi"] if is_simple_game(g).relaxed else [])
        for gen in gens:
            s = run_valid_sequence(gnf, gen, tree=g)
            sizes[f"{name}/{gen}"] = [len(x) for x in s.surviving]
    rep.check("survivor sets non-empty on every corpus game", all(min(v) > 0 for v in sizes.values()),
              f"{len(sizes)} runs")
    rep.results["survivor_sizes"] = sizes
    return rep


def run_prop5(spec: Mapping) -> Report:
    rep = Report("prop5")
    for name in spec["games"]:
        tree, _ = corpus.load(name)
        report = is_simple_game(tree)
        rep.check(f"{name}: perfect information, one move per role, no tied comparisons", report.relaxed,
                  f"{report}")
        nf = derive_normal_form(tree)
        st = run_valid_sequence(nf, "bi", tree=tree)
        bi = bi_profile(tree)
        on_path = [nf.strategies[i][k] for i, s in enumerate(st.surviving) for k in s]
        rep.check(f"{name}: backward induction is a valid sequence", verify_certificates(st),
                  f"survivors {st.survivors()}, backward-induction actions {bi}")
        rep.check(f"{name}: survivors are consistent with backward induction",
                  all(len(s) >= 1 for s in st.surviving), f"{on_path}")
        try:
            run_valid_sequence(nf, "bi", tree=tree, full_support=False)
            rep.check(f"{name}: zero floor rejects the sequence", False, "sequence accepted")
        except GameError as exc:
            rep.check(f"{name}: zero floor rejects the sequence", True, str(exc))
        rep.results[name] = st.to_dict()
    return rep


def run_prop6(spec: Mapping) -> Report:
    rep = Report("prop6")
    for case in spec["cases"]:
        tree, parts = corpus.load(case["game"])
        nf = derive_normal_form(tree)
        pparts = p_equivalent_partition(tree, parts, nf)
        priors = priors_from_spec(case["priors"], tree)
        ef = [from_tree(tree, default_partitions(tree, parts), i) for i in range(tree.players)]
        nfm = [from_normal_form(nf, i, pparts[i]) for i in range(tree.players)]
        for i in range(tree.players):
            cmap = [[c.name for c in nfm[i].coords].index(c.name) for c in ef[i].coords]
            ok, why = models_isomorphic(ef[i], nfm[i], coord_map=cmap)
            rep.check(f"{case['game']} role {i + 1}: observation models isomorphic", ok, why)
        worst = 0.0
        for d, g in spec["cells"]:
            A = Learners.build(tree, parts, priors, d, g, spec["cap"])
            B = Learners.build(tree, parts, priors, d, g, spec["cap"], models=nfm)
            for i in range(tree.players):
                ok, why = policy_invariance_check(A.policies[i], B.policies[i])
                rep.check(f"{case['game']} role {i + 1} at ({d}, {g}): policies agree state for state", ok, why)
            sa, sb = steady_state(A), steady_state(B)
            worst = max(worst, max(float(np.abs(x - y).max()) for x, y in zip(sa.mixed, sb.mixed)))
        rep.check(f"{case['game']}: steady states agree", worst <= spec["criteria"]["steady_tol"], f"{worst:.1e}")
    return rep


RUNNERS: dict[str, Callable[[Mapping], Report]] = {
    "claim1": run_claim1, "claim2": run_claim2, "claim3": run_claim3, "claim4": run_claim4,
    "claim5": run_claim5, "prop2": run_prop2, "prop4": run_prop4, "prop5": run_prop5, "prop6": run_prop6,
}


def replicate(spec_id_or_path: str, out_dir: str | Path | None = None) -> Report:
    spec = load_spec(spec_id_or_path)
    t0 = time.perf_counter()
    rep = RUNNERS[spec["id"]](spec)
    rep.seconds = time.perf_counter() - t0
    budget = spec.get("criteria", {}).get("seconds")
    if budget is not None and spec["id"] not in ("claim3",):
        rep.check("time budget", rep.seconds < budget, f"{rep.seconds:.1f}s of {budget}s")
    if out_dir is not None:
        rep.write(out_dir)
    return rep
