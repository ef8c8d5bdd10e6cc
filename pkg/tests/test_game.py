import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obslearn import corpus
from obslearn.game import (
    BehaviorStrategy,
    GameError,
    MixedStrategy,
    behavior_to_mixed,
    derive_normal_form,
    expected_payoff,
    game_from_dict,
    game_to_dict,
    load_game,
    mixed_to_behavior,
    normal_form_with_feedback,
    outcome,
    p_equivalent_partition,
    pure_behavior,
    save_game,
    terminal_distribution,
    validate_game,
)

GAME_NAMES = sorted(corpus.GAMES)


def small_game():
    return {
        "name": "small",
        "players": 2,
        "nodes": [
            {"id": "r", "owner": 0, "edges": [{"action": "a", "child": "x"}, {"action": "b", "child": "y"}]},
            {"id": "x", "owner": 1, "infoset": "h", "edges": [{"action": "l", "child": "z1"},
                                                               {"action": "r", "child": "z2"}]},
            {"id": "y", "owner": 1, "infoset": "h", "edges": [{"action": "l", "child": "z3"},
                                                               {"action": "r", "child": "z4"}]},
            {"id": "z1", "terminal": True, "payoffs": [1, 0]},
            {"id": "z2", "terminal": True, "payoffs": [0, 1]},
            {"id": "z3", "terminal": True, "payoffs": [2, 2]},
            {"id": "z4", "terminal": True, "payoffs": [-1, 3]},
        ],
    }


@pytest.mark.parametrize("name", GAME_NAMES)
def test_corpus_games_validate(name):
    tree, parts = corpus.load(name)
    assert validate_game(tree, parts) == []
    assert corpus.check_constraints(name, tree) == []


@pytest.mark.parametrize("name", GAME_NAMES)
def test_json_round_trip(name, tmp_path):
    tree, parts = corpus.load(name)
    path = tmp_path / f"{name}.json"
    save_game(path, tree, parts)
    back, bparts = load_game(path)
    assert back.terminals == tree.terminals
    assert [back.payoff(z) for z in back.terminals] == [tree.payoff(z) for z in tree.terminals]
    assert game_to_dict(back, bparts) == game_to_dict(tree, parts)


def test_unknown_keys_rejected():
    data = small_game()
    data["colour"] = "red"
    with pytest.raises(GameError, match="unknown keys"):
        game_from_dict(data)
    data = small_game()
    data["nodes"][3]["weight"] = 1
    with pytest.raises(GameError, match="unknown keys"):
        game_from_dict(data)


def test_information_set_with_mismatched_actions():
    data = small_game()
    data["nodes"][2]["edges"][1]["action"] = "q"
    tree, parts = game_from_dict(data)
    assert any("inconsistency" in p for p in validate_game(tree, parts))


def test_perfect_recall_violation():
    data = {
        "players": 1,
        "nodes": [
            {"id": "r", "owner": 0, "infoset": "h1", "edges": [{"action": "a", "child": "x"},
                                                               {"action": "b", "child": "y"}]},
            {"id": "x", "owner": 0, "infoset": "h2", "edges": [{"action": "c", "child": "z1"},
                                                               {"action": "d", "child": "z2"}]},
            {"id": "y", "owner": 0, "infoset": "h2", "edges": [{"action": "c", "child": "z3"},
                                                               {"action": "d", "child": "z4"}]},
        ] + [{"id": f"z{k}", "terminal": True, "payoffs": [k]} for k in range(1, 5)],
    }
    tree, _ = game_from_dict(data)
    assert any("perfect recall" in p for p in validate_game(tree))


def test_bad_partition(tmp_path):
    data = small_game()
    data["partitions"] = [{"role": 0, "cells": [["z1", "z2"], ["z3"]]}]
    path = tmp_path / "g.json"
    path.write_text(json.dumps(data))
    with pytest.raises(GameError):
        load_game(path)


def test_small_game_normal_form():
    tree, _ = game_from_dict(small_game())
    nf = derive_normal_form(tree)
    assert nf.strategies == [["a", "b"], ["l", "r"]]
    assert nf.payoffs[1, 1].tolist() == [-1, 3]
    s = [tree.pure_strategies(0)[1], tree.pure_strategies(1)[0]]
    assert outcome(tree, s) == "z3"


@pytest.mark.parametrize("name", GAME_NAMES)
def test_normal_form_matches_outcomes(name):
    tree, _ = corpus.load(name)
    nf = derive_normal_form(tree)
    for idx in nf.profiles():
        prof = [tree.pure_strategies(i)[k] for i, k in enumerate(idx)]
        z = outcome(tree, prof)
        assert nf.terminal[idx] == z
        assert np.allclose(nf.payoffs[idx], tree.payoff(z))


def test_fig1_strategies():
    tree, _ = corpus.load("fig1")
    assert tree.strategy_labels(0) == ["Out", "In1", "In2"]
    assert tree.strategy_labels(1) == ["L", "R"]


def random_behavior(tree, role, rng, alpha=1.0):
    return BehaviorStrategy(role, {h: rng.dirichlet(np.full(len(tree.infosets[h].actions), alpha))
                                   for h in tree.role_infosets[role]})


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), name=st.sampled_from(GAME_NAMES), alpha=st.sampled_from([0.2, 1.0, 5.0]))
def test_kuhn_round_trip(seed, name, alpha):
    tree, _ = corpus.load(name)
    rng = np.random.default_rng(seed)
    for i in range(tree.players):
        b = random_behavior(tree, i, rng, alpha)
        m = behavior_to_mixed(tree, b)
        assert abs(m.dist.sum() - 1) <= 1e-12
        assert (m.dist >= 0).all()
        back, flagged = mixed_to_behavior(tree, m)
        for h in b.mix:
            if h not in flagged:
                assert np.abs(back.mix[h] - b.mix[h]).max() <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), name=st.sampled_from(GAME_NAMES))
def test_mixed_and_behavior_induce_same_outcomes(seed, name):
    tree, _ = corpus.load(name)
    rng = np.random.default_rng(seed)
    mixed = [MixedStrategy(i, rng.dirichlet(np.ones(len(tree.pure_strategies(i))))) for i in range(tree.players)]
    beh = {}
    for m in mixed:
        b, _ = mixed_to_behavior(tree, m)
        beh.update(b.mix)
    dist = terminal_distribution(tree, beh)
    nf = derive_normal_form(tree)
    direct = {z: 0.0 for z in tree.terminals}
    for idx in nf.profiles():
        direct[nf.terminal[idx]] += float(np.prod([m.dist[k] for m, k in zip(mixed, idx)]))
    for z in tree.terminals:
        assert dist[z] == pytest.approx(direct[z], abs=1e-12)


def test_expected_payoff_of_pure_profile():
    tree, _ = corpus.load("fig1")
    prof = [pure_behavior(tree, tree.pure_strategies(0)[2]), pure_behavior(tree, tree.pure_strategies(1)[0])]
    assert expected_payoff(tree, prof).tolist() == [2.0, 1.0]


def test_p_equivalent_partition_fig1():
    tree, parts = corpus.load("fig1")
    nf = derive_normal_form(tree)
    pp = p_equivalent_partition(tree, parts, nf)
    # role 0 cannot tell (Out, L) from (Out, R); every In profile is distinct
    assert pp[0][0, 0] == pp[0][0, 1]
    assert len({pp[0][idx] for idx in nf.profiles()}) == 5


def test_normal_form_with_feedback_is_a_game():
    tree, parts = corpus.load("fig1")
    nf_tree, nf_parts = normal_form_with_feedback(tree, parts)
    assert validate_game(nf_tree, nf_parts) == []
    assert len(nf_tree.terminals) == 6
