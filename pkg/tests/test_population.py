import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obslearn import corpus
from obslearn.beliefs import DirichletPrior
from obslearn.game import GameError
from obslearn.population import (
    Learners,
    PopulationState,
    aggregate_response,
    check_grid,
    montecarlo_response,
    patient_sweep,
    stationary_mass,
    steady_state,
    true_outcome_probs,
    update_rule,
)


def learners_for(name, overrides=None, delta=0.9, gamma=0.9, cap=12):
    tree, parts = corpus.load(name)
    priors = [DirichletPrior.uniform(tree, i, overrides=(overrides or {}).get(i)) for i in range(tree.players)]
    return Learners.build(tree, parts, priors, delta, gamma, cap)


FIG1 = {0: {"h2": {"L": 2, "R": 1}}, 1: {"h1": {"Out": 1, "In1": 3, "In2": 1}}}


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), name=st.sampled_from(["fig1", "fig8", "fig2"]))
def test_stationary_mass_matches_iterated_update(seed, name):
    L = learners_for(name, delta=0.8, gamma=0.8, cap=8)
    rng = np.random.default_rng(seed)
    mixed = [rng.dirichlet(np.ones(p.model.n_strategies)) for p in L.policies]
    beh = L.behavior_of(mixed)
    qs = [true_outcome_probs(m, beh) for m in L.models]
    state = PopulationState([np.eye(1, len(p.space), 0)[0] for p in L.policies], [0.0] * len(L.policies))
    for _ in range(250):
        state = update_rule(state, L.policies, qs, L.gamma)
    for i, pol in enumerate(L.policies):
        exact = stationary_mass(pol, qs[i], L.gamma)
        assert exact.sum() == pytest.approx(1.0, abs=1e-12)
        assert (exact >= 0).all()
        assert np.abs(exact - state.mass[i]).max() < 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_update_rule_conserves_mass(seed):
    L = learners_for("fig1", FIG1, cap=10)
    rng = np.random.default_rng(seed)
    beh = L.behavior_of([rng.dirichlet(np.ones(p.model.n_strategies)) for p in L.policies])
    qs = [true_outcome_probs(m, beh) for m in L.models]
    state = PopulationState([rng.dirichlet(np.ones(len(p.space))) for p in L.policies], [0.0, 0.0])
    for _ in range(20):
        before = [state.total(i) for i in range(2)]
        state = update_rule(state, L.policies, qs, L.gamma)
        for i in range(2):
            expect = L.gamma * before[i] + 1 - L.gamma - state.dropped[i]
            assert state.total(i) == pytest.approx(expect, abs=1e-13)
            assert (state.mass[i] >= 0).all()


def test_steady_state_is_fixed_point():
    L = learners_for("fig1", FIG1)
    st_ = steady_state(L)
    assert st_.converged
    resp = L.response_all(st_.mixed)
    assert max(np.abs(r - m).max() for r, m in zip(resp, st_.mixed)) < 1e-9
    for m in st_.mixed:
        assert m.sum() == pytest.approx(1.0, abs=1e-12)


def test_multiple_starts_reported():
    L = learners_for("fig8", {1: {"h1": {"A": 1, "B": 1, "C": 3}}})
    st_ = steady_state(L, starts=3, seed=5)
    assert st_.converged and len(st_.attempts) == 3


def test_montecarlo_response_agrees():
    L = learners_for("fig1", FIG1, cap=10)
    mixed = [np.array([0.5, 0.2, 0.3]), np.array([0.4, 0.6])]
    exact = aggregate_response(L, 0, mixed)
    n = 40_000
    sim = montecarlo_response(L, 0, mixed, n, 150, 100, seed=2)
    assert np.abs(exact - sim).max() < 4 / np.sqrt(n)


def test_grid_discipline():
    check_grid([0.9], {0.9: [0.99, 0.999]})
    with pytest.raises(GameError):
        check_grid([0.9], {0.9: [0.95]})


def test_small_sweep():
    tree, parts = corpus.load("fig8")
    priors = [DirichletPrior.uniform(tree, 0, overrides={"h2": {"X": 0.1, "Y": 50}}),
              DirichletPrior.uniform(tree, 1, overrides={"h1": {"A": 1, "B": 1, "C": 10}})]
    res = patient_sweep(tree, parts, priors, [0.5, 0.9], {0.5: [0.95, 0.99], 0.9: [0.99, 0.995]}, cap=16)
    assert len(res.cells) == 4
    assert all(c.steady.converged for c in res.cells)
    assert res.candidate[0].tolist() == pytest.approx([0, 1, 0], abs=1e-6)
    assert res.outer_cauchy < 1e-6
