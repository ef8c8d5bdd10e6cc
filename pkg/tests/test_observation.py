import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obslearn import corpus
from obslearn.game import GameError, default_partitions, derive_normal_form, p_equivalent_partition, terminal_distribution
from obslearn.observation import (
    discriminating_pairs,
    from_normal_form,
    from_tree,
    is_passive,
    models_isomorphic,
    reduce_model,
)

GAME_NAMES = sorted(corpus.GAMES)


def random_behavior(tree, rng, skip_role=None):
    return {h: rng.dirichlet(np.ones(len(info.actions)))
            for h, info in tree.infosets.items() if info.owner != skip_role}


@settings(max_examples=40, deadline=None)
@given(name=st.sampled_from(GAME_NAMES), seed=st.integers(0, 10_000))
def test_expected_payoffs_match_tree(name, seed):
    tree, parts = corpus.load(name)
    rng = np.random.default_rng(seed)
    for role in range(tree.players):
        model = from_tree(tree, parts, role, reduce=False)
        beh = random_behavior(tree, rng, skip_role=role)
        u = model.expected_payoffs(beh)
        for k, s in enumerate(tree.pure_strategies(role)):
            own = {h: np.eye(len(tree.infosets[h].actions))[tree.infosets[h].index(a)] for h, a in s.choice.items()}
            dist = terminal_distribution(tree, {**beh, **own})
            assert u[k] == pytest.approx(sum(p * tree.payoff(z)[role] for z, p in dist.items()), abs=1e-12)
            assert model.outcome_probs(k, beh).sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(name=st.sampled_from(GAME_NAMES), seed=st.integers(0, 10_000))
def test_reduction_preserves_payoffs(name, seed):
    tree, parts = corpus.load(name)
    rng = np.random.default_rng(seed)
    for role in range(tree.players):
        full = from_tree(tree, parts, role, reduce=False)
        red = reduce_model(full)
        beh = random_behavior(tree, rng, skip_role=role)
        assert np.allclose(full.expected_payoffs(beh), red.expected_payoffs(beh), atol=1e-12)
        assert {c.name for c in red.coords} | {c.name for c in red.dropped} == {c.name for c in full.coords}


def test_fig1_models():
    tree, parts = corpus.load("fig1")
    m0 = from_tree(tree, parts, 0)
    assert [c.name for c in m0.coords] == ["h2"]
    # Out reveals nothing; In1 and In2 reveal role 2's choice
    assert [len(o) for o in m0.outcomes] == [1, 2, 2]
    assert m0.outcomes[0][0].pairs == ()
    assert not m0.passive
    m1 = from_tree(tree, parts, 1)
    assert m1.passive and is_passive(m1)
    assert len(discriminating_pairs(m1)) == len(m1.coords)


def test_coarse_partition_hides_moves():
    tree, parts = corpus.load("fig7-right")
    model = from_tree(tree, parts, 0)
    out = model.strategies.index("Out")
    assert all(o.pairs == () for o in model.outcomes[out])


@pytest.mark.parametrize("name", ["fig1", "fig5-left", "fig3-right"])
def test_normal_form_model_isomorphic(name):
    tree, parts = corpus.load(name)
    nf = derive_normal_form(tree)
    pp = p_equivalent_partition(tree, parts, nf)
    for role in range(tree.players):
        ef = from_tree(tree, default_partitions(tree, parts), role)
        nm = from_normal_form(nf, role, pp[role])
        cmap = [[c.name for c in nm.coords].index(c.name) for c in ef.coords]
        ok, why = models_isomorphic(ef, nm, coord_map=cmap)
        assert ok, why


def test_isomorphism_detects_payoff_change():
    tree, parts = corpus.load("fig1")
    a = from_tree(tree, parts, 0)
    b = from_tree(tree, parts, 0)
    o = b.outcomes[2][0]
    b.outcomes[2][0] = type(o)(o.pairs, o.payoff + 1.0, o.cell)
    ok, why = models_isomorphic(a, b)
    assert not ok and "In2" in why


def test_unmeasurable_profile_partition_rejected():
    tree, _ = corpus.load("fig1")
    nf = derive_normal_form(tree)
    # one cell for everything: role 2's payoff after L depends on role 1's hidden choice
    bad = np.zeros(nf.shape, dtype=int)
    with pytest.raises(GameError, match="payoff varies"):
        from_normal_form(nf, 1, bad)
