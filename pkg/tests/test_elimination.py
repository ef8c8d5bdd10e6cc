import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obslearn import corpus
from obslearn.elimination import (
    ValidityBreach,
    bi_profile,
    eliminable,
    eliminable_on_schedule,
    grid_feasible,
    is_simple_game,
    iterated_strict_dominance,
    node_heights,
    run_valid_sequence,
    schedule_point,
    strictly_dominated,
    verify_certificates,
    verify_dominance,
    verify_schedule,
    weakly_dominated,
)
from obslearn.game import NormalFormGame, derive_normal_form


def nf_of(name):
    tree, _ = corpus.load(name)
    return tree, derive_normal_form(tree)


def full(nf):
    return [set(range(n)) for n in nf.shape]


def check_witness(nf, role, s, surviving, eps, eta, sigma):
    """Admissibility and best-reply conditions checked straight from their definitions."""
    opp = [j for j in range(nf.players) if j != role]
    profiles = list(itertools.product(*(range(nf.shape[j]) for j in opp)))
    assert sum(sigma) == 1
    assert all(v >= eta for v in sigma)
    for jpos, j in enumerate(opp):
        blocks = {}
        for p, v in zip(profiles, sigma):
            key = p[:jpos] + p[jpos + 1:]
            tot, alive = blocks.get(key, (0, 0))
            blocks[key] = (tot + v, alive + (v if p[jpos] in surviving[j] else 0))
        for tot, alive in blocks.values():
            if tot > 0:
                assert alive >= (1 - eps) * tot

    def u(k):
        total = Fraction(0)
        for p, v in zip(profiles, sigma):
            full_p = list(p)
            full_p.insert(role, k)
            total += Fraction(nf.payoffs[tuple(full_p) + (role,)]).limit_denominator(10**9) * v
        return total

    us = u(s)
    assert all(us >= u(k) for k in range(nf.shape[role]))


def test_fig1_sw():
    tree, nf = nf_of("fig1")
    wd = weakly_dominated(nf, 0)
    assert nf.strategies[0].index("In1") in wd
    assert all(verify_dominance(nf, 0, c) for c in wd.values())
    st_ = run_valid_sequence(nf, "sw", tree=tree)
    assert st_.survivors() == [["Out", "In2"], ["L", "R"]]
    assert verify_certificates(st_)
    assert st_.contains({0: "Out", 1: "R"})


def test_fig8_sw_and_strict():
    tree, nf = nf_of("fig8")
    st_ = run_valid_sequence(nf, "sw", tree=tree)
    assert st_.survivors() == [["A", "B"], ["X", "Y"]]
    surv = iterated_strict_dominance(nf)
    assert nf.strategies[0].index("C") not in surv[0]


def test_fig5_backward_induction():
    tree, nf = nf_of("fig5-left")
    assert is_simple_game(tree).relaxed
    heights = node_heights(tree)
    assert heights[tree.root] == max(heights.values())
    st_ = run_valid_sequence(nf, "bi", tree=tree)
    assert st_.survivors() == [["Pass"], ["Pass"], ["Pass"]]
    assert st_.stage == 3
    assert verify_certificates(st_)
    assert set(bi_profile(tree).values()) == {"Pass"}


def test_fig5_maximal_with_and_without_floor():
    tree, nf = nf_of("fig5-left")
    assert run_valid_sequence(nf, "maximal", tree=tree).survivors() == [["Pass"], ["Pass"], ["Pass"]]
    zero = run_valid_sequence(nf, "maximal", tree=tree, full_support=False)
    assert zero.survivors() == [["Pass", "Drop"], ["Pass", "Drop"], ["Pass"]]


def test_floor_contrast_example():
    _, nf = nf_of("fig5-left")
    surv = [{0, 1}, {0, 1}, {0}]
    drop = nf.strategies[1].index("Drop")
    pos = eliminable(nf, 1, drop, surv, Fraction(1, 10), Fraction(1, 10**4))
    zero = eliminable(nf, 1, drop, surv, Fraction(1, 10), 0)
    assert not pos.feasible and zero.feasible
    check_witness(nf, 1, drop, surv, Fraction(1, 10), 0, zero.sigma)


def test_custom_sequence_breach():
    tree, nf = nf_of("fig1")
    with pytest.raises(ValidityBreach):
        run_valid_sequence(nf, "custom", tree=tree, custom=[{0: ["Out"]}])
    with pytest.raises(ValidityBreach):
        run_valid_sequence(nf, "custom", tree=tree, custom=[{1: ["L", "R"]}])
    ok = run_valid_sequence(nf, "custom", tree=tree, custom=[{0: ["In1"]}])
    assert ok.survivors()[0] == ["Out", "In2"]


def test_schedule_points():
    eps, eta = schedule_point(3, 4)
    assert eps == Fraction(1, 8) and eta == Fraction(1, 128)  # eps / (4 * profiles)
    _, eta3 = schedule_point(3, 4, n_opponents=2)
    assert eta3 == Fraction(1, 16) ** 2 / 8
    assert schedule_point(3, 4, full_support=False)[1] == 0


def test_schedule_record_verifies():
    _, nf = nf_of("fig1")
    surv = [{0, 2}, {0, 1}]
    rec = eliminable_on_schedule(nf, 1, 0, surv, r_max=6, scan=True)
    assert [r for r, _ in rec.checks] == list(range(1, 7))
    assert verify_schedule(nf, rec, surv)


@pytest.mark.parametrize("name", ["fig1", "fig8", "fig3-left", "fig7-right"])
@pytest.mark.parametrize("eps", [Fraction(1, 10), Fraction(1, 5), Fraction(3, 10)])
def test_lp_matches_grid_search(name, eps):
    _, nf = nf_of(name)
    eta = Fraction(1, 50)
    for role in range(2):
        j = 1 - role
        for r in range(1, nf.shape[j] + 1):
            for sj in itertools.combinations(range(nf.shape[j]), r):
                surv = full(nf)
                surv[j] = set(sj)
                for s in range(nf.shape[role]):
                    res = eliminable(nf, role, s, surv, eps, eta)
                    assert res.feasible == grid_feasible(nf, role, s, surv, eps, eta)
                    if res.feasible:
                        check_witness(nf, role, s, surv, eps, eta, res.sigma)


small_int = st.integers(-3, 3)


@settings(max_examples=60, deadline=None)
@given(data=st.data(), n0=st.integers(2, 3), n1=st.integers(2, 3))
def test_random_games_certificates(data, n0, n1):
    pay = np.array([[[data.draw(small_int), data.draw(small_int)] for _ in range(n1)] for _ in range(n0)], float)
    nf = NormalFormGame([[f"a{k}" for k in range(n0)], [f"b{k}" for k in range(n1)]], pay)
    eps, eta = Fraction(1, 5), Fraction(1, 50)
    for role in range(2):
        for s, cert in strictly_dominated(nf, role).items():
            assert verify_dominance(nf, role, cert)
            # a strictly dominated strategy is never a best reply
            assert not eliminable(nf, role, s, full(nf), eps, eta).feasible
        for s in range(nf.shape[role]):
            res = eliminable(nf, role, s, full(nf), eps, eta)
            if res.feasible:
                check_witness(nf, role, s, full(nf), eps, eta, res.sigma)
            elif grid_feasible(nf, role, s, full(nf), eps, eta):
                pytest.fail("grid found a conjecture the LP declared infeasible")


def test_every_generator_nonempty_on_corpus():
    for name in corpus.GAMES:
        tree, nf = nf_of(name)
        gens = ["sw"] + (["bi"] if is_simple_game(tree).relaxed else [])
        for gen in gens:
            st_ = run_valid_sequence(nf, gen, tree=tree)
            assert all(st_.surviving)
            assert verify_certificates(st_)
