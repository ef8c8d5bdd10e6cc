from fractions import Fraction

import numpy as np
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from obslearn.lp import solve, verify_farkas, verify_feasible


def test_small_optimum():
    # max x + y  s.t.  x + 2y <= 4, 3x + y <= 6
    res = solve([1, 1], A_ub=[[1, 2], [3, 1]], b_ub=[4, 6], maximize=True)
    assert res.status == "optimal"
    assert res.x == [Fraction(8, 5), Fraction(6, 5)]
    assert res.value == Fraction(14, 5)


def test_infeasible_with_certificate():
    A_ub, b_ub = [[1, 1]], [1]
    A_eq, b_eq = [[1, 0]], [2]
    res = solve([0, 0], A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq)
    assert res.status == "infeasible"
    assert verify_farkas(A_ub, b_ub, A_eq, b_eq, res.farkas_ub, res.farkas_eq)


def test_unbounded():
    assert solve([-1, 0], A_ub=[[0, 1]], b_ub=[1]).status == "unbounded"


def test_negative_rhs():
    # x >= 2 written as -x <= -2
    res = solve([1], A_ub=[[-1]], b_ub=[-2])
    assert res.status == "optimal" and res.value == 2


def test_redundant_equalities():
    res = solve([1, 1], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    assert res.status == "optimal" and res.value == 1


ints = st.integers(-4, 4)


@settings(max_examples=150, deadline=None)
@given(m=st.integers(1, 4), n=st.integers(1, 4), data=st.data())
def test_agrees_with_floating_solver(m, n, data):
    A = [[data.draw(ints) for _ in range(n)] for _ in range(m)]
    b = [data.draw(ints) for _ in range(m)]
    c = [data.draw(ints) for _ in range(n)]
    # a box keeps everything bounded
    A_box = A + [[1 if j == k else 0 for j in range(n)] for k in range(n)]
    b_box = b + [5] * n
    res = solve(c, A_ub=A_box, b_ub=b_box)
    ref = linprog(c, A_ub=np.array(A_box, float), b_ub=np.array(b_box, float), bounds=[(0, None)] * n,
                  method="highs")
    if ref.status == 2:
        assert res.status == "infeasible"
        assert verify_farkas(A_box, b_box, [], [], res.farkas_ub, res.farkas_eq)
    else:
        assert res.status == "optimal"
        assert verify_feasible(res.x, A_box, b_box, [], [])
        assert abs(float(res.value) - ref.fun) < 1e-7
