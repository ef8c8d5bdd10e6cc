"""Optimal learning policies of a single agent.

The agent's belief state is a vector of Dirichlet counts over the tracked
(opponent infoset, action) pairs of its :class:`ObservationModel`.  An
observation is discarded once any coordinate it touches has reached the
cap, so the state space is finite and every transition either raises the total count or stays
put.  That makes the discounted Bayes-adaptive problem solvable exactly by one
backward pass over count levels; no value iteration is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .beliefs import DEFAULT_CAP, CountState, DirichletPrior
from .game import GameError
from .observation import ObservationModel

TIE_TOL = 1e-12
DEFAULT_MAX_STATES = 2_000_000


def effective_horizon(delta: float, gamma: float, tol: float, payoff_range: float = 1.0) -> int:
    """Smallest T with (delta*gamma)^T * range / (1 - delta*gamma) < tol."""
    if not (0 <= delta < 1 and 0 <= gamma < 1) or tol <= 0:
        raise ValueError("need 0 <= delta, gamma < 1 and tol > 0")
    beta = delta * gamma
    if beta == 0 or payoff_range <= 0:
        return 1
    bound = lambda t: beta**t * payoff_range / (1 - beta)
    t = max(1, math.ceil(math.log(tol * (1 - beta) / payoff_range) / math.log(beta)))
    while t > 1 and bound(t - 1) < tol:
        t -= 1
    while bound(t) >= tol:
        t += 1
    return t


class StateSpace:
    """All count vectors reachable from zero, sorted by an integer code."""

    def __init__(self, model: ObservationModel, cap: int = DEFAULT_CAP,
                 max_states: int = DEFAULT_MAX_STATES):
        self.model = model
        self.cap = int(cap)
        self.dims = [(c, a) for c, acts in enumerate(model.tracked) for a in acts]
        self.dim_coord = np.array([c for c, _ in self.dims], dtype=np.int64)
        n_dims = len(self.dims)
        if (self.cap + 1) ** max(n_dims, 1) >= 2**62:
            raise GameError("count cap too large to encode the belief state")
        self.radix = np.array([(self.cap + 1) ** d for d in range(n_dims)], dtype=np.int64)
        self.increments = [[self._increment(o.pairs) for o in outs] for outs in model.outcomes]

        frontier = np.zeros((1, n_dims), dtype=np.int64)
        found = [frontier]
        seen = set((frontier @ self.radix).tolist())
        incs = [np.array(v) for v in {tuple(v) for row in self.increments for v in row} if any(v)]
        while frontier.size and incs:
            nxt = np.unique(np.concatenate([self.step(frontier, inc) for inc in incs]), axis=0)
            codes = nxt @ self.radix
            fresh = np.array([c not in seen for c in codes.tolist()], dtype=bool)
            nxt = nxt[fresh]
            if nxt.size == 0:
                break
            seen.update(codes[fresh].tolist())
            found.append(nxt)
            if len(seen) > max_states:
                raise GameError(f"belief state budget exceeded: more than {max_states} states at cap {self.cap}")
            frontier = nxt
        allc = np.unique(np.concatenate(found), axis=0)
        codes = allc @ self.radix
        order = np.argsort(codes)
        self.counts = allc[order]
        self.codes = codes[order]
        self.level = self.counts.sum(axis=1)
        self.levels = [np.flatnonzero(self.level == lv) for lv in range(int(self.level.max()) + 1)]

    def __len__(self) -> int:
        return len(self.codes)

    def _increment(self, pairs) -> np.ndarray:
        inc = np.zeros(len(self.dims), dtype=np.int64)
        for c, a in pairs:
            if (c, a) in self.dims:
                inc[self.dims.index((c, a))] = 1
        return inc

    def coord_totals(self, counts: np.ndarray) -> np.ndarray:
        n_coords = len(self.model.coords)
        out = np.zeros((len(counts), n_coords), dtype=np.int64)
        for d, c in enumerate(self.dim_coord):
            out[:, c] += counts[:, d]
        return out

    def step(self, counts: np.ndarray, inc: np.ndarray) -> np.ndarray:
        """Counts after one observation with increment ``inc``, respecting the cap."""
        return self.apply(counts, np.broadcast_to(inc, counts.shape))

    def apply(self, counts: np.ndarray, incs: np.ndarray) -> np.ndarray:
        """Row-wise update: each row's increment is dropped if it touches a saturated coordinate."""
        full = self.coord_totals(counts)[:, self.dim_coord] >= self.cap
        blocked = ((incs > 0) & full).any(axis=1)
        return counts + incs * ~blocked[:, None]

    def index(self, counts: np.ndarray) -> np.ndarray:
        codes = np.atleast_2d(counts) @ self.radix
        pos = np.searchsorted(self.codes, codes)
        pos = np.minimum(pos, len(self.codes) - 1)
        if not np.array_equal(self.codes[pos], codes):
            raise GameError("count state outside the enumerated belief space")
        return pos

    def successors(self, k: int) -> list[np.ndarray]:
        return [self.index(self.step(self.counts, inc)) for inc in self.increments[k]]

    def state_of(self, counts_row: np.ndarray) -> CountState:
        per = {}
        for (c, a), n in zip(self.dims, counts_row):
            coord = self.model.coords[c]
            per.setdefault(coord.name, [0] * len(coord.actions))[a] = int(n)
        for coord in self.model.coords:
            per.setdefault(coord.name, [0] * len(coord.actions))
        return CountState(tuple((h, tuple(v)) for h, v in sorted(per.items())))

    def row_of(self, state: CountState) -> np.ndarray:
        row = np.zeros(len(self.dims), dtype=np.int64)
        for d, (c, a) in enumerate(self.dims):
            row[d] = state.get(self.model.coords[c].name)[a]
        return row


def posterior_means(space: StateSpace, prior: DirichletPrior) -> list[np.ndarray]:
    """Per coord, an (n_states x n_actions) array of posterior mean probabilities."""
    model = space.model
    out = []
    for c, coord in enumerate(model.coords):
        w = np.asarray(prior.weights[coord.name], dtype=float)
        x = np.broadcast_to(w, (len(space), len(w))).copy()
        for d, (cc, a) in enumerate(space.dims):
            if cc == c:
                x[:, a] += space.counts[:, d]
        out.append(x / x.sum(axis=1, keepdims=True))
    return out


def subjective_outcome_probs(space: StateSpace, means: list[np.ndarray]) -> list[list[np.ndarray]]:
    res = []
    for outs in space.model.outcomes:
        row = []
        for o in outs:
            p = np.ones(len(space))
            for c, a in o.pairs:
                p = p * means[c][:, a]
            row.append(p)
        res.append(row)
    return res


def _argmax_low(q: np.ndarray) -> np.ndarray:
    best = q.max(axis=1, keepdims=True)
    tol = TIE_TOL * np.maximum(1.0, np.abs(best))
    return np.argmax(q >= best - tol, axis=1)


@dataclass
class Policy:
    """Map from belief state to own pure strategy, plus the values behind it."""

    model: ObservationModel
    prior: DirichletPrior
    space: StateSpace
    delta: float
    gamma: float
    action: np.ndarray
    value: np.ndarray
    q: np.ndarray  # state x strategy
    myopic: bool
    residual: float
    tie_rule: str = "lowest-index"
    diagnostics: dict = field(default_factory=dict)

    @property
    def beta(self) -> float:
        return self.delta * self.gamma

    def __call__(self, state: CountState) -> int:
        return int(self.action[self.space.index(self.space.row_of(state))[0]])

    def label(self, state: CountState) -> str:
        return self.model.strategies[self(state)]

    def at_zero(self) -> str:
        return self.model.strategies[int(self.action[0])]

    def strategies_used(self) -> set[str]:
        return {self.model.strategies[k] for k in np.unique(self.action)}

    def to_dict(self) -> dict:
        rows = []
        for n, row in enumerate(self.space.counts):
            st = self.space.state_of(row)
            rows.append({"counts": {h: list(c) for h, c in st.counts},
                         "strategy": self.model.strategies[int(self.action[n])],
                         "value": float(self.value[n])})
        return {"role": self.model.role, "delta": self.delta, "gamma": self.gamma,
                "cap": self.space.cap, "myopic": self.myopic, "tie_rule": self.tie_rule,
                "bellman_residual": self.residual, "states": rows}


def solve_policy(model: ObservationModel, prior: DirichletPrior, delta: float, gamma: float,
                 cap: int = DEFAULT_CAP, max_states: int = DEFAULT_MAX_STATES) -> Policy:
    """Exactly optimal policy for discount delta*gamma with ties broken toward the lowest index.

    Passive roles (observations independent of own play) and delta*gamma = 0
    need no look-ahead and get the myopic argmax of posterior-mean payoffs.
    """
    if not (0 <= delta < 1 and 0 <= gamma < 1):
        raise ValueError("need 0 <= delta, gamma < 1")
    space = StateSpace(model, cap, max_states)
    means = posterior_means(space, prior)
    probs = subjective_outcome_probs(space, means)
    K = model.n_strategies
    rewards = np.column_stack([
        sum((p * o.payoff for p, o in zip(probs[k], model.outcomes[k])), np.zeros(len(space)))
        for k in range(K)
    ])
    beta = delta * gamma
    if model.passive or beta == 0.0:
        action = _argmax_low(rewards)
        value = rewards[np.arange(len(space)), action]
        return Policy(model, prior, space, delta, gamma, action, value, rewards, True, 0.0,
                      diagnostics={"states": len(space)})

    succ = [space.successors(k) for k in range(K)]
    value = np.zeros(len(space))
    action = np.zeros(len(space), dtype=np.int64)
    for idx in reversed(space.levels):
        if idx.size == 0:
            continue
        qs = np.empty((idx.size, K))
        for k in range(K):
            cont = np.zeros(idx.size)
            stay = np.zeros(idx.size)
            for p, s in zip(probs[k], succ[k]):
                pk, sk = p[idx], s[idx]
                same = sk == idx
                cont += np.where(same, 0.0, pk * value[sk])
                stay += np.where(same, pk, 0.0)
            qs[:, k] = (rewards[idx, k] + beta * cont) / (1.0 - beta * stay)
        a = _argmax_low(qs)
        action[idx] = a
        value[idx] = qs[np.arange(idx.size), a]
    q = np.column_stack([
        rewards[:, k] + beta * sum(p * value[s] for p, s in zip(probs[k], succ[k]))
        for k in range(K)
    ])
    residual = float(np.max(np.abs(q.max(axis=1) - value))) if len(space) else 0.0
    return Policy(model, prior, space, delta, gamma, action, value, q, False, residual,
                  diagnostics={"states": len(space)})


def myopic_actions(model: ObservationModel, prior: DirichletPrior, space: StateSpace) -> np.ndarray:
    """Brute-force myopic choice: posterior-mean expected payoff of each strategy, state by state."""
    out = np.zeros(len(space), dtype=np.int64)
    for n, row in enumerate(space.counts):
        beta = {}
        for c, coord in enumerate(model.coords):
            w = np.array(prior.weights[coord.name], dtype=float)
            for d, (cc, a) in enumerate(space.dims):
                if cc == c:
                    w[a] += row[d]
            beta[coord.name] = w / w.sum()
        vals = model.expected_payoffs(beta)
        out[n] = _argmax_low(vals[None, :])[0]
    return out


def policy_invariance_check(a: Policy, b: Policy, strategy_map: Sequence[int] | None = None,
                            coord_map: Mapping[str, str] | None = None) -> tuple[bool, str]:
    """Whether two policies prescribe identified strategies at every identified belief state.

    ``coord_map`` renames ``a``'s coordinates to ``b``'s; ``strategy_map[k]``
    is ``b``'s strategy identified with ``a``'s strategy ``k``.
    """
    smap = np.asarray(strategy_map or list(range(a.model.n_strategies)))
    cmap = dict(coord_map or {})
    if len(a.space) != len(b.space):
        return False, f"state counts differ ({len(a.space)} vs {len(b.space)})"
    b_dims = {(b.model.coords[c].name, b.model.coords[c].actions[x]): d for d, (c, x) in enumerate(b.space.dims)}
    cols = []
    for c, x in a.space.dims:
        coord = a.model.coords[c]
        key = (cmap.get(coord.name, coord.name), coord.actions[x])
        if key not in b_dims:
            return False, f"count of {coord.name}:{coord.actions[x]} has no counterpart"
        cols.append(b_dims[key])
    if sorted(cols) != list(range(len(b.space.dims))):
        return False, "tracked counts do not correspond one to one"
    rows = np.zeros_like(a.space.counts)
    rows[:, cols] = a.space.counts
    try:
        m = b.space.index(rows)
    except GameError:
        return False, "some belief state has no counterpart"
    bad = np.flatnonzero(smap[a.action] != b.action[m])
    if bad.size:
        st = a.space.state_of(a.space.counts[bad[0]])
        return False, f"policies differ at {st.counts}"
    return True, "policies agree state for state"
