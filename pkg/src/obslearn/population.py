"""Population dynamics: overlapping generations of Bayesian learners.

Each role is a continuum of agents.  Every period a fraction ``1 - gamma``
dies and is replaced by newborns with empty histories; survivors play their
policy's strategy against the opponents' aggregate play and update their
counts.  Because policies depend only on priors and (delta, gamma), the
aggregate response to fixed opponent play is the policy averaged over the
stationary distribution of a single agent's count chain, which is computed
exactly level by level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import optimize

from .beliefs import DEFAULT_CAP, DirichletPrior
from .game import (
    GameError,
    GameTree,
    MixedStrategy,
    TerminalPartition,
    default_partitions,
    derive_normal_form,
    mixed_to_behavior,
    observation_cell,
)
from .observation import ObservationModel, from_tree
from .policy import DEFAULT_MAX_STATES, Policy, solve_policy

TRUNC_TOL = 1e-12


# ------------------------------------------------------------ single role
@dataclass
class PopulationState:
    """Mass over belief states for each role (dense over each role's enumerated states)."""

    mass: list[np.ndarray]
    dropped: list[float]
    trunc_tol: float = TRUNC_TOL

    def total(self, role: int) -> float:
        return float(self.mass[role].sum())


def true_outcome_probs(model: ObservationModel, behavior: Mapping[str, Sequence[float]]) -> list[np.ndarray]:
    return [model.outcome_probs(k, behavior) for k in range(model.n_strategies)]


def _kernel_parts(policy: Policy):
    space = policy.space
    if "succ" not in policy.diagnostics:
        policy.diagnostics["succ"] = [space.successors(k) for k in range(policy.model.n_strategies)]
    return policy.diagnostics["succ"]


def stationary_mass(policy: Policy, q: list[np.ndarray], gamma: float) -> np.ndarray:
    """Exact stationary distribution of one agent's count chain.

    Newborns enter the zero state with mass ``1 - gamma``.  Levels are solved
    in increasing order; a state's self-loop (an observation that changes no
    tracked count) is absorbed by dividing by ``1 - gamma * stay``.
    """
    space = policy.space
    succ = _kernel_parts(policy)
    n = len(space)
    inflow = np.zeros(n)
    inflow[0] = 1.0 - gamma
    mass = np.zeros(n)
    act = policy.action
    for idx in space.levels:
        if idx.size == 0:
            continue
        stay = np.zeros(idx.size)
        for k in np.unique(act[idx]):
            sel = idx[act[idx] == k]
            where = act[idx] == k
            for p, s in zip(q[k], succ[k]):
                stay[where] += np.where(s[sel] == sel, p, 0.0)
        m = inflow[idx] / (1.0 - gamma * stay)
        mass[idx] = m
        for k in np.unique(act[idx]):
            where = act[idx] == k
            sel = idx[where]
            for p, s in zip(q[k], succ[k]):
                if p == 0.0:
                    continue
                tgt = s[sel]
                moving = tgt != sel
                np.add.at(inflow, tgt[moving], gamma * p * m[where][moving])
    return mass


def update_rule(state: PopulationState, policies: Sequence[Policy], qs: Sequence[list[np.ndarray]],
                gamma: float) -> PopulationState:
    """One period of the population update for every role.

    Survivors (mass ``gamma``) move along the observation kernel induced by
    their policy and the true opponent play; newborns (``1 - gamma``) start at
    zero.  States whose mass falls below the truncation threshold are zeroed
    and the removed mass is reported.
    """
    new_mass, dropped = [], []
    for mu, pol, q in zip(state.mass, policies, qs):
        succ = _kernel_parts(pol)
        out = np.zeros_like(mu)
        out[0] += 1.0 - gamma
        for k in range(pol.model.n_strategies):
            sel = np.flatnonzero((pol.action == k) & (mu > 0))
            for p, s in zip(q[k], succ[k]):
                np.add.at(out, s[sel], gamma * p * mu[sel])
        small = (out > 0) & (out < state.trunc_tol)
        dropped.append(float(out[small].sum()))
        out[small] = 0.0
        new_mass.append(out)
    return PopulationState(new_mass, dropped, state.trunc_tol)


def aggregate_strategy(policy: Policy, mass: np.ndarray) -> np.ndarray:
    """Population mixture over own pure strategies."""
    return np.bincount(policy.action, weights=mass, minlength=policy.model.n_strategies)


# ----------------------------------------------------------- whole game
@dataclass
class Learners:
    """Everything needed to evaluate aggregate responses in one game at one (delta, gamma)."""

    tree: GameTree
    partitions: list[TerminalPartition]
    priors: list[DirichletPrior]
    delta: float
    gamma: float
    models: list[ObservationModel]
    policies: list[Policy]

    @classmethod
    def build(cls, tree: GameTree, partitions: Sequence[TerminalPartition], priors: Sequence[DirichletPrior],
              delta: float, gamma: float, cap: int | Sequence[int] = DEFAULT_CAP,
              models: Sequence[ObservationModel] | None = None,
              max_states: int = DEFAULT_MAX_STATES) -> "Learners":
        parts = default_partitions(tree, partitions)
        models = list(models) if models is not None else [from_tree(tree, parts, i) for i in range(tree.players)]
        caps = [cap] * tree.players if np.isscalar(cap) else list(cap)
        policies = [solve_policy(models[i], priors[i], delta, gamma, caps[i], max_states)
                    for i in range(tree.players)]
        return cls(tree, parts, list(priors), delta, gamma, models, policies)

    def behavior_of(self, mixed: Sequence[np.ndarray]) -> dict[str, np.ndarray]:
        merged = {}
        for i, m in enumerate(mixed):
            b, _ = mixed_to_behavior(self.tree, MixedStrategy(i, np.asarray(m, dtype=float)))
            merged.update(b.mix)
        return merged

    def response(self, role: int, behavior: Mapping[str, np.ndarray]) -> np.ndarray:
        """Aggregate mixed strategy of ``role`` when opponents play ``behavior`` forever."""
        pol = self.policies[role]
        q = true_outcome_probs(self.models[role], behavior)
        return aggregate_strategy(pol, stationary_mass(pol, q, self.gamma))

    def response_all(self, mixed: Sequence[np.ndarray]) -> list[np.ndarray]:
        beh = self.behavior_of(mixed)
        return [self.response(i, beh) for i in range(self.tree.players)]

    def newborn_play(self) -> list[np.ndarray]:
        return [np.eye(p.model.n_strategies)[int(p.action[0])] for p in self.policies]

    def payoffs_against(self, role: int, mixed: Sequence[np.ndarray]) -> np.ndarray:
        return self.models[role].expected_payoffs(self.behavior_of(mixed))

    def nash_slack(self, mixed: Sequence[np.ndarray]) -> list[float]:
        """Per role, the best pure-deviation gain against the profile."""
        out = []
        for i in range(self.tree.players):
            u = self.payoffs_against(i, mixed)
            out.append(float(u.max() - np.asarray(mixed[i]) @ u))
        return out


def aggregate_response(learners: Learners, role: int, opponents: Sequence[np.ndarray]) -> np.ndarray:
    """Long-run aggregate play of ``role`` against fixed opponent mixed strategies.

    ``opponents`` is a full profile; the entry for ``role`` itself is ignored.
    """
    return learners.response(role, learners.behavior_of(opponents))


@dataclass
class SteadyState:
    mixed: list[np.ndarray]
    behavior: dict[str, np.ndarray]
    residual: float
    iterations: int
    converged: bool
    cycle_period: int | None
    trace: list[float] = field(default_factory=list)
    start: int = 0

    def prob(self, infoset: str, action_index: int) -> float:
        return float(self.behavior[infoset][action_index])


def _project(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, None)
    tot = x.sum()
    return x / tot if tot > 0 else np.full(x.size, 1.0 / x.size)


def _polish(learners: Learners, init: Sequence[np.ndarray], tol: float, max_eval: int):
    """Solve R(pi) = pi with a quasi-Newton root finder.

    Policies are fixed, so the aggregate response is a smooth function of the
    opponents' play and Powell's hybrid method converges where plain damped
    iteration oscillates around a mixed steady state.
    """
    sizes = [len(x) for x in init]
    cuts = np.cumsum(sizes)[:-1]

    def split(v):
        return [_project(part) for part in np.split(v, cuts)]

    def F(v):
        return np.concatenate(learners.response_all(split(v))) - v

    sol = optimize.root(F, np.concatenate(init), method="hybr",
                        options={"xtol": min(tol, 1e-12), "maxfev": max_eval})
    pi = split(sol.x)
    resp = learners.response_all(pi)
    resid = max(float(np.abs(r - p).max()) for r, p in zip(resp, pi))
    return resp, resid, int(sol.nfev)


def _fixed_point(learners: Learners, init: Sequence[np.ndarray], damping: float, tol: float,
                 max_iter: int, polish_after: int = 100) -> SteadyState:
    pi = [np.asarray(x, dtype=float).copy() for x in init]
    history: list[np.ndarray] = []
    trace = []
    cycle = None
    resid = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        resp = learners.response_all(pi)
        resid = max(float(np.abs(r - p).max()) for r, p in zip(resp, pi))
        trace.append(resid)
        if resid < tol:
            return SteadyState(resp, learners.behavior_of(resp), resid, it, True, None, trace)
        flat = np.concatenate(pi)
        for period in range(2, min(8, len(history)) + 1):
            if np.abs(history[-period] - flat).max() < tol:
                cycle = period
        if cycle or it >= polish_after:
            break
        history = (history + [flat])[-8:]
        pi = [(1 - damping) * p + damping * r for p, r in zip(pi, resp)]
    if resid >= tol and it < max_iter:
        # start the root finder from the average of the recent iterates
        recent = history[-8:] or [np.concatenate(pi)]
        avg = np.mean(recent, axis=0)
        start = np.split(avg, np.cumsum([len(x) for x in pi])[:-1])
        resp, res2, nfev = _polish(learners, start, tol, max(50, max_iter - it))
        trace.append(res2)
        if res2 < tol:
            return SteadyState(resp, learners.behavior_of(resp), res2, it + nfev, True, None, trace)
    return SteadyState(pi, learners.behavior_of(pi), resid, it, False, cycle, trace)


def steady_state(learners: Learners, init: Sequence[np.ndarray] | str | None = None,
                 damping: float = 0.5, tol: float = 1e-10, max_iter: int = 5000,
                 starts: int = 1, seed: int = 0, polish_after: int = 100) -> SteadyState:
    """Fixed point of the aggregate response map.

    Damped iteration from ``init`` (newborn play by default) runs for up to
    ``polish_after`` steps; if it has not converged by then a root finder
    takes over.  Additional random starts are tried when ``starts`` > 1; the
    converged result from the earliest start is returned, with all attempts
    kept in ``attempts``.
    """
    if init is None or (isinstance(init, str) and init == "newborn"):
        init = learners.newborn_play()
    rng = np.random.default_rng(seed)
    attempts = [_fixed_point(learners, init, damping, tol, max_iter, polish_after)]
    for s in range(1, starts):
        rand = [rng.dirichlet(np.ones(p.model.n_strategies)) for p in learners.policies]
        res = _fixed_point(learners, rand, damping, tol, max_iter, polish_after)
        res.start = s
        attempts.append(res)
    best = min(attempts, key=lambda a: (not a.converged, a.residual if not a.converged else 0, a.start))
    best.attempts = attempts  # type: ignore[attr-defined]
    return best


# ------------------------------------------------------------ Monte Carlo
def simulate_population(learners: Learners, n_agents: int, periods: int, burn_in: int,
                        seed: int) -> list[np.ndarray]:
    """Agent-based simulation with random matching; returns time-averaged aggregate play.

    Each period agents are matched in groups of one per role, the reached
    terminal node is looked up from the pure-strategy table, each agent's
    observation is read off its terminal partition, and then every agent is
    replaced by a newborn with probability ``1 - gamma``.  All agents start
    with empty histories; ``burn_in`` periods are discarded before averaging.
    """
    tree, players = learners.tree, learners.tree.players
    rng = np.random.default_rng(seed)
    nf = derive_normal_form(tree)
    term_index = {z: n for n, z in enumerate(tree.terminals)}
    table = np.vectorize(lambda z: term_index[z])(nf.terminal)
    incs = []
    for i in range(players):
        space = learners.policies[i].space
        dims = {(space.model.coords[c].name, space.model.coords[c].actions[a]): d
                for d, (c, a) in enumerate(space.dims)}
        inc = np.zeros((len(tree.terminals), len(space.dims)), dtype=np.int64)
        for z, n in term_index.items():
            _, rev = observation_cell(tree, learners.partitions[i], z)
            for pair in rev:
                if pair in dims:
                    inc[n, dims[pair]] = 1
        incs.append(inc)
    counts = [np.zeros((n_agents, len(p.space.dims)), dtype=np.int64) for p in learners.policies]
    totals = [np.zeros(p.model.n_strategies) for p in learners.policies]
    for t in range(burn_in + periods):
        acts = [learners.policies[i].action[learners.policies[i].space.index(counts[i])]
                for i in range(players)]
        perms = [rng.permutation(n_agents) for _ in range(players)]
        profile = tuple(acts[i][perms[i]] for i in range(players))
        z = table[profile]
        for i in range(players):
            space = learners.policies[i].space
            zi = np.empty(n_agents, dtype=np.int64)
            zi[perms[i]] = z
            inc = incs[i][zi]
            counts[i] = space.apply(counts[i], inc)
            dead = rng.random(n_agents) >= learners.gamma
            counts[i][dead] = 0
            if t >= burn_in:
                totals[i] += np.bincount(acts[i], minlength=len(totals[i]))
    return [x / (periods * n_agents) for x in totals]


def montecarlo_response(learners: Learners, role: int, mixed: Sequence[np.ndarray], n_agents: int,
                        periods: int, burn_in: int, seed: int) -> np.ndarray:
    """Aggregate response of ``role`` estimated by simulating agents against fixed opponent play."""
    tree = learners.tree
    rng = np.random.default_rng(seed)
    nf = derive_normal_form(tree)
    term_index = {z: n for n, z in enumerate(tree.terminals)}
    pol = learners.policies[role]
    space = pol.space
    dims = {(space.model.coords[c].name, space.model.coords[c].actions[a]): d
            for d, (c, a) in enumerate(space.dims)}
    inc_table = np.zeros((len(tree.terminals), len(space.dims)), dtype=np.int64)
    for z, n in term_index.items():
        _, rev = observation_cell(tree, learners.partitions[role], z)
        for pair in rev:
            if pair in dims:
                inc_table[n, dims[pair]] = 1
    table = np.vectorize(lambda z: term_index[z])(nf.terminal)
    counts = np.zeros((n_agents, len(space.dims)), dtype=np.int64)
    total = np.zeros(pol.model.n_strategies)
    for t in range(burn_in + periods):
        act = pol.action[space.index(counts)]
        prof = []
        for j in range(tree.players):
            if j == role:
                prof.append(act)
            else:
                prof.append(rng.choice(len(mixed[j]), size=n_agents, p=np.asarray(mixed[j]) / np.sum(mixed[j])))
        inc = inc_table[table[tuple(prof)]]
        counts = space.apply(counts, inc)
        counts[rng.random(n_agents) >= learners.gamma] = 0
        if t >= burn_in:
            total += np.bincount(act, minlength=len(total))
    return total / (periods * n_agents)


# ------------------------------------------------------------------ sweeps
@dataclass
class SweepCell:
    delta: float
    gamma: float
    steady: SteadyState
    nash_slack: list[float]
    monitored: dict[str, float]


@dataclass
class SweepResult:
    cells: list[SweepCell]
    inner_cauchy: dict[float, float]  # per delta: sup-norm change between last two gamma points
    outer_cauchy: float | None
    candidate: list[np.ndarray]
    candidate_behavior: dict[str, np.ndarray]

    def series(self, delta: float, fn: Callable[[SweepCell], float]) -> list[float]:
        return [fn(c) for c in self.cells if c.delta == delta]


def check_grid(deltas: Sequence[float], gammas: Mapping[float, Sequence[float]]) -> None:
    for d in deltas:
        for g in gammas[d]:
            if not (g > d and g >= 1 - (1 - d) / 10 - 1e-12):
                raise GameError(f"grid cell (delta={d}, gamma={g}) violates gamma >= 1 - (1 - delta)/10")


def patient_sweep(tree: GameTree, partitions: Sequence[TerminalPartition], priors: Sequence[DirichletPrior],
                  deltas: Sequence[float], gammas: Mapping[float, Sequence[float]],
                  cap: int | Sequence[int] = DEFAULT_CAP, init=None, damping: float = 0.5,
                  tol: float = 1e-10, max_iter: int = 5000,
                  monitors: Mapping[str, Callable[[SweepCell], float]] | None = None,
                  enforce_grid: bool = True) -> SweepResult:
    """Steady states over a (delta, gamma) grid with gamma approaching 1 faster than delta."""
    if enforce_grid:
        check_grid(deltas, gammas)
    cells = []
    models = None
    for d in deltas:
        for g in gammas[d]:
            learners = Learners.build(tree, partitions, priors, d, g, cap, models)
            models = learners.models
            st = steady_state(learners, init, damping, tol, max_iter)
            cell = SweepCell(d, g, st, learners.nash_slack(st.mixed), {})
            for name, fn in (monitors or {}).items():
                cell.monitored[name] = float(fn(cell))
            cells.append(cell)
    flat = lambda c: np.concatenate(c.steady.mixed)
    inner = {}
    for d in deltas:
        row = [c for c in cells if c.delta == d]
        inner[d] = float(np.abs(flat(row[-1]) - flat(row[-2])).max()) if len(row) > 1 else float("nan")
    terminals = [[c for c in cells if c.delta == d][-1] for d in deltas]
    outer = float(np.abs(flat(terminals[-1]) - flat(terminals[-2])).max()) if len(terminals) > 1 else None
    last = terminals[-1].steady
    return SweepResult(cells, inner, outer, last.mixed, last.behavior)
