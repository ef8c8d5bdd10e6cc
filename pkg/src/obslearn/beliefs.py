"""Dirichlet beliefs about opponent play and their conjugate updates."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .game import GameError, GameTree, PureStrategy

DEFAULT_CAP = 64


@dataclass
class DirichletPrior:
    """Independent Dirichlet beliefs, one per opponent information set."""

    role: int
    weights: dict[str, np.ndarray]

    def __post_init__(self):
        self.weights = {h: np.asarray(w, dtype=float) for h, w in self.weights.items()}
        for h, w in self.weights.items():
            if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)) or (w <= 0).any():
                raise GameError(f"prior weights at {h} must be finite and strictly positive, got {w}")

    @classmethod
    def uniform(cls, tree: GameTree, role: int, weight: float = 1.0,
                overrides: Mapping[str, Mapping[str, float]] | None = None) -> "DirichletPrior":
        weights = {}
        for j in range(tree.players):
            if j == role:
                continue
            for h in tree.role_infosets[j]:
                acts = tree.infosets[h].actions
                given = (overrides or {}).get(h, {})
                unknown = set(given) - set(acts)
                if unknown:
                    raise GameError(f"prior for {h} names unknown actions {sorted(unknown)}")
                weights[h] = np.array([float(given.get(a, weight)) for a in acts])
        for h in (overrides or {}):
            if h not in weights:
                raise GameError(f"prior names {h!r}, which is not an opponent information set")
        return cls(role, weights)

    def mean(self, h: str) -> np.ndarray:
        return self.weights[h] / self.weights[h].sum()

    def sample(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        return {h: rng.dirichlet(w) for h, w in self.weights.items()}

    def logpdf(self, behavior: Mapping[str, Sequence[float]]) -> float:
        total = 0.0
        for h, w in self.weights.items():
            x = np.asarray(behavior[h], dtype=float)
            if (x <= 0).any():
                return -np.inf
            total += gammaln(w.sum()) - gammaln(w).sum() + float(((w - 1) * np.log(x)).sum())
        return total

    def to_dict(self, tree: GameTree | None = None) -> dict:
        out = {}
        for h, w in self.weights.items():
            acts = tree.infosets[h].actions if tree else [str(k) for k in range(len(w))]
            out[h] = {a: float(x) for a, x in zip(acts, w)}
        return {"role": self.role, "weights": out}


def prior_from_dict(data: Mapping, tree: GameTree) -> DirichletPrior:
    if set(data) - {"role", "weights"}:
        raise GameError(f"prior has unknown keys {sorted(set(data) - {'role', 'weights'})}")
    return DirichletPrior.uniform(tree, int(data["role"]), overrides=data.get("weights", {}))


def load_prior(path: str | Path, tree: GameTree) -> DirichletPrior:
    return prior_from_dict(json.loads(Path(path).read_text()), tree)


def load_priors(path: str | Path, tree: GameTree) -> list[DirichletPrior]:
    """A file holding either one prior object or a list of them (missing roles get uniform priors)."""
    data = json.loads(Path(path).read_text())
    items = data if isinstance(data, list) else [data]
    given = {int(d["role"]): prior_from_dict(d, tree) for d in items}
    return [given.get(i) or DirichletPrior.uniform(tree, i) for i in range(tree.players)]


# -------------------------------------------------------------- count states
@dataclass(frozen=True)
class CountState:
    """Observation counts per opponent infoset plus how often each own strategy was played."""

    counts: tuple[tuple[str, tuple[int, ...]], ...]
    own: tuple[int, ...] = ()

    @classmethod
    def zero(cls, prior: DirichletPrior, n_own: int = 0) -> "CountState":
        return cls(tuple((h, (0,) * len(w)) for h, w in sorted(prior.weights.items())), (0,) * n_own)

    def get(self, h: str) -> tuple[int, ...]:
        for name, c in self.counts:
            if name == h:
                return c
        raise KeyError(h)

    def total(self) -> int:
        return sum(sum(c) for _, c in self.counts)


def update(prior: DirichletPrior, state: CountState, own: PureStrategy | int | None,
           revealed: Iterable[tuple[str, str]], tree: GameTree, cap: int | None = DEFAULT_CAP) -> CountState:
    """Add one observation.

    Every revealed opponent (infoset, action) pair increments its count; the
    observer's own pairs are skipped.  Once any revealed information set has
    a total count of ``cap``, the whole observation is discarded, so counts
    that are revealed together also stop together.
    """
    counts = {h: list(c) for h, c in state.counts}
    seen = set()
    hits = []
    for h, a in revealed:
        if h not in tree.infosets or a not in tree.infosets[h].actions:
            raise GameError(f"revealed pair ({h}, {a}) is not part of the game")
        if tree.infosets[h].owner == prior.role:
            continue
        if h in seen:
            raise GameError(f"information set {h} revealed twice in one observation")
        seen.add(h)
        hits.append((h, tree.infosets[h].index(a)))
    if cap is None or all(sum(counts[h]) < cap for h, _ in hits):
        for h, k in hits:
            counts[h][k] += 1
    own_counts = list(state.own)
    if own is not None and own_counts:
        k = own if isinstance(own, int) else tree.strategy_index(prior.role, own.choice)
        own_counts[k] += 1
    return CountState(tuple((h, tuple(counts[h])) for h, _ in state.counts), tuple(own_counts))


def posterior_mean(prior: DirichletPrior, state: CountState) -> dict[str, np.ndarray]:
    out = {}
    for h, w in prior.weights.items():
        x = w + np.asarray(state.get(h), dtype=float)
        out[h] = x / x.sum()
    return out


# ------------------------------------------------------- posterior concentration
@dataclass
class ConcentrationRecord:
    eta: float
    ns: list[int]
    mass: list[float]
    stderr: list[float]
    first_n: int | None  # smallest tested n with mass >= 1 - eta


def concentration_profile(weights: Sequence[float], truth: Sequence[float], ns: Sequence[int],
                          eta: float, rng: np.random.Generator, draws: int = 4000,
                          streams: int = 20) -> ConcentrationRecord:
    """Posterior mass within ``eta`` (sup norm) of the empirical frequencies.

    For each sample size ``n``, ``streams`` independent data sets are drawn
    from ``truth``; for each, the Dirichlet posterior is sampled ``draws``
    times.  The reported mass averages over streams.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    w = np.asarray(weights, dtype=float)
    truth = np.asarray(truth, dtype=float)
    masses, errs, first = [], [], None
    for n in ns:
        per = []
        for _ in range(streams):
            counts = rng.multinomial(n, truth) if n > 0 else np.zeros_like(w)
            emp = counts / n if n > 0 else w / w.sum()
            post = rng.dirichlet(w + counts, size=draws)
            per.append(np.mean(np.abs(post - emp).max(axis=1) <= eta))
        per = np.array(per)
        masses.append(float(per.mean()))
        errs.append(float(np.sqrt(per.var(ddof=1) / streams + per.mean() * (1 - per.mean()) / (draws * streams)))
                    if streams > 1 else 0.0)
        if first is None and n > 0 and masses[-1] >= 1 - eta:
            first = int(n)
    return ConcentrationRecord(eta, list(map(int, ns)), masses, errs, first)


# ------------------------------------------------------------ equilibrium form
@dataclass
class FormWitness:
    ok: bool
    reason: str
    a1_star: str | None = None
    h2_star: str | None = None
    # per P2 infoset: (the P1 action it best-replies to, P2's prescribed action)
    witness: dict[str, tuple[str, str]] = field(default_factory=dict)
    rho: dict[str, list[str]] = field(default_factory=dict)


def _family(tree: GameTree):
    """(P1 infoset, {P1 action: P2 infoset or None}, utility lookup) for the two-stage family."""
    if tree.players != 2:
        raise GameError("outside the two-player family: game must have exactly two roles")
    root = tree.nodes[tree.root]
    if root.owner != 0 or len(tree.role_infosets[0]) != 1:
        raise GameError("outside the two-player family: role 1 must move once, at the root")
    leads: dict[str, str | None] = {}
    pay: dict[tuple[str, str | None], tuple[float, ...]] = {}
    for a, c in root.edges:
        child = tree.nodes[c]
        if child.is_terminal:
            leads[a] = None
            pay[(a, None)] = child.payoffs
            continue
        if child.owner != 1 or any(not tree.nodes[g].is_terminal for _, g in child.edges):
            raise GameError("outside the two-player family: role 2 must move once and end the game")
        leads[a] = child.infoset
        for b, g in child.edges:
            pay[(a, b)] = tree.nodes[g].payoffs
    return root.infoset, leads, pay


def verify_equilibrium_form(tree: GameTree, target: Mapping[str, str]) -> FormWitness:
    """Check that a pure profile has the form required for supportive priors.

    ``target`` maps every information set to its prescribed action.  Role 1
    must strictly prefer its action given role 2's play; at every role-2
    information set the prescribed reply must be a best reply to some role-1
    action reaching it that is itself best for role 1 among those actions;
    and on path, role 2's reply must be its unique best reply.
    """
    h1, leads, pay = _family(tree)
    a1 = target[h1]
    rho: dict[str, list[str]] = {}
    for a, h in leads.items():
        if h is not None:
            rho.setdefault(h, []).append(a)
    u = lambda i, a, h: pay[(a, target[h] if h else None)][i]
    for a in leads:
        if a != a1 and not u(0, a1, leads[a1]) > u(0, a, leads[a]):
            return FormWitness(False, f"condition 1 fails: {a} does as well as {a1} for role 1",
                               rho=rho)
    wit = {}
    for h, acts in rho.items():
        reply = target[h]
        found = None
        for a in acts:
            p2_ok = all(pay[(a, reply)][1] >= pay[(a, b)][1] for b in tree.infosets[h].actions)
            p1_ok = all(pay[(a, reply)][0] >= pay[(x, reply)][0] for x in acts)
            if p2_ok and p1_ok:
                found = a
                break
        if found is None:
            return FormWitness(False, f"condition 2 fails at {h}", a1, leads[a1], rho=rho)
        wit[h] = (found, reply)
    h_star = leads[a1]
    if h_star is not None:
        reply = target[h_star]
        if not all(pay[(a1, reply)][1] > pay[(a1, b)][1] for b in tree.infosets[h_star].actions if b != reply):
            return FormWitness(False, f"condition 3 fails at {h_star}", a1, h_star, wit, rho)
    return FormWitness(True, "equilibrium form holds", a1, h_star, wit, rho)


# ------------------------------------------------------------ supportive priors
@dataclass
class SupportivenessReport:
    ok: bool
    horizon: int
    checked_states: int
    violations: list[str]


def _weight_candidates(n: int, ladder=(1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0, 50.0)):
    cands = [np.array(c) for c in itertools.product(ladder, repeat=n)]
    return sorted(cands, key=lambda c: (c.max() / c.min(), c.sum(), tuple(c)))


def check_supportive(tree: GameTree, target: Mapping[str, str], priors: Sequence[DirichletPrior],
                     horizon: int) -> SupportivenessReport:
    """Exhaustively test both supportiveness conditions on every count vector up to ``horizon``.

    Comparisons are strict so that tie-breaking can never favour a deviation.
    """
    form = verify_equilibrium_form(tree, target)
    if not form.ok:
        return SupportivenessReport(False, horizon, 0, [form.reason])
    h1, leads, pay = _family(tree)
    bad, checked = [], 0
    for h, acts in form.rho.items():
        if h == form.h2_star:
            continue
        a_star, reply = form.witness[h]
        h_actions = tree.infosets[h].actions
        w1 = priors[0].weights[h]
        # role 1 histories at h that only ever recorded the prescribed reply
        for n in range(horizon + 1):
            counts = np.zeros(len(h_actions))
            counts[h_actions.index(reply)] = n
            m = (w1 + counts) / (w1 + counts).sum()
            val = {a: sum(m[k] * pay[(a, b)][0] for k, b in enumerate(h_actions)) for a in acts}
            checked += 1
            for a in acts:
                if a != a_star and not val[a_star] > val[a]:
                    bad.append(f"role 1 at {h} after {n} x {reply}: {a} rivals {a_star}")
        # role 2 histories that never recorded another action reaching h
        w2 = priors[1].weights[h1]
        root_actions = tree.infosets[h1].actions
        idx = [root_actions.index(a) for a in acts]
        for n in range(horizon + 1):
            counts = np.zeros(len(root_actions))
            counts[root_actions.index(a_star)] = n
            x = (w2 + counts)[idx]
            cond = x / x.sum()
            val = {b: sum(cond[k] * pay[(a, b)][1] for k, a in enumerate(acts)) for b in h_actions}
            checked += 1
            for b in h_actions:
                if b != reply and not val[reply] > val[b]:
                    bad.append(f"role 2 at {h} after {n} x {a_star}: {b} rivals {reply}")
    return SupportivenessReport(not bad, horizon, checked, bad)


def make_supportive_priors(tree: GameTree, target: Mapping[str, str], horizon: int = DEFAULT_CAP):
    """Least concentrated Dirichlet weights (from a fixed ladder) that pass :func:`check_supportive`.

    Returns the two priors and the report; raises if the form check fails or
    no candidate on the ladder works.
    """
    form = verify_equilibrium_form(tree, target)
    if not form.ok:
        raise GameError(f"target profile is not of the required form: {form.reason}")
    h1, leads, pay = _family(tree)
    w1 = {h: np.ones(len(tree.infosets[h].actions)) for h in tree.role_infosets[1]}
    w2 = {h1: np.ones(len(tree.infosets[h1].actions))}
    for h, acts in form.rho.items():
        if h == form.h2_star:
            continue
        for cand in _weight_candidates(len(tree.infosets[h].actions)):
            trial = {**w1, h: cand}
            rep = check_supportive(tree, target, [DirichletPrior(0, trial), DirichletPrior(1, w2)], horizon)
            if not any(v.startswith(f"role 1 at {h} ") for v in rep.violations):
                w1 = trial
                break
        else:
            raise GameError(f"no supportive role-1 weights found at {h}")
        root_actions = tree.infosets[h1].actions
        idx = [root_actions.index(a) for a in acts]
        for cand in _weight_candidates(len(acts)):
            vec = w2[h1].copy()
            vec[idx] = cand
            rep = check_supportive(tree, target, [DirichletPrior(0, w1), DirichletPrior(1, {h1: vec})], horizon)
            if not any(v.startswith(f"role 2 at {h} ") for v in rep.violations):
                w2 = {h1: vec}
                break
        else:
            raise GameError(f"no supportive role-2 weights found at {h}")
    priors = [DirichletPrior(0, w1), DirichletPrior(1, w2)]
    return priors, check_supportive(tree, target, priors, horizon)
