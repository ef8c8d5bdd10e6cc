"""Game transformations that leave learning outcomes unchanged.

Coalescing merges an information set ``h1`` with the set ``h2`` reached by
its pass action into one set whose actions are the non-pass actions of
``h1`` followed by the actions of ``h2``.  Action mixes move across with

    phi(a1, a2)[k] = a1[k]              for the non-pass actions of h1,
    phi(a1, a2)[m + k] = a1[pass] a2[k] for the actions of h2,

and prior densities pick up the factor ``1 / a1[pass]**(n - 1)``.

The auxiliary game of a role keeps that role's payoffs and feedback,
zeroes everyone else's payoffs and collapses opponent subtrees the role can
neither tell apart nor be paid differently in.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .beliefs import DirichletPrior
from .game import GameError, GameTree, Node, TerminalPartition, default_partitions


@dataclass(frozen=True)
class CoalescePlan:
    role: int
    h1: str
    h2: str
    pass_action: str

    @classmethod
    def infer(cls, tree: GameTree, role: int, h1: str, h2: str) -> "CoalescePlan":
        """Find the action of ``h1`` that leads into ``h2``."""
        info = tree.infosets.get(h1)
        if info is None:
            raise GameError(f"unknown information set {h1!r}")
        leads = {a for nid in info.nodes for a, c in tree.nodes[nid].edges if tree.nodes[c].infoset == h2}
        if len(leads) != 1:
            raise GameError(f"expected exactly one action of {h1} leading to {h2}, found {sorted(leads)}")
        return cls(role, h1, h2, leads.pop())


@dataclass
class Coalesced:
    tree: GameTree
    partitions: list[TerminalPartition]
    plan: CoalescePlan
    strategy_map: list[list[int]]  # per role: old strategy index -> new strategy index
    merged_actions: tuple[str, ...]
    pass_index: int = 0

    def map_mixed(self, role: int, dist: Sequence[float]) -> np.ndarray:
        out = np.zeros(len(self.tree.pure_strategies(role)))
        np.add.at(out, self.strategy_map[role], np.asarray(dist, dtype=float))
        return out

    def map_behavior(self, behavior: Mapping[str, Sequence[float]]) -> dict[str, np.ndarray]:
        p = self.plan
        out = {h: np.asarray(v, dtype=float) for h, v in behavior.items() if h not in (p.h1, p.h2)}
        out[p.h1] = phi(behavior[p.h1], behavior[p.h2], self.pass_index)
        return out


def coalesce(tree: GameTree, plan: CoalescePlan, partitions: Sequence[TerminalPartition] = ()) -> Coalesced:
    """Merge ``plan.h1`` and ``plan.h2``; node and terminal ids are kept, so partitions carry over."""
    h1 = tree.infosets.get(plan.h1)
    h2 = tree.infosets.get(plan.h2)
    if h1 is None or h2 is None:
        raise GameError(f"unknown information set in plan {plan}")
    if h1.owner != plan.role or h2.owner != plan.role:
        raise GameError(f"{plan.h1} and {plan.h2} must both belong to role {plan.role}")
    if plan.pass_action not in h1.actions:
        raise GameError(f"{plan.pass_action!r} is not an action at {plan.h1}")
    pass_children = {tree.child(nid, plan.pass_action) for nid in h1.nodes}
    if pass_children != set(h2.nodes):
        raise GameError(f"the {plan.pass_action!r} children of {plan.h1} are not exactly the nodes of {plan.h2}; "
                        "the information sets are not consecutive for the role")
    keep = [a for a in h1.actions if a != plan.pass_action]
    merged = tuple(keep) + h2.actions
    if len(set(merged)) != len(merged):
        raise GameError(f"merged action names collide: {merged}")

    nodes = []
    for nid, node in tree.nodes.items():
        if nid in pass_children:
            continue
        if node.infoset == plan.h1:
            nxt = tree.nodes[tree.child(nid, plan.pass_action)]
            edges = tuple(e for e in node.edges if e[0] != plan.pass_action) + nxt.edges
            node = Node(nid, owner=node.owner, infoset=node.infoset, edges=edges)
        nodes.append(node)
    new = GameTree(tree.players, nodes, name=f"{tree.name}+coalesced")
    if new.infosets[plan.h1].actions != merged:
        raise GameError("merged information set has inconsistent action order")

    smap = []
    for i in range(tree.players):
        if i != plan.role:
            smap.append(list(range(len(tree.pure_strategies(i)))))
            continue
        row = []
        for s in tree.pure_strategies(i):
            choice = {h: a for h, a in s.choice.items() if h != plan.h2}
            if s.choice[plan.h1] == plan.pass_action:
                choice[plan.h1] = s.choice[plan.h2]
            row.append(new.strategy_index(i, choice))
        smap.append(row)
    return Coalesced(new, [TerminalPartition(p.role, p.cells) for p in partitions], plan, smap, merged,
                     h1.actions.index(plan.pass_action))


# --------------------------------------------------------------- the phi map
def _interior(x, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (x <= 0).any() or abs(x.sum() - 1) > 1e-9:
        raise ValueError(f"{what} must be a strictly positive probability vector, got {x}")
    return x


def phi(alpha1: Sequence[float], alpha2: Sequence[float], pass_index: int = -1) -> np.ndarray:
    """Merged mix from the mixes at the two coalesced information sets."""
    a1 = _interior(alpha1, "alpha1")
    a2 = _interior(alpha2, "alpha2")
    p = pass_index % a1.size
    return np.concatenate([np.delete(a1, p), a1[p] * a2])


def phi_inverse(alpha_star: Sequence[float], m: int, pass_index: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Split a merged mix whose first ``m`` entries are the non-pass actions."""
    a = _interior(alpha_star, "alpha_star")
    head, tail = a[:m], a[m:]
    if tail.size == 0:
        raise ValueError("merged mix has no pass block")
    p_pass = tail.sum()
    p = pass_index % (m + 1)
    return np.insert(head, p, p_pass), tail / p_pass


def jacobian_factor(alpha1: Sequence[float], n: int, pass_index: int = -1) -> float:
    """Volume factor of phi at ``alpha1``: its pass probability to the power n - 1."""
    a1 = np.asarray(alpha1, dtype=float)
    return float(a1[pass_index % a1.size] ** (n - 1))


# ----------------------------------------------------------- prior transform
@dataclass
class TransformedPrior:
    """Push-forward of an opponent's Dirichlet prior through phi."""

    base: DirichletPrior
    plan: CoalescePlan
    m: int
    n: int
    pass_index: int

    @property
    def role(self) -> int:
        return self.base.role

    def sample(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        draw = self.base.sample(rng)
        a1, a2 = draw.pop(self.plan.h1), draw.pop(self.plan.h2)
        draw[self.plan.h1] = phi(a1, a2, self.pass_index)
        return draw

    def block_logpdf(self, alpha_star: Sequence[float]) -> float:
        """Log density of the merged mix alone (other information sets are independent)."""
        try:
            a1, a2 = phi_inverse(alpha_star, self.m, self.pass_index)
        except ValueError:
            return -np.inf
        sub = DirichletPrior(self.base.role, {self.plan.h1: self.base.weights[self.plan.h1],
                                              self.plan.h2: self.base.weights[self.plan.h2]})
        return sub.logpdf({self.plan.h1: a1, self.plan.h2: a2}) - (self.n - 1) * np.log(a1[self.pass_index])

    def block_logpdf_many(self, ys: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`block_logpdf` over rows of strictly positive merged mixes."""
        w1 = self.base.weights[self.plan.h1]
        w2 = self.base.weights[self.plan.h2]
        tail = ys[:, self.m:].sum(axis=1)
        a1 = np.insert(ys[:, :self.m], self.pass_index, tail, axis=1)
        a2 = ys[:, self.m:] / tail[:, None]
        norm = gammaln(w1.sum()) - gammaln(w1).sum() + gammaln(w2.sum()) - gammaln(w2).sum()
        return (norm + np.log(a1) @ (w1 - 1) + np.log(a2) @ (w2 - 1)
                - (self.n - 1) * np.log(tail))

    def logpdf(self, behavior: Mapping[str, Sequence[float]]) -> float:
        rest = {h: w for h, w in self.base.weights.items() if h not in (self.plan.h1, self.plan.h2)}
        total = DirichletPrior(self.base.role, rest).logpdf(behavior) if rest else 0.0
        return total + self.block_logpdf(behavior[self.plan.h1])

    @property
    def aggregation_consistent(self) -> bool:
        w1 = self.base.weights[self.plan.h1]
        return bool(np.isclose(w1[self.pass_index], self.base.weights[self.plan.h2].sum(), rtol=1e-12, atol=0))

    def to_dirichlet(self) -> DirichletPrior:
        """The push-forward as a Dirichlet prior; exists when the pass weight equals the h2 total."""
        if not self.aggregation_consistent:
            raise GameError("push-forward is not Dirichlet: pass weight differs from the total weight at "
                            f"{self.plan.h2}")
        w = {h: v.copy() for h, v in self.base.weights.items() if h != self.plan.h2}
        w[self.plan.h1] = np.concatenate([np.delete(self.base.weights[self.plan.h1], self.pass_index),
                                          self.base.weights[self.plan.h2]])
        return DirichletPrior(self.base.role, w)


def transform_prior(prior: DirichletPrior, coalesced: Coalesced) -> TransformedPrior:
    """Prior of an opponent of the coalescing role, expressed on the coalesced game."""
    plan = coalesced.plan
    if prior.role == plan.role:
        raise GameError("a role holds no prior over its own play")
    m = len(prior.weights[plan.h1]) - 1
    n = len(prior.weights[plan.h2])
    return TransformedPrior(prior, plan, m, n, coalesced.pass_index % (m + 1))


@dataclass
class BoxCheck:
    lower: np.ndarray
    upper: np.ndarray
    original: float
    original_se: float
    transformed: float
    transformed_se: float

    @property
    def z(self) -> float:
        se = np.hypot(self.original_se, self.transformed_se)
        return abs(self.original - self.transformed) / se if se > 0 else (0.0 if self.original == self.transformed else np.inf)


def box_measure_check(tp: TransformedPrior, rng: np.random.Generator, boxes: int = 20,
                      samples: int = 200_000) -> list[BoxCheck]:
    """Compare prior mass of random boxes before and after the transform.

    A box constrains every coordinate of the two original mixes.  Its mass
    under the original prior is estimated from direct draws; the mass of its
    phi-image under the transformed density is estimated by importance
    sampling from a flat Dirichlet on the merged simplex, so the Jacobian in
    ``block_logpdf`` is what is being tested.
    """
    w1 = tp.base.weights[tp.plan.h1]
    w2 = tp.base.weights[tp.plan.h2]
    k = len(w1) + len(w2)
    out = []
    for _ in range(boxes):
        lo = rng.uniform(0.0, 0.5, size=k)
        hi = lo + rng.uniform(0.3, 0.8, size=k)
        x1 = rng.dirichlet(w1, size=samples)
        x2 = rng.dirichlet(w2, size=samples)
        inside = np.all((np.hstack([x1, x2]) >= lo) & (np.hstack([x1, x2]) <= hi), axis=1)
        g = inside.mean()
        g_se = np.sqrt(g * (1 - g) / samples)

        ys = rng.dirichlet(np.ones(tp.m + tp.n), size=samples)
        logq = gammaln(tp.m + tp.n)
        tail = ys[:, tp.m:].sum(axis=1)
        a1 = np.insert(ys[:, :tp.m], tp.pass_index, tail, axis=1)
        a2 = ys[:, tp.m:] / tail[:, None]
        z = np.hstack([a1, a2])
        hit = np.all((z >= lo) & (z <= hi), axis=1) & (ys > 0).all(axis=1)
        vals = np.zeros(samples)
        vals[hit] = np.exp(tp.block_logpdf_many(ys[hit]) - logq)
        out.append(BoxCheck(lo, hi, float(g), float(g_se), float(vals.mean()),
                            float(vals.std(ddof=1) / np.sqrt(samples))))
    return out


# ---------------------------------------------------------- auxiliary games
@dataclass
class Auxiliary:
    tree: GameTree
    partitions: list[TerminalPartition]
    role: int
    collapsed: dict[str, tuple[str, ...]]  # new terminal id -> original terminals


def _subtree_terminals(tree: GameTree, nid: str) -> list[str]:
    node = tree.nodes[nid]
    if node.is_terminal:
        return [nid]
    return [z for _, c in node.edges for z in _subtree_terminals(tree, c)]


def _subtree_owners(tree: GameTree, nid: str) -> set[int]:
    node = tree.nodes[nid]
    if node.is_terminal:
        return set()
    return {node.owner}.union(*(_subtree_owners(tree, c) for _, c in node.edges))


def _collapsed_id(tree: GameTree, nid: str, zs: Sequence[str]) -> str:
    prefix = os.path.commonprefix(list(zs))
    if "." in prefix:
        prefix = prefix[: prefix.rfind(".")]
    cand = prefix if prefix and prefix not in tree.nodes else nid
    return cand


def auxiliary_game(tree: GameTree, partitions: Sequence[TerminalPartition], role: int) -> Auxiliary:
    """Decision problem of ``role`` with every other role made indifferent.

    A subtree without moves by ``role`` whose terminals share one feedback
    cell of ``role`` and one payoff for ``role`` is replaced by a single
    terminal; partitions of the other roles are coarsened accordingly.
    """
    parts = default_partitions(tree, partitions)
    mine = parts[role]
    collapsed: dict[str, tuple[str, ...]] = {}
    nodes: list[Node] = []

    def rec(nid: str) -> str:
        node = tree.nodes[nid]
        if node.is_terminal:
            pay = tuple(p if i == role else 0.0 for i, p in enumerate(node.payoffs))
            nodes.append(Node(nid, payoffs=pay))
            return nid
        zs = _subtree_terminals(tree, nid)
        if (role not in _subtree_owners(tree, nid) and len({mine.cell_of(z) for z in zs}) == 1
                and len({tree.payoff(z)[role] for z in zs}) == 1):
            new_id = _collapsed_id(tree, nid, zs)
            pay = tuple(tree.payoff(zs[0])[role] if i == role else 0.0 for i in range(tree.players))
            nodes.append(Node(new_id, payoffs=pay))
            collapsed[new_id] = tuple(zs)
            return new_id
        edges = tuple((a, rec(c)) for a, c in node.edges)
        nodes.append(Node(nid, owner=node.owner, infoset=node.infoset, edges=edges))
        return nid

    rec(tree.root)
    aux = GameTree(tree.players, nodes, name=f"{tree.name}+aux{role}")
    rename = {z: new for new, zs in collapsed.items() for z in zs}
    new_parts = []
    for p in parts:
        groups: list[set[str]] = []
        for cell in p.cells:
            mapped = {rename.get(z, z) for z in cell}
            hits = [g for g in groups if g & mapped]
            for g in hits:
                mapped |= g
                groups.remove(g)
            groups.append(mapped)
        new_parts.append(TerminalPartition(p.role, tuple(frozenset(g) for g in groups)))
    if [len(c) for c in new_parts[role].cells] != [len({rename.get(z, z) for z in c}) for c in mine.cells]:
        raise GameError(f"collapsing changed the feedback cells of role {role}")
    return Auxiliary(aux, new_parts, role, collapsed)
