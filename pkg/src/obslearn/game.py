"""Extensive-form games with terminal-node partitions.

A game is a finite rooted tree.  Decision nodes belong to a role and an
information set; terminal nodes carry a payoff vector.  Each role has a
partition of the terminal nodes describing what it observes after play.
Roles are 0-based integers throughout.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12


class GameError(ValueError):
    """Raised for malformed games, strategies, or game files."""


@dataclass(frozen=True)
class Node:
    id: str
    owner: int | None = None  # None for terminal nodes
    infoset: str | None = None
    edges: tuple[tuple[str, str], ...] = ()  # (action, child id)
    payoffs: tuple[float, ...] | None = None

    @property
    def is_terminal(self) -> bool:
        return self.owner is None


@dataclass(frozen=True)
class Infoset:
    id: str
    owner: int
    actions: tuple[str, ...]
    nodes: tuple[str, ...]

    def index(self, action: str) -> int:
        return self.actions.index(action)


@dataclass(frozen=True)
class TerminalPartition:
    """Feedback structure of one role: disjoint cells of terminal ids."""

    role: int
    cells: tuple[frozenset[str], ...]

    @classmethod
    def discrete(cls, role: int, terminals: Iterable[str]) -> "TerminalPartition":
        return cls(role, tuple(frozenset([z]) for z in terminals))

    def cell_of(self, z: str) -> int:
        for k, cell in enumerate(self.cells):
            if z in cell:
                return k
        raise GameError(f"terminal {z!r} not covered by partition of role {self.role}")


@dataclass(frozen=True)
class PureStrategy:
    role: int
    choice: Mapping[str, str]  # infoset id -> action

    def label(self, order: Sequence[str]) -> str:
        return "/".join(self.choice[h] for h in order) or "-"


@dataclass
class BehaviorStrategy:
    role: int
    mix: dict[str, np.ndarray]  # infoset id -> probabilities over its actions


@dataclass
class MixedStrategy:
    role: int
    dist: np.ndarray  # over GameTree.pure_strategies(role)


class GameTree:
    """Immutable extensive-form game.

    Information sets and terminals are listed in depth-first discovery order
    with edges visited in declaration order; pure strategies enumerate the
    product of a role's action sets in that order.
    """

    def __init__(self, players: int, nodes: Iterable[Node], name: str = "game"):
        self.players = int(players)
        self.name = name
        self.nodes: dict[str, Node] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise GameError(f"duplicate node id {node.id!r}")
            self.nodes[node.id] = node
        children = [c for n in self.nodes.values() for _, c in n.edges]
        roots = [nid for nid in self.nodes if nid not in set(children)]
        if len(roots) != 1:
            raise GameError(f"game must have exactly one root, found {roots}")
        self.root = roots[0]
        self._parent: dict[str, tuple[str, str]] = {}
        for n in self.nodes.values():
            for a, c in n.edges:
                if c not in self.nodes:
                    raise GameError(f"edge {n.id}--{a}-> unknown node {c!r}")
                if c in self._parent:
                    raise GameError(f"node {c!r} has more than one parent")
                self._parent[c] = (n.id, a)

        self.terminals: list[str] = []
        order: list[str] = []
        seen: set[str] = set()
        stack = [self.root]
        visited: set[str] = set()
        while stack:
            nid = stack.pop()
            if nid in visited:
                raise GameError("cycle detected in game tree")
            visited.add(nid)
            n = self.nodes[nid]
            if n.is_terminal:
                self.terminals.append(nid)
            else:
                if n.infoset is None:
                    raise GameError(f"decision node {nid!r} lacks an infoset")
                if n.infoset not in seen:
                    seen.add(n.infoset)
                    order.append(n.infoset)
            stack.extend(c for _, c in reversed(n.edges))
        if len(visited) != len(self.nodes):
            raise GameError("unreachable nodes in game tree")

        members: dict[str, list[str]] = {h: [] for h in order}
        for nid in self._dfs():
            n = self.nodes[nid]
            if not n.is_terminal:
                members[n.infoset].append(nid)
        self.infosets: dict[str, Infoset] = {}
        for h in order:
            first = self.nodes[members[h][0]]
            self.infosets[h] = Infoset(
                h, first.owner, tuple(a for a, _ in first.edges), tuple(members[h])
            )
        self.role_infosets: list[list[str]] = [
            [h for h in order if self.infosets[h].owner == i] for i in range(self.players)
        ]
        self._paths = {z: tuple(self._path(z)) for z in self.terminals}
        self._pure_cache: dict[int, list[PureStrategy]] = {}

    # ------------------------------------------------------------------ basics
    def _dfs(self) -> list[str]:
        out, stack = [], [self.root]
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(c for _, c in reversed(self.nodes[nid].edges))
        return out

    def _path(self, nid: str) -> list[tuple[str, str]]:
        path = []
        while nid in self._parent:
            parent, a = self._parent[nid]
            path.append((self.nodes[parent].infoset, a))
            nid = parent
        return path[::-1]

    def path(self, z: str) -> tuple[tuple[str, str], ...]:
        """(infoset, action) pairs on the way from the root to terminal ``z``."""
        return self._paths[z]

    def node_path(self, nid: str) -> list[tuple[str, str]]:
        return self._path(nid)

    def payoff(self, z: str) -> tuple[float, ...]:
        return self.nodes[z].payoffs

    def child(self, nid: str, action: str) -> str:
        for a, c in self.nodes[nid].edges:
            if a == action:
                return c
        raise GameError(f"node {nid!r} has no action {action!r}")

    def payoff_range(self) -> float:
        vals = np.array([self.payoff(z) for z in self.terminals], dtype=float)
        return float(vals.max() - vals.min()) if vals.size else 0.0

    def own_history(self, nid: str, role: int) -> tuple[tuple[str, str], ...]:
        return tuple((h, a) for h, a in self._path(nid) if self.infosets[h].owner == role)

    # -------------------------------------------------------------- strategies
    def pure_strategies(self, role: int) -> list[PureStrategy]:
        if role not in self._pure_cache:
            hs = self.role_infosets[role]
            combos = itertools.product(*(self.infosets[h].actions for h in hs))
            self._pure_cache[role] = [
                PureStrategy(role, dict(zip(hs, combo))) for combo in combos
            ]
        return self._pure_cache[role]

    def strategy_labels(self, role: int) -> list[str]:
        return [s.label(self.role_infosets[role]) for s in self.pure_strategies(role)]

    def strategy_index(self, role: int, choice: Mapping[str, str] | str) -> int:
        if isinstance(choice, str):
            labels = self.strategy_labels(role)
            if choice not in labels:
                raise GameError(f"role {role} has no strategy {choice!r}")
            return labels.index(choice)
        for k, s in enumerate(self.pure_strategies(role)):
            if all(s.choice[h] == choice[h] for h in s.choice):
                return k
        raise GameError(f"role {role} has no strategy {dict(choice)!r}")

    def __repr__(self) -> str:
        return f"GameTree({self.name!r}, players={self.players}, terminals={len(self.terminals)})"


# ---------------------------------------------------------------- validation
def validate_game(tree: GameTree, partitions: Sequence[TerminalPartition] = ()) -> list[str]:
    """Return every structural violation found; an empty list means admissible."""
    problems: list[str] = []
    for n in tree.nodes.values():
        if n.is_terminal:
            if n.payoffs is None or len(n.payoffs) != tree.players:
                problems.append(f"terminal {n.id}: payoff vector must have {tree.players} entries")
            elif not all(np.isfinite(n.payoffs)):
                problems.append(f"terminal {n.id}: non-finite payoff")
        else:
            if not 0 <= n.owner < tree.players:
                problems.append(f"node {n.id}: owner {n.owner} out of range")
            if not n.edges:
                problems.append(f"node {n.id}: decision node without actions")
            acts = [a for a, _ in n.edges]
            if len(set(acts)) != len(acts):
                problems.append(f"node {n.id}: duplicate action labels")
    for h, info in tree.infosets.items():
        owners = {tree.nodes[nid].owner for nid in info.nodes}
        actions = {tuple(a for a, _ in tree.nodes[nid].edges) for nid in info.nodes}
        if len(owners) > 1 or len(actions) > 1:
            problems.append(f"information set inconsistency at {h}: owners/actions differ")
        histories = {tree.own_history(nid, info.owner) for nid in info.nodes}
        if len(histories) > 1:
            problems.append(f"perfect recall violated at {h}")
        for nid in info.nodes:
            if any(hh == h for hh, _ in tree.node_path(nid)):
                problems.append(f"information set {h} visited twice on one path")
                break
    if problems:
        return problems
    by_role = {p.role: p for p in partitions}
    for role in range(tree.players):
        part = by_role.get(role)
        if part is None:
            continue
        problems.extend(_partition_problems(tree, part))
    return problems


def _partition_problems(tree: GameTree, part: TerminalPartition) -> list[str]:
    problems = []
    covered = [z for cell in part.cells for z in cell]
    if len(covered) != len(set(covered)) or set(covered) != set(tree.terminals):
        problems.append(f"role {part.role}: partition cells do not partition the terminal nodes")
        return problems
    for k, cell in enumerate(part.cells):
        pays = {tree.payoff(z)[part.role] for z in cell}
        if len(pays) > 1:
            problems.append(f"role {part.role} cell {k}: payoff measurability violated")
        revealed = revealed_pairs(tree, cell)
        consistent = {z for z in tree.terminals if revealed <= set(tree.path(z))}
        if consistent != set(cell):
            problems.append(f"role {part.role} cell {k}: not action-measurable")
    return problems


def revealed_pairs(tree: GameTree, cell: Iterable[str]) -> frozenset[tuple[str, str]]:
    cell = list(cell)
    common = set(tree.path(cell[0]))
    for z in cell[1:]:
        common &= set(tree.path(z))
    return frozenset(common)


def observation_cell(tree: GameTree, partition: TerminalPartition, z: str):
    """Cell index containing ``z`` and the (infoset, action) pairs it reveals.

    Pairs are listed in root-to-leaf order and include the observer's own moves.
    """
    k = partition.cell_of(z)
    rev = revealed_pairs(tree, partition.cells[k])
    return k, [p for p in tree.path(z) if p in rev]


def default_partitions(tree: GameTree, partitions: Sequence[TerminalPartition] = ()):
    by_role = {p.role: p for p in partitions}
    return [by_role.get(i) or TerminalPartition.discrete(i, tree.terminals) for i in range(tree.players)]


# -------------------------------------------------------------- evaluation
def outcome(tree: GameTree, profile: Sequence[PureStrategy]) -> str:
    """Terminal node reached when every role follows its pure strategy."""
    by_role = {s.role: s for s in profile}
    nid = tree.root
    while not tree.nodes[nid].is_terminal:
        n = tree.nodes[nid]
        if n.owner not in by_role:
            raise GameError(f"profile has no strategy for role {n.owner}")
        nid = tree.child(nid, by_role[n.owner].choice[n.infoset])
    return nid


def terminal_distribution(tree: GameTree, behavior: Mapping[str, Sequence[float]]) -> dict[str, float]:
    """Reach probabilities of terminals under a behavior profile keyed by infoset."""
    out: dict[str, float] = {}
    stack = [(tree.root, 1.0)]
    while stack:
        nid, p = stack.pop()
        n = tree.nodes[nid]
        if n.is_terminal:
            out[nid] = out.get(nid, 0.0) + p
            continue
        probs = behavior[n.infoset]
        for k, (_, c) in enumerate(n.edges):
            if probs[k] > 0.0:
                stack.append((c, p * float(probs[k])))
    return out


def behavior_profile(profile: Iterable[BehaviorStrategy]) -> dict[str, np.ndarray]:
    merged: dict[str, np.ndarray] = {}
    for b in profile:
        merged.update(b.mix)
    return merged


def expected_payoff(tree: GameTree, profile: Sequence[BehaviorStrategy]) -> np.ndarray:
    beh = behavior_profile(profile)
    missing = [h for h in tree.infosets if h not in beh]
    if missing:
        raise GameError(f"behavior profile missing infosets {missing}")
    total = np.zeros(tree.players)
    for z, p in terminal_distribution(tree, beh).items():
        total += p * np.asarray(tree.payoff(z), dtype=float)
    return total


def pure_behavior(tree: GameTree, s: PureStrategy) -> BehaviorStrategy:
    mix = {}
    for h in tree.role_infosets[s.role]:
        v = np.zeros(len(tree.infosets[h].actions))
        v[tree.infosets[h].index(s.choice[h])] = 1.0
        mix[h] = v
    return BehaviorStrategy(s.role, mix)


def uniform_behavior(tree: GameTree, role: int) -> BehaviorStrategy:
    return BehaviorStrategy(
        role,
        {h: np.full(len(tree.infosets[h].actions), 1.0 / len(tree.infosets[h].actions))
         for h in tree.role_infosets[role]},
    )


def check_behavior(tree: GameTree, b: BehaviorStrategy) -> None:
    for h in tree.role_infosets[b.role]:
        v = np.asarray(b.mix[h], dtype=float)
        if v.shape != (len(tree.infosets[h].actions),) or (v < -PROB_TOL).any() or abs(v.sum() - 1) > PROB_TOL:
            raise GameError(f"invalid behavior mix at {h}: {v}")


# --------------------------------------------------------------- Kuhn maps
def behavior_to_mixed(tree: GameTree, b: BehaviorStrategy) -> MixedStrategy:
    """Product-formula mixed strategy equivalent to ``b``."""
    hs = tree.role_infosets[b.role]
    dist = np.array([
        np.prod([b.mix[h][tree.infosets[h].index(s.choice[h])] for h in hs]) if hs else 1.0
        for s in tree.pure_strategies(b.role)
    ])
    return MixedStrategy(b.role, dist)


def mixed_to_behavior(tree: GameTree, m: MixedStrategy) -> tuple[BehaviorStrategy, list[str]]:
    """Conditional choice probabilities at each own infoset given it is reached.

    Infosets with zero realization weight get the uniform mix and are returned
    in the flagged list.
    """
    role = m.role
    strategies = tree.pure_strategies(role)
    mix, flagged = {}, []
    for h in tree.role_infosets[role]:
        info = tree.infosets[h]
        need = tree.own_history(info.nodes[0], role)
        weights = np.zeros(len(info.actions))
        for p, s in zip(m.dist, strategies):
            if p > 0 and all(s.choice[hh] == a for hh, a in need):
                weights[info.index(s.choice[h])] += p
        total = weights.sum()
        if total <= 0.0:
            mix[h] = np.full(len(info.actions), 1.0 / len(info.actions))
            flagged.append(h)
        else:
            mix[h] = weights / total
    return BehaviorStrategy(role, mix), flagged


# ------------------------------------------------------------- normal form
@dataclass
class NormalFormGame:
    strategies: list[list[str]]
    payoffs: np.ndarray  # shape (*n_i, I)
    source: GameTree | None = None
    choices: list[list[dict[str, str]]] | None = None  # per role, per strategy
    terminal: np.ndarray | None = None  # object array of reached terminal ids
    profile_partitions: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def players(self) -> int:
        return len(self.strategies)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.strategies)

    def u(self, role: int, profile: Sequence[int]) -> float:
        return float(self.payoffs[tuple(profile) + (role,)])

    def profiles(self):
        return itertools.product(*(range(n) for n in self.shape))


def derive_normal_form(tree: GameTree, max_profiles: int = 10**6) -> NormalFormGame:
    pures = [tree.pure_strategies(i) for i in range(tree.players)]
    shape = tuple(len(p) for p in pures)
    if int(np.prod(shape)) > max_profiles:
        raise GameError(f"normal form has {int(np.prod(shape))} profiles, above cap {max_profiles}")
    payoffs = np.zeros(shape + (tree.players,))
    terminal = np.empty(shape, dtype=object)
    for idx in itertools.product(*(range(n) for n in shape)):
        z = outcome(tree, [pures[i][k] for i, k in enumerate(idx)])
        terminal[idx] = z
        payoffs[idx] = tree.payoff(z)
    return NormalFormGame(
        [tree.strategy_labels(i) for i in range(tree.players)],
        payoffs,
        source=tree,
        choices=[[dict(s.choice) for s in p] for p in pures],
        terminal=terminal,
    )


def p_equivalent_partition(tree: GameTree, partitions: Sequence[TerminalPartition],
                           nf: NormalFormGame | None = None) -> list[np.ndarray]:
    """Profile-level partitions: cell ids per strategy profile for every role.

    Two profiles share a cell for role i exactly when their terminal nodes
    share a cell of role i's terminal partition.
    """
    nf = nf or derive_normal_form(tree)
    parts = default_partitions(tree, partitions)
    out = []
    for i in range(tree.players):
        cells = np.empty(nf.shape, dtype=int)
        labels: dict[int, int] = {}
        for idx in nf.profiles():
            raw = parts[i].cell_of(nf.terminal[idx])
            cells[idx] = labels.setdefault(raw, len(labels))
        out.append(cells)
    nf.profile_partitions = out
    return out


def normal_form_tree(nf: NormalFormGame, name: str = "normal-form") -> GameTree:
    """Simultaneous-move tree of a normal form; role i moves at infoset ``nf<i>``."""
    nodes = []

    def build(prefix: tuple[int, ...]) -> str:
        nid = "r" + "".join(f".{k}" for k in prefix)
        role = len(prefix)
        if role == nf.players:
            nodes.append(Node(nid, payoffs=tuple(float(x) for x in nf.payoffs[prefix])))
            return nid
        edges = tuple((nf.strategies[role][k], build(prefix + (k,))) for k in range(nf.shape[role]))
        nodes.append(Node(nid, owner=role, infoset=f"nf{role}", edges=edges))
        return nid

    build(())
    return GameTree(nf.players, nodes, name=name)


def nf_profile_terminal(nf_tree: GameTree, profile: Sequence[int]) -> str:
    return "r" + "".join(f".{k}" for k in profile)


def normal_form_with_feedback(tree: GameTree, partitions: Sequence[TerminalPartition] = (),
                              name: str | None = None) -> tuple[GameTree, list[TerminalPartition]]:
    """Simultaneous-move tree of ``tree`` whose terminal partitions give the same feedback."""
    nf = derive_normal_form(tree)
    nf_tree = normal_form_tree(nf, name=name or f"{tree.name}-nf")
    cells = p_equivalent_partition(tree, partitions, nf)
    parts = []
    for i in range(tree.players):
        groups: dict[int, list[str]] = {}
        for idx in nf.profiles():
            groups.setdefault(int(cells[i][idx]), []).append(nf_profile_terminal(nf_tree, idx))
        parts.append(TerminalPartition(i, tuple(frozenset(g) for g in groups.values())))
    return nf_tree, parts


# --------------------------------------------------------------- file format
_NODE_KEYS = {"id", "owner", "terminal", "infoset", "edges", "payoffs"}
_TOP_KEYS = {"players", "nodes", "partitions", "name"}


def game_from_dict(data: Mapping, where: str = "<game>") -> tuple[GameTree, list[TerminalPartition]]:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise GameError(f"{where}: unknown keys {sorted(unknown)}")
    if "players" not in data or "nodes" not in data:
        raise GameError(f"{where}: 'players' and 'nodes' are required")
    nodes = []
    for k, raw in enumerate(data["nodes"]):
        loc = f"{where}: nodes[{k}]"
        bad = set(raw) - _NODE_KEYS
        if bad:
            raise GameError(f"{loc}: unknown keys {sorted(bad)}")
        if "id" not in raw:
            raise GameError(f"{loc}: missing 'id'")
        if raw.get("terminal"):
            if "payoffs" not in raw:
                raise GameError(f"{loc}: terminal node needs 'payoffs'")
            nodes.append(Node(str(raw["id"]), payoffs=tuple(float(x) for x in raw["payoffs"])))
        else:
            if "owner" not in raw or "edges" not in raw:
                raise GameError(f"{loc}: decision node needs 'owner' and 'edges'")
            edges = []
            for e in raw["edges"]:
                if set(e) != {"action", "child"}:
                    raise GameError(f"{loc}: edges need exactly 'action' and 'child'")
                edges.append((str(e["action"]), str(e["child"])))
            nodes.append(Node(str(raw["id"]), owner=int(raw["owner"]),
                              infoset=str(raw.get("infoset", raw["id"])), edges=tuple(edges)))
    tree = GameTree(int(data["players"]), nodes, name=str(data.get("name", "game")))
    partitions = []
    for k, raw in enumerate(data.get("partitions", [])):
        if set(raw) - {"role", "cells"}:
            raise GameError(f"{where}: partitions[{k}]: unknown keys")
        partitions.append(TerminalPartition(int(raw["role"]), tuple(frozenset(map(str, c)) for c in raw["cells"])))
    return tree, partitions


def game_to_dict(tree: GameTree, partitions: Sequence[TerminalPartition] = ()) -> dict:
    nodes = []
    for nid in tree._dfs():
        n = tree.nodes[nid]
        if n.is_terminal:
            nodes.append({"id": nid, "terminal": True, "payoffs": list(n.payoffs)})
        else:
            nodes.append({"id": nid, "owner": n.owner, "infoset": n.infoset,
                          "edges": [{"action": a, "child": c} for a, c in n.edges]})
    out = {"name": tree.name, "players": tree.players, "nodes": nodes}
    if partitions:
        out["partitions"] = [{"role": p.role, "cells": [sorted(c) for c in p.cells]} for p in partitions]
    return out


def load_game(path: str | Path) -> tuple[GameTree, list[TerminalPartition]]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise GameError(f"{path}: invalid JSON ({exc})") from exc
    tree, parts = game_from_dict(data, where=str(path))
    problems = validate_game(tree, parts)
    if problems:
        raise GameError(f"{path}: " + "; ".join(problems))
    return tree, parts


def save_game(path: str | Path, tree: GameTree, partitions: Sequence[TerminalPartition] = ()) -> None:
    Path(path).write_text(json.dumps(game_to_dict(tree, partitions), indent=2))
