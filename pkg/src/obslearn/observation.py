"""What one role can observe, and how observations feed its beliefs.

An :class:`ObservationModel` lists, for every own pure strategy, the possible
end-of-game observations.  Each observation reveals a set of opponent
(infoset, action) pairs and pays a fixed amount; under opponent behavior
``beta`` its probability is the product of ``beta[h][a]`` over the revealed
pairs.  This product form is what makes Dirichlet updating exact.

Two builders produce models: one walks the game tree and its terminal
partition, the other works from a normal form with profile-level partitions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .game import (
    GameError,
    GameTree,
    NormalFormGame,
    TerminalPartition,
    default_partitions,
    revealed_pairs,
    terminal_distribution,
)

CHECK_DRAWS = 4
CHECK_TOL = 1e-12


@dataclass(frozen=True)
class Coord:
    name: str  # opponent infoset id
    owner: int
    actions: tuple[str, ...]


@dataclass(frozen=True)
class Outcome:
    pairs: tuple[tuple[int, int], ...]  # (coord index, action index), sorted
    payoff: float
    cell: int = -1


@dataclass
class ObservationModel:
    role: int
    coords: list[Coord]
    strategies: list[str]
    outcomes: list[list[Outcome]]
    # actions whose counts enter the belief state, per coord (all, unless projected)
    tracked: list[tuple[int, ...]] = field(default_factory=list)
    passive: bool = False
    dropped: list[Coord] = field(default_factory=list)

    def __post_init__(self):
        if not self.tracked:
            self.tracked = [tuple(range(len(c.actions))) for c in self.coords]

    @property
    def n_strategies(self) -> int:
        return len(self.strategies)

    def coord_index(self, name: str) -> int:
        for k, c in enumerate(self.coords):
            if c.name == name:
                return k
        raise KeyError(name)

    def outcome_probs(self, k: int, beta: Mapping[str, Sequence[float]]) -> np.ndarray:
        """True probabilities of strategy ``k``'s outcomes under opponent behavior."""
        return np.array([
            np.prod([beta[self.coords[c].name][a] for c, a in o.pairs]) if o.pairs else 1.0
            for o in self.outcomes[k]
        ])

    def expected_payoffs(self, beta: Mapping[str, Sequence[float]]) -> np.ndarray:
        return np.array([
            float(self.outcome_probs(k, beta) @ [o.payoff for o in self.outcomes[k]])
            for k in range(self.n_strategies)
        ])

    def signature(self, k: int):
        return sorted((o.pairs, o.payoff) for o in self.outcomes[k])


# ---------------------------------------------------------------- builders
def _random_behavior(coords: Sequence[Coord], rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {c.name: rng.dirichlet(np.ones(len(c.actions))) for c in coords}


def from_tree(tree: GameTree, partitions: Sequence[TerminalPartition], role: int,
              reduce: bool = True, seed: int = 0) -> ObservationModel:
    part = default_partitions(tree, partitions)[role]
    coords = [Coord(h, j, tree.infosets[h].actions)
              for j in range(tree.players) if j != role for h in tree.role_infosets[j]]
    index = {c.name: k for k, c in enumerate(coords)}
    rng = np.random.default_rng(seed)
    draws = [_random_behavior(coords, rng) for _ in range(CHECK_DRAWS)]
    outcomes = []
    for s in tree.pure_strategies(role):
        own = {h: np.eye(len(tree.infosets[h].actions))[tree.infosets[h].index(a)]
               for h, a in s.choice.items()}
        reach = terminal_distribution(tree, {**draws[0], **own})
        cells = sorted({part.cell_of(z) for z in reach})
        outs = []
        for cid in cells:
            rev = revealed_pairs(tree, part.cells[cid])
            pairs = tuple(sorted((index[h], tree.infosets[h].index(a))
                                 for h, a in rev if tree.infosets[h].owner != role))
            zs = [z for z in part.cells[cid]]
            outs.append(Outcome(pairs, float(tree.payoff(zs[0])[role]), cid))
        for beta in draws:
            dist = terminal_distribution(tree, {**beta, **own})
            for o in outs:
                mass = sum(p for z, p in dist.items() if part.cell_of(z) == o.cell)
                mono = np.prod([beta[coords[c].name][a] for c, a in o.pairs]) if o.pairs else 1.0
                if abs(mass - mono) > CHECK_TOL:
                    raise GameError(
                        f"role {role}: cell {o.cell} is not action-measurable under strategy "
                        f"{s.label(tree.role_infosets[role])}")
        outcomes.append(outs)
    model = ObservationModel(role, coords, tree.strategy_labels(role), outcomes)
    return reduce_model(model, seed) if reduce else model


def from_normal_form(nf: NormalFormGame, role: int, profile_partition: np.ndarray | None = None,
                     reduce: bool = True, seed: int = 0) -> ObservationModel:
    """Observation model of a normal form with a profile-level partition.

    Opponent beliefs live on the original information sets when the normal
    form records each strategy's choices; otherwise each opponent is one
    coordinate whose actions are its pure strategies.
    """
    players = nf.players
    if profile_partition is None:
        profile_partition = nf.profile_partitions[role] if nf.profile_partitions else None
    if profile_partition is None:
        profile_partition = np.arange(int(np.prod(nf.shape))).reshape(nf.shape)
    if nf.choices is not None:
        choices = nf.choices
    else:
        choices = [[{f"nf{j}": lab} for lab in nf.strategies[j]] for j in range(players)]
    opp = [j for j in range(players) if j != role]
    coords = []
    for j in opp:
        for h in choices[j][0]:
            acts = []
            for ch in choices[j]:
                if ch[h] not in acts:
                    acts.append(ch[h])
            coords.append(Coord(h, j, tuple(acts)))
    index = {c.name: k for k, c in enumerate(coords)}
    outcomes = []
    for k in range(nf.shape[role]):
        groups: dict[int, list[tuple[int, ...]]] = {}
        for opp_idx in itertools.product(*(range(nf.shape[j]) for j in opp)):
            full = list(opp_idx)
            full.insert(role, k)
            groups.setdefault(int(profile_partition[tuple(full)]), []).append(tuple(full))
        outs = []
        for cid, profiles in groups.items():
            assigns = [{(h, a) for j in opp for h, a in choices[j][prof[j]].items()} for prof in profiles]
            common = set.intersection(*assigns)
            size = 1
            for j in opp:
                mine = {h: a for h, a in common if h in choices[j][0]}
                size *= sum(all(ch[h] == a for h, a in mine.items()) for ch in choices[j])
            if size != len(profiles):
                raise GameError(f"role {role}: profile cell {cid} is not a cylinder over opponent choices")
            pays = {float(nf.payoffs[prof + (role,)]) for prof in profiles}
            if len(pays) != 1:
                raise GameError(f"role {role}: payoff varies inside profile cell {cid}")
            pairs = tuple(sorted((index[h], coords[index[h]].actions.index(a)) for h, a in common))
            outs.append(Outcome(pairs, pays.pop(), cid))
        outcomes.append(sorted(outs, key=lambda o: o.cell))
    model = ObservationModel(role, coords, list(nf.strategies[role]), outcomes)
    return reduce_model(model, seed) if reduce else model


# --------------------------------------------------------------- reduction
def _lumped(model: ObservationModel, keep: list[int]) -> list[list[Outcome]] | None:
    """Outcomes with coords outside ``keep`` marginalized out, or None if that is not exact."""
    remap = {c: n for n, c in enumerate(keep)}
    rng = np.random.default_rng(12345)
    draws = [_random_behavior(model.coords, rng) for _ in range(CHECK_DRAWS)]
    result = []
    for k, outs in enumerate(model.outcomes):
        groups: dict[tuple, list[Outcome]] = {}
        for o in outs:
            key = (tuple(p for p in o.pairs if p[0] in remap), o.payoff)
            groups.setdefault(key, []).append(o)
        for (pairs, _), members in groups.items():
            for beta in draws:
                total = sum(np.prod([beta[model.coords[c].name][a] for c, a in o.pairs]) for o in members)
                mono = np.prod([beta[model.coords[c].name][a] for c, a in pairs]) if pairs else 1.0
                if abs(total - mono) > CHECK_TOL:
                    return None
        result.append([
            Outcome(tuple((remap[c], a) for c, a in pairs), pay, min(o.cell for o in members))
            for (pairs, pay), members in groups.items()
        ])
    return result


def reduce_model(model: ObservationModel, seed: int = 0) -> ObservationModel:
    """Drop opponent coordinates that never affect payoffs or informative observations.

    A coordinate is dropped only when marginalizing it out leaves every
    outcome probability an exact product over the remaining coordinates, so
    beliefs about it can never influence the agent.  Roles whose observations
    do not depend on their own play are flagged passive and their tracked
    counts are projected onto the pairs that can change a best reply.
    """
    keep = list(range(len(model.coords)))
    outcomes = model.outcomes
    for c in range(len(model.coords)):
        trial = [x for x in keep if x != c]
        sub = ObservationModel(model.role, [model.coords[x] for x in keep], model.strategies,
                               outcomes)
        lumped = _lumped(sub, [keep.index(x) for x in trial])
        if lumped is not None:
            keep, outcomes = trial, lumped
    reduced = ObservationModel(
        model.role, [model.coords[x] for x in keep], model.strategies, outcomes,
        dropped=[c for n, c in enumerate(model.coords) if n not in keep],
    )
    reduced.passive = is_passive(reduced)
    if reduced.passive:
        reduced.tracked = discriminating_pairs(reduced)
    return reduced


def is_passive(model: ObservationModel) -> bool:
    """True when the distribution of revealed pairs is the same for every own strategy."""
    first = sorted(o.pairs for o in model.outcomes[0])
    return all(sorted(o.pairs for o in outs) == first for outs in model.outcomes[1:])


def discriminating_pairs(model: ObservationModel) -> list[tuple[int, ...]]:
    """Per coord, the actions whose counts can change the ranking of own strategies.

    Only meaningful for passive roles, where every strategy faces the same
    outcome sets and differs only in payoffs.
    """
    n = model.n_strategies
    by_pairs: dict[tuple, list[float]] = {}
    for outs in model.outcomes:
        for o in outs:
            by_pairs.setdefault(o.pairs, []).append(o.payoff)
    active = [p for p, pays in by_pairs.items() if len(pays) == n and max(pays) > min(pays)]
    tracked = []
    for c, coord in enumerate(model.coords):
        keep = []
        for a in range(len(coord.actions)):
            in_active = [p for p in active if (c, a) in p]
            if not in_active and all(any(cc == c for cc, _ in p) for p in active):
                continue  # only shifts a normalizer common to every active outcome
            if active and len(in_active) == len(active):
                continue  # common positive factor of every active outcome
            keep.append(a)
        tracked.append(tuple(keep))
    return tracked


def models_isomorphic(a: ObservationModel, b: ObservationModel,
                      strategy_map: Sequence[int] | None = None,
                      coord_map: Sequence[int] | None = None) -> tuple[bool, str]:
    """Whether two observation models define the same decision problem.

    ``strategy_map[k]`` is the strategy of ``b`` identified with strategy ``k``
    of ``a`` and ``coord_map[c]`` likewise for coordinates; action order within
    identified coordinates must agree.
    """
    if a.n_strategies != b.n_strategies or len(a.coords) != len(b.coords):
        return False, "different numbers of strategies or coordinates"
    smap = strategy_map or list(range(a.n_strategies))
    cmap = coord_map or list(range(len(a.coords)))
    for c, d in enumerate(cmap):
        if len(a.coords[c].actions) != len(b.coords[d].actions):
            return False, f"coordinate {a.coords[c].name} has a different action count"
        if a.tracked[c] != b.tracked[d]:
            return False, f"coordinate {a.coords[c].name} tracks different actions"
    for k, kk in enumerate(smap):
        mine = sorted((tuple(sorted((cmap[c], x) for c, x in o.pairs)), o.payoff) for o in a.outcomes[k])
        theirs = sorted((o.pairs, o.payoff) for o in b.outcomes[kk])
        if mine != theirs:
            return False, f"strategy {a.strategies[k]} has different outcomes"
    return True, "isomorphic"
