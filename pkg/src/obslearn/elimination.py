"""Dominance and iterated elimination with exact LP certificates.

The central test asks whether a strategy can be a best reply to some
correlated opponent conjecture that keeps conditional mass at least
``1 - eps`` on surviving strategies and at least ``eta`` on every profile.
If the conjecture LP is infeasible the strategy is eliminable at that
``eps``; the decision over "some eps > 0" is made on the schedule
``eps_r = 2**-r`` with floor ``eta_r = (eps_r / 2)**(I - 1) / (2 |S_-i|)`` (which
is ``eps_r / (4 |S_-i|)`` in two-role games) and requires infeasibility at
the last two schedule points.  The floor is small enough that the product of
independent per-opponent conjectures, each giving ``eps_r / (2 |S_j|)`` to
every strategy, is always admissible, so an infeasible LP is never caused
by an empty conjecture set.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import lp
from .game import GameError, GameTree, NormalFormGame

R_MAX = 20


class ValidityBreach(GameError):
    """A generator proposed a deletion that the eliminability test rejects."""


def _u(nf: NormalFormGame, role: int, own: int, opp: Sequence[int]) -> Fraction:
    prof = list(opp)
    prof.insert(role, own)
    return Fraction(float(nf.payoffs[tuple(prof) + (role,)]))


def _opp_roles(nf: NormalFormGame, role: int) -> list[int]:
    return [j for j in range(nf.players) if j != role]


def _opp_profiles(nf: NormalFormGame, role: int, surviving=None) -> list[tuple[int, ...]]:
    sets = [sorted(surviving[j]) if surviving is not None else range(nf.shape[j]) for j in _opp_roles(nf, role)]
    return list(itertools.product(*sets))


# -------------------------------------------------------------- dominance
@dataclass
class DominanceCertificate:
    strategy: int
    mixture: dict[int, Fraction]  # own strategy -> weight
    kind: str  # "weak" or "strict"
    margin: Fraction  # total slack (weak) or minimum gap (strict)


def _dominance_lp(nf, role, s, surviving, strict):
    own = [k for k in sorted(surviving[role]) if k != s]
    if not own:
        return None
    profiles = _opp_profiles(nf, role, surviving)
    K, P = len(own), len(profiles)
    if strict:
        # variables: sigma (K), t (1); maximize t subject to u(s,p) + t <= sum sigma u(k,p)
        c = [0] * K + [1]
        A_ub = [[-_u(nf, role, k, p) for k in own] + [1] for p in profiles]
        b_ub = [-_u(nf, role, s, p) for p in profiles]
        A_eq = [[1] * K + [0]]
    else:
        # variables: sigma (K), t (P); sum sigma u(k,p) - t_p = u(s,p); maximize sum t
        c = [0] * K + [1] * P
        A_ub, b_ub = [], []
        A_eq = [[1] * K + [0] * P]
        for n, p in enumerate(profiles):
            A_eq.append([_u(nf, role, k, p) for k in own] + [-1 if m == n else 0 for m in range(P)])
    b_eq = [1] + ([] if strict else [_u(nf, role, s, p) for p in profiles])
    res = lp.solve(c, A_ub, b_ub, A_eq, b_eq, maximize=True)
    if res.status != "optimal" or res.value <= 0:
        return None
    return DominanceCertificate(s, {k: res.x[n] for n, k in enumerate(own) if res.x[n] != 0},
                                "strict" if strict else "weak", res.value)


def _full(nf):
    return [set(range(n)) for n in nf.shape]


def weakly_dominated(nf: NormalFormGame, role: int, surviving=None) -> dict[int, DominanceCertificate]:
    """Strategies of ``role`` weakly dominated by a mixture of its other (surviving) strategies."""
    surv = surviving or _full(nf)
    out = {}
    for s in sorted(surv[role]):
        cert = _dominance_lp(nf, role, s, surv, strict=False)
        if cert is not None:
            out[s] = cert
    return out


def strictly_dominated(nf: NormalFormGame, role: int, surviving=None) -> dict[int, DominanceCertificate]:
    surv = surviving or _full(nf)
    out = {}
    for s in sorted(surv[role]):
        cert = _dominance_lp(nf, role, s, surv, strict=True)
        if cert is not None:
            out[s] = cert
    return out


def verify_dominance(nf: NormalFormGame, role: int, cert: DominanceCertificate, surviving=None) -> bool:
    surv = surviving or _full(nf)
    if any(w < 0 for w in cert.mixture.values()) or sum(cert.mixture.values()) != 1:
        return False
    gaps = [sum((w * _u(nf, role, k, p) for k, w in cert.mixture.items()), Fraction(0))
            - _u(nf, role, cert.strategy, p) for p in _opp_profiles(nf, role, surv)]
    if cert.kind == "strict":
        return min(gaps) > 0
    return min(gaps) >= 0 and max(gaps) > 0


# ------------------------------------------------------------- conjectures
def conjecture_system(nf: NormalFormGame, role: int, s: int, surviving, eps: Fraction, eta: Fraction):
    """Constraints on x = sigma - eta >= 0 that make ``s`` a best reply.

    ``sigma`` ranges over all opponent profiles; ``surviving`` gives the
    opponents' strategies still alive at the previous stage.
    """
    eps, eta = Fraction(eps), Fraction(eta)
    opp = _opp_roles(nf, role)
    profiles = _opp_profiles(nf, role)
    P = len(profiles)
    A_ub, b_ub = [], []
    for jpos, j in enumerate(opp):
        others = [r for r in range(len(opp)) if r != jpos]
        blocks: dict[tuple, list[int]] = {}
        for n, p in enumerate(profiles):
            blocks.setdefault(tuple(p[r] for r in others), []).append(n)
        for members in blocks.values():
            row = [Fraction(0)] * P
            n_in = n_out = 0
            for n in members:
                if profiles[n][jpos] in surviving[j]:
                    row[n] = -eps
                    n_in += 1
                else:
                    row[n] = 1 - eps
                    n_out += 1
            if n_out == 0:
                continue
            A_ub.append(row)
            b_ub.append(-(1 - eps) * eta * n_out + eps * eta * n_in)
    for k in range(nf.shape[role]):
        if k == s:
            continue
        d = [_u(nf, role, k, p) - _u(nf, role, s, p) for p in profiles]
        A_ub.append(d)
        b_ub.append(-eta * sum(d, Fraction(0)))
    A_eq = [[Fraction(1)] * P]
    b_eq = [1 - eta * P]
    return A_ub, b_ub, A_eq, b_eq, profiles


@dataclass
class ConjectureCheck:
    eps: Fraction
    eta: Fraction
    feasible: bool
    sigma: list[Fraction] | None = None  # best-reply conjecture when feasible
    farkas: tuple[list[Fraction], list[Fraction]] | None = None


def eliminable(nf: NormalFormGame, role: int, s: int, surviving, eps, eta) -> ConjectureCheck:
    """One point of the schedule: is ``s`` never a best reply to an admissible conjecture?"""
    eps, eta = Fraction(eps), Fraction(eta)
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    A_ub, b_ub, A_eq, b_eq, profiles = conjecture_system(nf, role, s, surviving, eps, eta)
    if b_eq[0] < 0:
        raise ValueError("eta too large for the number of opponent profiles")
    res = lp.solve([0] * len(profiles), A_ub, b_ub, A_eq, b_eq)
    if res.status == "infeasible":
        n_br = nf.shape[role] - 1
        cut = len(A_ub) - n_br
        if lp.solve([0] * len(profiles), A_ub[:cut], b_ub[:cut], A_eq, b_eq).status == "infeasible":
            raise ValueError(f"no admissible conjecture at eps={eps}, eta={eta}")
        return ConjectureCheck(eps, eta, False, farkas=(res.farkas_ub, res.farkas_eq))
    return ConjectureCheck(eps, eta, True, sigma=[x + eta for x in res.x])


@dataclass
class ScheduleRecord:
    role: int
    strategy: int
    eliminable: bool
    checks: list[tuple[int, ConjectureCheck]]  # (r, check)
    full_support: bool


def schedule_point(r: int, n_profiles: int, n_opponents: int = 1,
                   full_support: bool = True) -> tuple[Fraction, Fraction]:
    eps = Fraction(1, 2**r)
    return eps, ((eps / 2) ** n_opponents / (2 * n_profiles) if full_support else Fraction(0))


def eliminable_on_schedule(nf: NormalFormGame, role: int, s: int, surviving, r_max: int = R_MAX,
                           full_support: bool = True, scan: bool = False) -> ScheduleRecord:
    """Decide "eliminable for some eps > 0" from the last two schedule points.

    With ``scan`` every point r = 1..r_max is evaluated and recorded.
    """
    n_prof = len(_opp_profiles(nf, role))
    rs = range(1, r_max + 1) if scan else (r_max - 1, r_max)
    checks = [(r, eliminable(nf, role, s, surviving,
                             *schedule_point(r, n_prof, nf.players - 1, full_support))) for r in rs]
    decided = all(not ch.feasible for r, ch in checks if r >= r_max - 1)
    return ScheduleRecord(role, s, decided, checks, full_support)


def verify_schedule(nf: NormalFormGame, rec: ScheduleRecord, surviving) -> bool:
    for r, ch in rec.checks:
        A_ub, b_ub, A_eq, b_eq, _ = conjecture_system(nf, rec.role, rec.strategy, surviving, ch.eps, ch.eta)
        if ch.feasible:
            x = [v - ch.eta for v in ch.sigma]
            if not lp.verify_feasible(x, A_ub, b_ub, A_eq, b_eq):
                return False
        elif not lp.verify_farkas(A_ub, b_ub, A_eq, b_eq, *ch.farkas):
            return False
    return True


# ---------------------------------------------------------- sequences
@dataclass
class Deletion:
    stage: int
    role: int
    strategy: int
    label: str
    certificate: DominanceCertificate | ScheduleRecord
    surviving_before: list[frozenset[int]]


@dataclass
class EliminationState:
    nf: NormalFormGame
    stage: int
    surviving: list[set[int]]
    deleted: list[list[set[int]]] = field(default_factory=list)  # per stage, per role
    log: list[Deletion] = field(default_factory=list)
    generator: str = ""
    seconds: float = 0.0

    def survivors(self) -> list[list[str]]:
        return [[self.nf.strategies[i][k] for k in sorted(s)] for i, s in enumerate(self.surviving)]

    def contains(self, profile: Mapping[int, str] | Sequence[str]) -> bool:
        items = profile.items() if isinstance(profile, Mapping) else enumerate(profile)
        return all(self.nf.strategies[i].index(lab) in self.surviving[i] for i, lab in items)

    def to_dict(self) -> dict:
        rows = []
        for d in self.log:
            cert = d.certificate
            if isinstance(cert, DominanceCertificate):
                desc = {"type": f"{cert.kind}-dominance",
                        "mixture": {self.nf.strategies[d.role][k]: str(w) for k, w in cert.mixture.items()},
                        "margin": str(cert.margin)}
            else:
                desc = {"type": "conjecture-lp", "full_support": cert.full_support,
                        "schedule": [{"r": r, "eps": str(ch.eps), "eta": str(ch.eta), "feasible": ch.feasible,
                                      "farkas_ub": [str(v) for v in ch.farkas[0]] if ch.farkas else None,
                                      "farkas_eq": [str(v) for v in ch.farkas[1]] if ch.farkas else None}
                                     for r, ch in cert.checks]}
            rows.append({"stage": d.stage, "role": d.role, "strategy": d.label, "certificate": desc})
        return {"generator": self.generator, "stages": self.stage, "survivors": self.survivors(),
                "deletions": rows, "seconds": self.seconds}


def verify_certificates(state: EliminationState) -> bool:
    for d in state.log:
        surv = [set(s) for s in d.surviving_before]
        if isinstance(d.certificate, DominanceCertificate):
            if not verify_dominance(state.nf, d.role, d.certificate, surv if d.stage else None):
                return False
        elif not (d.certificate.eliminable and verify_schedule(state.nf, d.certificate, surv)):
            return False
    return True


def _validate(nf, stage, role, s, surviving, r_max, full_support):
    if stage == 0:
        cert = _dominance_lp(nf, role, s, _full(nf), strict=False)
        if cert is None:
            raise ValidityBreach(f"stage 0: {nf.strategies[role][s]} of role {role} is not weakly dominated")
        return cert
    rec = eliminable_on_schedule(nf, role, s, surviving, r_max, full_support)
    if not rec.eliminable:
        raise ValidityBreach(f"stage {stage}: {nf.strategies[role][s]} of role {role} is not eliminable")
    return rec


def run_valid_sequence(nf: NormalFormGame, generator: str = "sw", tree: GameTree | None = None,
                       custom: Sequence[Mapping[int, Iterable[str]]] | None = None,
                       r_max: int = R_MAX, full_support: bool = True, max_stages: int = 100) -> EliminationState:
    """Run a generator's proposals through the validity test until nothing more is deleted.

    Generators: ``sw`` (weak dominance, then iterated strict dominance),
    ``bi`` (backward induction by node height; needs the source tree),
    ``maximal`` (every eliminable strategy at every stage) and ``custom``
    (explicit per-stage deletions by label).
    """
    t0 = time.perf_counter()
    tree = tree or nf.source
    state = EliminationState(nf, 0, _full(nf), generator=generator)
    bi = None
    if generator == "bi":
        if tree is None:
            raise GameError("the backward-induction generator needs the extensive form")
        bi = _bi_plan(tree, nf)
    for stage in range(max_stages):
        prev = [frozenset(s) for s in state.surviving]
        if generator in ("sw", "maximal"):
            if stage == 0:
                props = [set(weakly_dominated(nf, i)) for i in range(nf.players)]
            elif generator == "sw":
                props = [set(strictly_dominated(nf, i, state.surviving)) for i in range(nf.players)]
            else:
                props = [{s for s in sorted(state.surviving[i])
                          if eliminable_on_schedule(nf, i, s, state.surviving, r_max, full_support).eliminable}
                         for i in range(nf.players)]
        elif generator == "bi":
            if stage >= len(bi):
                break
            props = [set(bi[stage][i]) & state.surviving[i] for i in range(nf.players)]
        elif generator == "custom":
            if custom is None or stage >= len(custom):
                break
            props = [set() for _ in range(nf.players)]
            for i, labels in custom[stage].items():
                props[int(i)] = {nf.strategies[int(i)].index(lab) for lab in labels}
        else:
            raise GameError(f"unknown generator {generator!r}")
        if generator in ("sw", "maximal") and not any(props) and stage > 0:
            break
        for i in range(nf.players):
            if props[i] and props[i] >= state.surviving[i]:
                raise ValidityBreach(f"stage {stage}: proposal would delete every strategy of role {i}")
            for s in sorted(props[i]):
                cert = _validate(nf, stage, i, s, state.surviving, r_max, full_support)
                state.log.append(Deletion(stage, i, s, nf.strategies[i][s], cert, list(prev)))
        state.deleted.append(props)
        state.surviving = [state.surviving[i] - props[i] for i in range(nf.players)]
        state.stage = stage + 1
    state.seconds = time.perf_counter() - t0
    return state


def iterated_strict_dominance(nf: NormalFormGame) -> list[set[int]]:
    surv = _full(nf)
    while True:
        props = [set(strictly_dominated(nf, i, surv)) for i in range(nf.players)]
        if not any(props):
            return surv
        surv = [surv[i] - props[i] for i in range(nf.players)]


# ------------------------------------------------------ perfect information
@dataclass
class SimpleGameReport:
    perfect_info: bool
    moves_once: bool
    no_terminal_ties: bool
    bi_comparison_ties: list[str]

    @property
    def strict(self) -> bool:
        return self.perfect_info and self.moves_once and self.no_terminal_ties

    @property
    def relaxed(self) -> bool:
        return self.perfect_info and self.moves_once and not self.bi_comparison_ties


def node_heights(tree: GameTree) -> dict[str, int]:
    """Longest number of moves from each node down to a terminal node."""
    height: dict[str, int] = {}

    def rec(nid):
        n = tree.nodes[nid]
        height[nid] = 0 if n.is_terminal else 1 + max(rec(c) for _, c in n.edges)
        return height[nid]

    rec(tree.root)
    return height


def _bi_values(tree: GameTree):
    """Backward-induction choice and value per node, with the list of tied comparisons."""
    choice, value, ties = {}, {}, []

    def rec(nid):
        n = tree.nodes[nid]
        if n.is_terminal:
            value[nid] = np.asarray(n.payoffs, dtype=float)
            return value[nid]
        vals = [(a, rec(c)) for a, c in n.edges]
        own = [v[n.owner] for _, v in vals]
        best = max(own)
        winners = [a for (a, _), x in zip(vals, own) if x == best]
        if len(winners) > 1:
            ties.append(nid)
        choice[nid] = winners[0]
        value[nid] = dict(vals)[winners[0]]
        return value[nid]

    rec(tree.root)
    return choice, value, ties


def is_simple_game(tree: GameTree) -> SimpleGameReport:
    perfect = all(len(info.nodes) == 1 for info in tree.infosets.values())
    once = all(len({tree.infosets[h].owner for h, _ in tree.path(z)}) == len(tree.path(z))
               for z in tree.terminals)
    no_ties = all(len({tree.payoff(z)[i] for z in tree.terminals}) == len(tree.terminals)
                  for i in range(tree.players))
    ties = _bi_values(tree)[2] if perfect else []
    return SimpleGameReport(perfect, once, no_ties, ties)


def bi_profile(tree: GameTree) -> dict[str, str]:
    """Backward-induction action at every information set of a perfect-information game."""
    if not all(len(info.nodes) == 1 for info in tree.infosets.values()):
        raise GameError("backward induction needs perfect information")
    choice, _, ties = _bi_values(tree)
    if ties:
        raise GameError(f"backward induction tie at node {ties[0]}")
    return {tree.nodes[nid].infoset: a for nid, a in choice.items()}


def _bi_plan(tree: GameTree, nf: NormalFormGame) -> list[list[set[int]]]:
    report = is_simple_game(tree)
    if not report.relaxed:
        raise GameError(f"backward-induction generator needs a simple game: {report}")
    bi = bi_profile(tree)
    heights = node_heights(tree)
    h_of = {tree.nodes[nid].infoset: heights[nid] for nid in tree.nodes if not tree.nodes[nid].is_terminal}
    top = max(h_of.values())
    plan = []
    for m in range(top):
        stage = []
        for i in range(nf.players):
            bad = set()
            for k, ch in enumerate(nf.choices[i]):
                wrong = [h_of[h] for h, a in ch.items() if a != bi[h]]
                if wrong and min(wrong) == m + 1:
                    bad.add(k)
            stage.append(bad)
        plan.append(stage)
    return plan


# ----------------------------------------------------------- grid oracle
def grid_feasible(nf: NormalFormGame, role: int, s: int, surviving, eps: float, eta: float,
                  step: Fraction = Fraction(1, 50)) -> bool:
    """Brute-force search of the conjecture polytope on a rational grid (two-role games)."""
    if nf.players != 2:
        raise GameError("grid search is implemented for two-role games")
    eps, eta = Fraction(eps), Fraction(eta)
    j = 1 - role
    n = nf.shape[j]
    units = int(1 / step)
    surv = surviving[j]
    U = [[_u(nf, role, k, (p,)) for p in range(n)] for k in range(nf.shape[role])]
    for combo in itertools.combinations(range(units + n - 1), n - 1):
        cuts = (-1,) + combo + (units + n - 1,)
        sigma = [Fraction(cuts[t + 1] - cuts[t] - 1) * step for t in range(n)]
        if min(sigma) < eta:
            continue
        if sum(sigma[p] for p in range(n) if p in surv) < 1 - eps:
            continue
        us = sum(U[s][p] * sigma[p] for p in range(n))
        if all(us >= sum(U[k][p] * sigma[p] for p in range(n)) for k in range(len(U))):
            return True
    return False
