"""Encoded example games.

Several payoff tables are only available as pictures in the source material;
the concrete numbers here are chosen to satisfy every textual constraint on
them, and :func:`check_constraints` re-verifies those constraints at load.
"""

from __future__ import annotations

from typing import Callable

from .game import (
    GameError,
    GameTree,
    Node,
    TerminalPartition,
    derive_normal_form,
    normal_form_tree,
    normal_form_with_feedback,
    validate_game,
)


def T(tid: str, *payoffs: float):
    return ("T", tid, payoffs)


def D(owner: int, infoset: str, *edges):
    return ("D", owner, infoset, edges)


def build(players: int, spec, name: str) -> GameTree:
    nodes: list[Node] = []

    def rec(sub, nid: str) -> str:
        if sub[0] == "T":
            nodes.append(Node(sub[1], payoffs=tuple(float(x) for x in sub[2])))
            return sub[1]
        _, owner, infoset, edges = sub
        out = []
        for action, child in edges:
            out.append((action, rec(child, f"{nid}.{action}")))
        nodes.append(Node(nid, owner=owner, infoset=infoset, edges=tuple(out)))
        return nid

    rec(spec, "root")
    return GameTree(players, nodes, name=name)


def _cells(role: int, tree: GameTree, pooled: list[list[str]]) -> TerminalPartition:
    used = {z for cell in pooled for z in cell}
    cells = [frozenset(c) for c in pooled] + [frozenset([z]) for z in tree.terminals if z not in used]
    return TerminalPartition(role, tuple(cells))


# --------------------------------------------------------------- the games
def fig1():
    """Entry game: Out ends play; after In1/In2 the second role picks L or R unaware which."""
    p2 = lambda tag, l, r: D(1, "h2", ("L", T(f"{tag}.L", *l)), ("R", T(f"{tag}.R", *r)))
    tree = build(2, D(0, "h1",
                     ("Out", T("Out", 0, 0)),
                     ("In1", p2("In1", (-1, -1), (-1, 1))),
                     ("In2", p2("In2", (2, 1), (-5, -1)))), "fig1")
    return tree, []


def fig2():
    """Three-role game where role 2's Out hides role 3's choice from role 2."""
    def p3(tag, l, r):
        return D(2, "h3", ("L", T(f"{tag}.L", *l)), ("R", T(f"{tag}.R", *r)))

    tree = build(3, D(0, "h1",
                     ("Out", T("Out", 0, 0, 0)),
                     ("In", D(1, "h2",
                              ("Out", p3("In.Out", (1, 0, 0), (-1, 0, 0))),
                              ("In1", p3("In.In1", (1, 1, 1), (-1, -1, 0))),
                              ("In2", p3("In.In2", (1, 0, 0), (-1, -2, 1)))))), "fig2")
    return tree, [_cells(1, tree, [["In.Out.L", "In.Out.R"]])]


def fig9():
    """Auxiliary version of fig2 for role 2 (roles 1 and 3 indifferent, Out ends play)."""
    def p3(tag, l, r):
        return D(2, "h3", ("L", T(f"{tag}.L", *l)), ("R", T(f"{tag}.R", *r)))

    tree = build(3, D(0, "h1",
                     ("Out", T("Out", 0, 0, 0)),
                     ("In", D(1, "h2",
                              ("Out", T("In.Out", 0, 0, 0)),
                              ("In1", p3("In.In1", (0, 1, 0), (0, -1, 0))),
                              ("In2", p3("In.In2", (0, 0, 0), (0, -2, 0)))))), "fig9")
    return tree, []


_FIG3_PAY = {"1": ((-1, 0), (-2, 1)), "2": ((2, 1), (-1, 0))}


def _fig3_p2(a):
    l, r = _FIG3_PAY[a]
    return D(1, "h2", ("L", T(f"{a}.L", *l)), ("R", T(f"{a}.R", *r)))


def fig3_right():
    """Role 1 first decides Out/In and, after In, picks 1 or 2."""
    tree = build(2, D(0, "h1",
                     ("Out", T("Out", 0, 0)),
                     ("In", D(0, "h1b", ("1", _fig3_p2("1")), ("2", _fig3_p2("2"))))), "fig3-right")
    return tree, []


def fig3_left():
    """Coalesced form of fig3-right: one role-1 choice among Out, 1, 2."""
    tree = build(2, D(0, "h1", ("Out", T("Out", 0, 0)), ("1", _fig3_p2("1")), ("2", _fig3_p2("2"))),
                 "fig3-left")
    return tree, []


_FIG4_PAY = {
    "a1": ((2, 1), (0, 0), (1, 2)),
    "a2": ((0, 2), (3, 1), (1, 0)),
    "a3": ((1, 0), (1, 2), (2, 1)),
}


def fig4_left():
    """Role 2 moves first; role 1 then chooses a1 or passes to a second choice a2/a3."""
    def after(k, b):
        return D(0, "x",
                 ("a1", T(f"{b}.a1", *_FIG4_PAY["a1"][k])),
                 ("pass", D(0, "y",
                            ("a2", T(f"{b}.a2", *_FIG4_PAY["a2"][k])),
                            ("a3", T(f"{b}.a3", *_FIG4_PAY["a3"][k])))))

    tree = build(2, D(1, "b", *[(b, after(k, b)) for k, b in enumerate(("b1", "b2", "b3"))]), "fig4-left")
    return tree, []


def fig4_right():
    def after(k, b):
        return D(0, "x", *[(a, T(f"{b}.{a}", *_FIG4_PAY[a][k])) for a in ("a1", "a2", "a3")])

    tree = build(2, D(1, "b", *[(b, after(k, b)) for k, b in enumerate(("b1", "b2", "b3"))]), "fig4-right")
    return tree, []


def fig5_left():
    """Three-role centipede-like chain ending at (2,2,2) if everyone passes."""
    tree = build(3, D(0, "h1",
                     ("Pass", D(1, "h2",
                                ("Pass", D(2, "h3",
                                           ("Pass", T("PPP", 2, 2, 2)),
                                           ("Drop", T("PPD", 0, 0, 1)))),
                                ("Drop", T("PD", 0, 1, 0)))),
                     ("Drop", T("D", 1, 0, 0))), "fig5-left")
    return tree, []


def fig5_right():
    """Normal form of fig5-left played simultaneously, every terminal revealed."""
    nf = derive_normal_form(fig5_left()[0])
    return normal_form_tree(nf, name="fig5-right"), []


def fig6():
    """fig5-right with the profile partition that mirrors fig5-left's feedback."""
    src, _ = fig5_left()
    return normal_form_with_feedback(src, [], name="fig6")


def _fig7(name):
    def p2(a, l, r):
        return D(1, "h2", ("L", T(f"{a}.L", *l)), ("R", T(f"{a}.R", *r)))

    return build(2, D(0, "h1",
                      ("Out", p2("Out", (0, 0), (0, 0))),
                      ("In1", p2("In1", (-1, -1), (-1, 1))),
                      ("In2", p2("In2", (2, 1), (-5, -1)))), name)


def fig7_left():
    """Simultaneous version of fig1 in which role 1 sees role 2's choice even after Out."""
    return _fig7("fig7-left"), []


def fig7_right():
    """Same game, but role 1 learns nothing after Out."""
    tree = _fig7("fig7-right")
    return tree, [_cells(0, tree, [["Out.L", "Out.R"]])]


def fig8():
    """Role 1 picks A/B/C, role 2 picks X/Y; C is strictly dominated for role 1."""
    pay = {"A": ((2, 2), (0, 0)), "B": ((1, 1), (1, 1)), "C": ((-10, 0), (-10, 1))}
    tree = build(2, D(0, "h1", *[
        (a, D(1, "h2", ("X", T(f"{a}.X", *pay[a][0])), ("Y", T(f"{a}.Y", *pay[a][1]))))
        for a in ("A", "B", "C")]), "fig8")
    return tree, []


def toy_one_player():
    tree = build(1, D(0, "h", ("a", T("a", 1)), ("b", T("b", 0))), "one-player")
    return tree, []


GAMES: dict[str, Callable] = {
    "fig1": fig1,
    "fig2": fig2,
    "fig3-left": fig3_left,
    "fig3-right": fig3_right,
    "fig4-left": fig4_left,
    "fig4-right": fig4_right,
    "fig5-left": fig5_left,
    "fig5-right": fig5_right,
    "fig6": fig6,
    "fig7-left": fig7_left,
    "fig7-right": fig7_right,
    "fig8": fig8,
    "fig9": fig9,
}


def check_constraints(name: str, tree: GameTree) -> list[str]:
    """Textual constraints that the chosen payoffs must satisfy."""
    u = lambda z, i: tree.payoff(z)[i]
    bad = []
    if name == "fig2":
        if not (u("Out", 0) == 0 and u("In.In1.L", 0) == 1 and u("In.In1.R", 0) == -1):
            bad.append("role 1 payoffs: Out=0, In vs L=1, In vs R=-1")
        if max(u(f"In.{a}.{x}", 0) for a in ("Out", "In1", "In2") for x in "LR") != 1:
            bad.append("role 1 maximum payoff must be 1")
        for x in "LR":
            if not u(f"In.In2.{x}", 1) < u(f"In.In1.{x}", 1):
                bad.append(f"In2 must pay role 2 strictly less than In1 against {x}")
        if not u("In.In1.L", 2) > u("In.In1.R", 2):
            bad.append("role 3 must prefer L against In1")
        if not u("In.In2.R", 2) > u("In.In2.L", 2):
            bad.append("role 3 must prefer R against In2")
    if name in ("fig1", "fig7-left", "fig7-right"):
        if not all(u(f"In1.{x}", 0) < (0 if name == "fig1" else u(f"Out.{x}", 0)) for x in "LR"):
            bad.append("In1 must be strictly dominated by Out for role 1")
    return bad


def load(name: str) -> tuple[GameTree, list[TerminalPartition]]:
    if name not in GAMES:
        raise GameError(f"unknown corpus game {name!r}; known: {sorted(GAMES)}")
    tree, parts = GAMES[name]()
    problems = validate_game(tree, parts) + check_constraints(name, tree)
    if problems:
        raise GameError(f"corpus game {name}: " + "; ".join(problems))
    return tree, parts
