"""Command-line interface.

Games are given either as a path to a game JSON file or as the name of a
corpus game (``obslearn corpus list``).  Roles are numbered from 0 as in the
file formats.  Output files without a directory go to ``$OBSLEARN_OUT``
(default ``./obslearn-out``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import corpus
from .beliefs import DirichletPrior, load_prior, load_priors
from .elimination import ValidityBreach, run_valid_sequence, verify_certificates
from .game import (
    GameError,
    derive_normal_form,
    game_to_dict,
    load_game,
    normal_form_with_feedback,
    save_game,
    validate_game,
)
from .observation import from_tree
from .policy import solve_policy
from .population import Learners, patient_sweep, simulate_population, steady_state
from .replicate import IDS, priors_from_spec, replicate
from .transforms import CoalescePlan, coalesce

OUT_ENV = "OBSLEARN_OUT"


def out_path(name: str) -> Path:
    p = Path(name)
    if p.parent == Path("."):
        p = Path(os.environ.get(OUT_ENV, "obslearn-out")) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def get_game(ref: str):
    if Path(ref).suffix == ".json" or Path(ref).exists():
        return load_game(ref)
    return corpus.load(ref)


def get_priors(path: str | None, tree):
    if path is None:
        return [DirichletPrior.uniform(tree, i) for i in range(tree.players)]
    return load_priors(path, tree)


def _dump(obj, path: str | None) -> None:
    if path:
        p = out_path(path)
        p.write_text(json.dumps(obj, indent=2))
        print(f"wrote {p}")


# ----------------------------------------------------------------- commands
def cmd_validate(args) -> int:
    tree, parts = get_game(args.game)
    problems = validate_game(tree, parts)
    for msg in problems:
        print(msg)
    if not problems:
        print(f"{tree.name}: ok ({tree.players} roles, {len(tree.infosets)} information sets, "
              f"{len(tree.terminals)} terminal nodes)")
    return 1 if problems else 0


def cmd_normal_form(args) -> int:
    tree, parts = get_game(args.game)
    nf = derive_normal_form(tree)
    for idx in nf.profiles():
        labels = ", ".join(nf.strategies[i][k] for i, k in enumerate(idx))
        print(f"({labels}) -> {tuple(float(x) for x in nf.payoffs[idx])}")
    if args.out:
        nf_tree, nf_parts = normal_form_with_feedback(tree, parts)
        p = out_path(args.out)
        save_game(p, nf_tree, nf_parts)
        print(f"wrote {p}")
    return 0


def cmd_coalesce(args) -> int:
    tree, parts = get_game(args.game)
    plan = CoalescePlan.infer(tree, args.role, args.h1, args.h2)
    res = coalesce(tree, plan, parts)
    p = out_path(args.out)
    save_game(p, res.tree, res.partitions)
    labels = [res.tree.strategy_labels(i) for i in range(tree.players)]
    for old, new in zip(tree.strategy_labels(args.role), res.strategy_map[args.role]):
        print(f"{old} -> {labels[args.role][new]}")
    print(f"wrote {p}")
    return 0


def cmd_eliminate(args) -> int:
    tree, parts = get_game(args.game)
    if args.normal_form:
        tree, parts = normal_form_with_feedback(tree, parts)
    nf = derive_normal_form(tree)
    custom = None
    if args.generator == "custom":
        if not args.custom:
            raise GameError("the custom generator needs --custom FILE")
        custom = json.loads(Path(args.custom).read_text())
    try:
        st = run_valid_sequence(nf, args.generator, tree=tree, custom=custom, r_max=args.r_max,
                                full_support=not args.zero_floor)
    except ValidityBreach as exc:
        print(f"invalid sequence: {exc}")
        return 1
    for i, labs in enumerate(st.survivors()):
        print(f"role {i}: {', '.join(labs)}")
    print(f"certificates verified: {verify_certificates(st)}")
    _dump(st.to_dict(), args.out)
    return 0


def cmd_policy(args) -> int:
    tree, parts = get_game(args.game)
    prior = load_prior(args.prior, tree) if args.prior else DirichletPrior.uniform(tree, args.role)
    if prior.role != args.role:
        raise GameError(f"prior is for role {prior.role}, not {args.role}")
    model = from_tree(tree, parts, args.role)
    pol = solve_policy(model, prior, args.delta, args.gamma, args.cap)
    print(f"role {args.role}: {len(pol.space)} belief states, plays {pol.at_zero()} with no data, "
          f"uses {sorted(pol.strategies_used())}, Bellman residual {pol.residual:.1e}")
    if args.dump:
        _dump(pol.to_dict(), args.dump)
    return 0


def cmd_steady(args) -> int:
    tree, parts = get_game(args.game)
    priors = get_priors(args.priors, tree)
    learners = Learners.build(tree, parts, priors, args.delta, args.gamma, args.cap)
    if args.method == "exact":
        st = steady_state(learners, damping=args.damping, starts=args.starts, seed=args.seed)
        mixed = st.mixed
        info = {"converged": st.converged, "residual": st.residual, "iterations": st.iterations}
    else:
        mixed = simulate_population(learners, args.agents, args.periods, args.burn_in, args.seed)
        info = {"agents": args.agents, "periods": args.periods, "burn_in": args.burn_in}
    for i, m in enumerate(mixed):
        labs = tree.strategy_labels(i)
        print(f"role {i}: " + ", ".join(f"{l}={x:.6f}" for l, x in zip(labs, m)))
    _dump({"method": args.method, "delta": args.delta, "gamma": args.gamma,
           "mixed": [np.asarray(m).tolist() for m in mixed], **info}, args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    tree, parts = get_game(cfg["game"])
    priors = priors_from_spec(cfg.get("priors", []), tree)
    deltas = [float(d) for d in cfg["deltas"]]
    gammas = {float(k): [float(g) for g in v] for k, v in cfg["gammas"].items()}
    init = [np.asarray(x, dtype=float) for x in cfg["init"]] if "init" in cfg else None
    res = patient_sweep(tree, parts, priors, deltas, gammas, cap=cfg.get("cap", 64), init=init,
                        damping=cfg.get("damping", 0.5), tol=cfg.get("tol", 1e-10),
                        enforce_grid=cfg.get("enforce_grid", True))
    rows = [{"delta": c.delta, "gamma": c.gamma, "converged": c.steady.converged,
             "residual": c.steady.residual, "mixed": [m.tolist() for m in c.steady.mixed],
             "behavior": {h: v.tolist() for h, v in c.steady.behavior.items()},
             "nash_slack": c.nash_slack} for c in res.cells]
    for r in rows:
        print(f"delta={r['delta']} gamma={r['gamma']} converged={r['converged']} "
              f"max slack={max(r['nash_slack']):.2e}")
    _dump({"cells": rows, "inner_cauchy": res.inner_cauchy, "outer_cauchy": res.outer_cauchy,
           "candidate": [m.tolist() for m in res.candidate]}, args.out)
    return 0


def cmd_replicate(args) -> int:
    ids = list(IDS) if args.id == "all" else [args.id]
    out = Path(args.out or os.environ.get(OUT_ENV, "obslearn-out"))
    ok = True
    for rid in ids:
        rep = replicate(rid, out)
        print(rep.summary())
        ok &= rep.passed
    return 0 if ok else 1


def cmd_corpus(args) -> int:
    for name, fn in corpus.GAMES.items():
        tree, parts = corpus.load(name)
        doc = (fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else ""
        print(f"{name:12s} {tree.players} roles, {len(tree.terminals):2d} terminals  {doc}")
    if args.dump:
        tree, parts = corpus.load(args.dump)
        print(json.dumps(game_to_dict(tree, parts), indent=2))
    return 0


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="obslearn", description="Learning in games with observational feedback.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a game file")
    p.add_argument("--game", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("normal-form", help="print the normal form; optionally save it with matching feedback")
    p.add_argument("--game", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_normal_form)

    p = sub.add_parser("coalesce", help="merge two consecutive information sets of one role")
    p.add_argument("--game", required=True)
    p.add_argument("--role", type=int, required=True)
    p.add_argument("--h1", required=True)
    p.add_argument("--h2", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_coalesce)

    p = sub.add_parser("eliminate", help="run a certified elimination sequence")
    p.add_argument("--game", required=True)
    p.add_argument("--normal-form", action="store_true", help="work on the simultaneous-move normal form")
    p.add_argument("--generator", choices=["sw", "bi", "custom", "maximal"], default="sw")
    p.add_argument("--custom", help="JSON list of stages, each {role: [strategy labels]}")
    p.add_argument("--r-max", type=int, default=20)
    p.add_argument("--zero-floor", action="store_true", help="allow conjectures without full support")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eliminate)

    p = sub.add_parser("policy", help="solve one role's learning problem")
    p.add_argument("--game", required=True)
    p.add_argument("--prior")
    p.add_argument("--role", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--cap", type=int, default=64)
    p.add_argument("--dump")
    p.set_defaults(func=cmd_policy)

    p = sub.add_parser("steady", help="compute a steady state")
    p.add_argument("--game", required=True)
    p.add_argument("--priors")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--method", choices=["exact", "mc"], default="exact")
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--starts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=64)
    p.add_argument("--agents", type=int, default=100_000)
    p.add_argument("--periods", type=int, default=300)
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("sweep", help="steady states over a (delta, gamma) grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replicate", help="run a shipped replication")
    p.add_argument("id", choices=list(IDS) + ["all"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("corpus", help="corpus games")
    p.add_argument("action", choices=["list"])
    p.add_argument("--dump", help="print one corpus game as JSON")
    p.set_defaults(func=cmd_corpus)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GameError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
