"""Command line front end.

Exit status: 0 when the solve converged, 2 on timeout, 1 on any error or a
run that stopped short of the requested precision.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .bench import epsilon_from_exponent, load_config, rows_to_csv, run_bench
from .fileformat import ParseError, load_model, serialize_model
from .generators import gen_random, gen_slow_mc, gen_slow_mdp
from .model import ModelError
from .oracle import OracleError, exact_value
from .solve import ALGORITHMS, solve
from .vi import SolveTimeout


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    model = load_model(args.model)
    try:
        rep = solve(model, args.algo, args.epsilon, k1=args.k1, k2=args.k2,
                    conservative_bounds=args.conservative_bounds,
                    collapse=not args.no_collapse_mecs, timeout=args.timeout,
                    budget=args.budget, slack_mode=args.slack_mode)
    except SolveTimeout:
        print("timeout", file=sys.stderr)
        return 2
    lines = [f"# algorithm={rep.algorithm} converged={str(rep.converged).lower()} "
             f"epsilon={args.epsilon!r} width={rep.final_width!r} "
             f"bellman_updates={rep.bellman_updates} sweeps={rep.sweeps} "
             f"time_s={rep.wall_time:.6f}"]
    if rep.heuristic_slack:
        lines.append("# warning: guessing thresholds used an uncertified slack")
    lines.append("state lower upper")
    for s, (lo, hi) in enumerate(zip(rep.bounds.lower.tolist(), rep.bounds.upper.tolist())):
        lines.append(f"{s} {lo!r} {hi!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0 if rep.converged else 1


def cmd_oracle(args) -> int:
    sol = exact_value(load_model(args.model))
    lines = [f"# residual={sol.residual!r}"]
    if sol.strategy is not None:
        lines.append("# strategy " + " ".join(f"{s}->{t}" for s, t in
                                              sorted(sol.strategy.choice.items())))
    lines.append("state value")
    lines += [f"{s} {v!r}" for s, v in enumerate(sol.values.tolist())]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_gen(args) -> int:
    if args.family == "slow-mc":
        model = gen_slow_mc(args.n, args.p)
    elif args.family == "slow-mdp":
        model = gen_slow_mdp(args.n)
    else:
        from .bench import default_seed
        seed = default_seed() if args.seed is None else args.seed
        model = gen_random(args.n, args.branch, _floats(args.prob_grid), seed,
                           model_type=args.model_type, objective=args.objective,
                           locality=args.locality)
    _emit(serialize_model(model), args.out)
    return 0


def cmd_bench(args) -> int:
    config = load_config(args.spec)
    if args.epsilon_grid:
        config["epsilon_grid"] = _floats(args.epsilon_grid)
    rows = run_bench(config, seed=args.seed, base=Path(args.spec).resolve().parent)
    _emit(rows_to_csv(rows), args.out)
    if any(r.final_width is None for r in rows):
        print(f"{sum(r.final_width is None for r in rows)} run(s) timed out", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="guessvi", description="Guessing value iteration solver")
    p.add_argument("--version", action="version", version=f"guessvi {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a model file")
    s.add_argument("--model", required=True)
    s.add_argument("--algo", choices=ALGORITHMS, default="gvi")
    s.add_argument("--epsilon", type=float, default=1e-3)
    s.add_argument("--k1", type=int, default=10)
    s.add_argument("--k2", type=int, default=100)
    s.add_argument("--conservative-bounds", action="store_true",
                   help="restart every recursive guess from the trivial bounds")
    s.add_argument("--no-collapse-mecs", action="store_true")
    s.add_argument("--timeout", type=float, default=None, help="seconds")
    s.add_argument("--budget", type=int, default=None, help="maximum Bellman updates")
    s.add_argument("--slack-mode", choices=("escape", "pmin"), default="escape")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="exact values by linear solve / strategy enumeration")
    o.add_argument("--model", required=True)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    g = sub.add_parser("gen", help="write a generated model")
    g.add_argument("family", choices=("slow-mc", "slow-mdp", "random"))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=float, default=0.5)
    g.add_argument("--branch", type=int, default=3)
    g.add_argument("--prob-grid", default="1,2,3")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--model-type", choices=("mc", "mdp"), default="mc")
    g.add_argument("--objective", choices=("reach", "ssp"), default="reach")
    g.add_argument("--locality", type=int, default=None)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="run a benchmark description and write CSV")
    b.add_argument("--spec", required=True)
    b.add_argument("--out")
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--epsilon-grid", default=None,
                   help="comma separated x values; epsilon = 1e6 ** -x")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, ParseError, OracleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
