"""Command-line experiments.  Every subcommand writes a CSV table (or a short
report) headed by a ``# config:`` line echoing the parsed flags.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import sys

import numpy as np

from .column_model import DEFAULT_ALPHA, basis_state, column_hamiltonian
from .dynamics import (
    StepUnderflow,
    evolve,
    full_basis_crosscheck,
    make_schedule,
    randomized_init_run,
)
from .glued_graph import MAX_FULL_GRAPH_N, classical_random_walk, generate_instance
from .spectral import (
    QuantizationSingularity,
    SpectralError,
    analytic_F,
    analytic_G,
    eigen_low,
    gap_profile,
    min_gap10,
    stage_boundaries,
)

CROSSCHECK_TOL = 1e-6
CROSSCHECK_MAX_N = 8
DELTA21_RANGE = (1e-3, 1.0 - 1e-3)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x) + 0.0:.12g}"


class Table:
    """CSV writer with ``#`` metadata lines and fixed float formatting."""

    def __init__(self, config: dict):
        self.buf = io.StringIO()
        self.comment("config: " + " ".join(f"{k}={fmt(v) if isinstance(v, float) else v}" for k, v in config.items()))

    def comment(self, text: str):
        self.buf.write(f"# {text}\n")

    def header(self, *cols):
        self.buf.write(",".join(cols) + "\n")

    def row(self, *vals):
        self.buf.write(",".join(fmt(v) for v in vals) + "\n")

    def text(self) -> str:
        return self.buf.getvalue()


def _config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _schedule(args, n):
    kind = args.schedule.replace("-", "_")
    return make_schedule(kind, n, args.alpha, args.epsilon, args.T, kappa=args.kappa)


# ------------------------------------------------------------------ commands


def cmd_spectrum(args) -> str:
    n, a = args.n, args.alpha
    out = Table(_config(args))
    sb = stage_boundaries(n, a, args.kappa)
    out.comment(f"s_cross={fmt(sb.s_cross)} s1={fmt(sb.s1)} s2={fmt(sb.s2)} s3={fmt(sb.s3)} s4={fmt(sb.s4)}")
    out.header("s", "lambda0", "lambda1", "lambda2", "delta10", "delta21", "F", "G")
    for s in np.linspace(0.0, 1.0, args.grid):
        lam = [e.value for e in eigen_low(column_hamiltonian(n, a, float(s)), 3)]
        d21 = lam[2] - lam[1] if DELTA21_RANGE[0] <= s <= DELTA21_RANGE[1] else float("nan")
        out.row(s, lam[0], lam[1], lam[2], lam[1] - lam[0], d21, analytic_F(a, s), analytic_G(s))
    return out.text()


def cmd_evolve(args) -> str:
    n, a = args.n, args.alpha
    sched = _schedule(args, n)
    res = evolve(n, a, sched, basis_state(n, 0), args.grid, kappa=args.kappa)
    out = Table(_config(args))
    out.comment(f"T={fmt(sched.T)} steps={res.steps} richardson_deviation={fmt(res.richardson_deviation)}")
    out.header(*res.COLUMNS)
    for r in res.rows():
        out.row(*r)
    return out.text()


def cmd_gap_scaling(args) -> str:
    a = args.alpha
    out = Table(_config(args))
    out.header("n", "min_delta10", "argmin_s", "delta21_at_half")
    ns, gaps = [], []
    for n in range(6, args.n + 1):
        g, s_min = min_gap10(n, a, args.grid)
        d21 = gap_profile(n, a, [0.5]).delta21[0]
        out.row(n, g, s_min, d21)
        ns.append(n)
        gaps.append(g)
    if len(ns) >= 2:
        slope = np.polyfit(ns, np.log(gaps), 1)[0]
        out.comment(f"slope_ln_min_delta10={fmt(slope)} reference={fmt(-np.log(2) / 2)}")
    return out.text()


def cmd_classical(args) -> str:
    out = Table(_config(args))
    out.header("n", "trials", "median_queries", "p90_queries", "hit_rate")
    for n in range(2, args.n + 1):
        queries, hits = [], 0
        for i in range(args.trials):
            inst_seed, walk_seed = np.random.SeedSequence([args.seed, n, i]).generate_state(2, np.uint64)
            inst = generate_instance(n, int(inst_seed))
            res = classical_random_walk(inst, int(walk_seed), args.max_queries)
            queries.append(res.queries_used)
            hits += res.hit
        out.row(n, args.trials, float(np.median(queries)), float(np.percentile(queries, 90)), hits / args.trials)
    return out.text()


def cmd_crosscheck(args) -> str:
    n = args.n
    if n > CROSSCHECK_MAX_N:
        raise UsageError(f"crosscheck needs n <= {CROSSCHECK_MAX_N}; n={n} is too large for the full basis")
    inst = generate_instance(n, args.seed, MAX_FULL_GRAPH_N)
    dev = full_basis_crosscheck(inst, args.alpha, _schedule(args, n), args.grid)
    ok = dev <= CROSSCHECK_TOL
    out = Table(_config(args))
    out.header("n", "seed", "max_deviation", "pass")
    out.row(n, args.seed, dev, ok)
    out.comment(f"{'PASS' if ok else 'FAIL'} max deviation {fmt(dev)} against {fmt(CROSSCHECK_TOL)}")
    return out.text()


def cmd_randomized(args) -> str:
    n = args.n
    sched = _schedule(args, n)
    outcomes = [randomized_init_run(n, args.alpha, sched, args.seed + i) for i in range(args.trials)]
    out = Table(_config(args))
    out.header("seeds", "success_rate", "entrance_fraction")
    out.row(
        args.trials,
        np.mean([o.success for o in outcomes]),
        np.mean([o.chosen_initial == "entrance" for o in outcomes]),
    )
    return out.text()


# -------------------------------------------------------------------- parser


COMMANDS = {
    # name: (function, help, defaults)
    "spectrum": (cmd_spectrum, "three lowest eigenvalues and gaps over s", dict(n=10, grid=2001)),
    "evolve": (cmd_evolve, "anneal from ENTRANCE and record overlaps", dict(n=40, grid=401, T=10000.0)),
    "gap-scaling": (cmd_gap_scaling, "minimum gap versus n, from n=6 up to --n", dict(n=16, grid=401)),
    "classical": (cmd_classical, "random-walk query counts, n=2 up to --n", dict(n=8, trials=100)),
    "crosscheck": (cmd_crosscheck, "full-basis vs column-basis evolution", dict(n=4, grid=21, T=2000.0)),
    "randomized": (cmd_randomized, "randomized ENTRANCE/|u> preparation", dict(n=10, trials=200, epsilon=1.0)),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gluedanneal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (func, help_text, defaults) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("--n", type=int, default=defaults.get("n", 10), help="tree depth")
        p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="projector weight in (0, 1/2)")
        p.add_argument("--seed", type=int, default=0, help="base random seed")
        p.add_argument("--epsilon", type=float, default=defaults.get("epsilon", 1.0), help="annealing rate parameter")
        p.add_argument("--kappa", type=float, default=1.0, help="stage half-width is kappa/n^3")
        p.add_argument("--T", type=float, default=defaults.get("T"), help="total time (default n^6/epsilon for linear)")
        p.add_argument("--grid", type=int, default=defaults.get("grid", 201), help="grid or sample count")
        p.add_argument("--trials", type=int, default=defaults.get("trials", 100), help="trials or seeds")
        p.add_argument("--max-queries", type=int, default=1_000_000, help="oracle query cap per walk")
        p.add_argument("--out", default="-", help="output path, - for stdout")
        p.add_argument("--schedule", choices=("linear", "gap-adapted"), default="linear", help="schedule kind")
        p.set_defaults(func=func)
    return parser


def _check(args):
    if args.n < 2:
        raise UsageError("--n must be >= 2")
    if not 0.0 < args.alpha < 0.5:
        raise UsageError("--alpha must lie in (0, 1/2)")
    if args.epsilon <= 0 or args.kappa <= 0:
        raise UsageError("--epsilon and --kappa must be positive")
    if args.T is not None and args.T <= 0:
        raise UsageError("--T must be positive")
    if args.grid < 2 or args.trials < 1 or args.max_queries < 1:
        raise UsageError("--grid must be >= 2, --trials and --max-queries >= 1")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _check(args)
        text = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SpectralError, StepUnderflow, QuantizationSingularity, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
