"""Command line entry points.

Subcommands:

* osc-demo: small 1D collocation solves with printed piece coefficients
* compare: accuracy table of the reference interpolators vs collocation
* bench-abd: block-solver scaling benchmark with a fitted exponent
* train: surrogate training runs emitting metrics CSV and a checkpoint

Every command is deterministic given --seed. Outputs are CSV (stdout or
--out). The SPLINECOLLOC_THREADS environment variable caps the thread
count of the numerical backends; --config FILE loads flag values from a
JSON object keyed by flag name (explicit flags win).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys


def _apply_thread_cap() -> None:
    cap = os.environ.get("SPLINECOLLOC_THREADS")
    if not cap:
        return
    if not cap.isdigit() or int(cap) < 1:
        raise SystemExit(f"SPLINECOLLOC_THREADS must be a positive integer, "
                         f"got {cap!r}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ.setdefault(var, cap)


_apply_thread_cap()

import numpy as np  # noqa: E402


class CliError(Exception):
    pass


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def _write_rows(path, header, rows) -> None:
    fh = _open_out(path)
    try:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


# ---------------------------------------------------------------------------
# osc-demo


def cmd_osc_demo(args) -> int:
    from . import osc1d
    from .basis import uniform_grid

    if args.r < 2:
        raise CliError(f"order r must be >= 2, got {args.r}")
    grid = uniform_grid(0.0, 1.0, args.n, args.r)
    if args.problem == "a3":
        # u + u' = sin(2 pi x) + 2 pi cos(2 pi x), exact solution sin(2 pi x)
        def rhs(x):
            return np.sin(2 * np.pi * x) + 2 * np.pi * np.cos(2 * np.pi * x)

        def exact(x):
            return np.sin(2 * np.pi * x)

        problem = osc1d.Osc1dProblem(grid, osc1d.OdeMode(1.0, 1.0, 0.0, rhs,
                                                         (0.0, 0.0)))
    elif args.problem == "poly-exact":
        coef = np.arange(1, args.r + 2, dtype=np.float64)

        def exact(x):
            return np.polynomial.polynomial.polyval(x, coef)

        times = np.concatenate(([0.0], grid.collocation_points(), [1.0]))
        problem = osc1d.Osc1dProblem(grid,
                                     osc1d.InterpMode(times, exact(times)))
    else:
        raise CliError(f"unknown problem {args.problem!r} "
                       "(choose a3 or poly-exact)")

    sol = osc1d.solve_osc1d(problem)
    xs = np.linspace(0.0, 1.0, args.samples)
    uh = osc1d.evaluate_many(sol, xs)
    err = float(np.abs(uh - exact(xs)).max())
    print(f"problem={args.problem} n_cells={args.n} r={args.r} "
          f"max_abs_error={err:.6e}")
    for i, c in enumerate(sol.coeffs):
        terms = " ".join(f"{v:+.4f}*x^{p}" for p, v in enumerate(c))
        print(f"piece {i}: {terms}")
    _write_rows(args.out, ["x", "u_hat", "u_exact"],
                [(f"{x:.10g}", f"{u:.16e}", f"{e:.16e}")
                 for x, u, e in zip(xs, uh, exact(xs))])
    return 0


# ---------------------------------------------------------------------------
# compare


def cmd_compare(args) -> int:
    from . import baselines
    from .datagen import ANALYTIC_NAMES

    if args.all:
        problems = sorted(ANALYTIC_NAMES)
    elif args.problem:
        problems = [args.problem]
    else:
        raise CliError("compare needs --problem NAME or --all")
    rows = []
    for prob in problems:
        errors = baselines.compare_methods(prob, args.resolution)
        for method in baselines.METHODS:
            rows.append((prob, method, f"{errors[method]:.6e}"))
    _write_rows(args.out, ["problem", "method", "mse"], rows)
    return 0


# ---------------------------------------------------------------------------
# bench-abd


def cmd_bench_abd(args) -> int:
    from . import abd

    sizes = [int(s) for s in args.sizes.split(",")]
    table = abd.benchmark_scaling(sizes, seed=args.seed)
    exponent = abd.scaling_exponent(table)
    _write_rows(args.out, ["n", "time_factorize_s", "time_solve_s"],
                [(row["n"], f"{row['time_factorize_s']:.6e}",
                  f"{row['time_solve_s']:.6e}") for row in table])
    print(f"fitted log-log exponent: {exponent:.3f}")
    return 0


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    from . import surrogate

    out = args.out or "."
    if not os.path.isdir(out):
        raise CliError(f"output directory {out!r} does not exist")
    tag = f"{args.dataset}_{args.variant}_seed{args.seed}"
    config = surrogate.TrainConfig(
        dataset=args.dataset, variant=args.variant, epochs=args.epochs,
        seed=args.seed, batch=args.batch, hidden=args.hidden,
        checkpoint_path=os.path.join(out, f"{tag}.npz"),
        metrics_path=os.path.join(out, f"{tag}_metrics.csv"))
    _, metrics = surrogate.train(config)
    last = metrics[-1]
    print(f"trained {tag}: epochs={len(metrics)} "
          f"L={last['L']:.6e} L_s={last['L_s']:.6e} L_i={last['L_i']:.6e}")
    print(f"checkpoint: {config.checkpoint_path}")
    print(f"metrics: {config.metrics_path}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splinecolloc",
        description="spline collocation demos, benchmarks and training")
    parser.add_argument("--config", help="JSON file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("osc-demo", help="small 1D collocation solve")
    p.add_argument("--problem", default="a3", help="a3 or poly-exact")
    p.add_argument("--n", type=int, default=3, help="number of cells")
    p.add_argument("--r", type=int, default=3, help="polynomial order (>= 2)")
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_osc_demo)

    p = sub.add_parser("compare", help="interpolator accuracy table")
    p.add_argument("--problem", help="analytic test field name")
    p.add_argument("--all", action="store_true", help="run every field")
    p.add_argument("--resolution", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench-abd", help="block solver scaling benchmark")
    p.add_argument("--sizes", default="256,512,1024,2048,4096",
                   help="comma-separated system sizes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_bench_abd)

    p = sub.add_parser("train", help="train the learned stepper")
    p.add_argument("--dataset", default="heat", help="heat or wave")
    p.add_argument("--variant", default="e2e",
                   help="post, e2e or e2e-adaptive")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--out", help="output directory (default cwd)")
    p.set_defaults(func=cmd_train)

    parser._commands = dict(sub.choices)
    return parser


def _extract_config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config":
            return argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser: argparse.ArgumentParser, path: str) -> None:
    """Install config values as parser defaults; explicit flags still win."""
    try:
        with open(path) as fh:
            loaded = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path!r}: {exc}")
    if not isinstance(loaded, dict):
        raise CliError("config file must hold a JSON object")
    main_dests = {a.dest for a in parser._actions}
    sub_dests = {name: {a.dest for a in sp._actions}
                 for name, sp in parser._commands.items()}
    for key, value in loaded.items():
        attr = key.replace("-", "_")
        known = False
        if attr in main_dests:
            parser.set_defaults(**{attr: value})
            known = True
        for name, dests in sub_dests.items():
            if attr in dests:
                parser._commands[name].set_defaults(**{attr: value})
                known = True
        if not known:
            raise CliError(f"unknown config key {key!r}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        path = _extract_config_path(argv)
        if path:
            _apply_config(parser, path)
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver/domain failures: one-line diagnostic
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
