"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
import warnings
from pathlib import Path

import numpy as np

from . import __version__, io
from .ci_check import HRDensity, Rectangle, factorization_residual, rectangle_ci_check
from .errors import NumericalError, ValidationError
from .estimate import chi_hat
from .learn import learned_from_estimate, recovery_study, subsample_stability
from .simulate import SimConfig, rank_couple_matrix, simulate_increments, IncrementMatrix

log = logging.getLogger("levytree")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _partition(text: str, d: int):
    parts = text.split("|")
    if len(parts) != 3:
        raise ValidationError(f"partition must look like 'A|B|C' (e.g. 1|3|2), got {text!r}")
    out = []
    for p in parts:
        idx = []
        for v in p.split(","):
            if v.strip():
                k = int(v)
                if not 1 <= k <= d:
                    raise ValidationError(f"partition label {k} outside 1..{d}")
                idx.append(k - 1)
        out.append(idx)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    model = io.load_model(args.config)
    cfg = SimConfig(epsilon=args.eps, n_steps=args.n, step_kind=args.step, seed=args.seed, drift_mc_samples=args.drift_samples)
    inc = simulate_increments(model, cfg, threads=args.threads)
    meta = {"flags": {"n": args.n, "eps": args.eps, "step": args.step, "seed": args.seed, "drift_samples": args.drift_samples}}
    io.write_increments(args.out, inc, extra_meta=meta)
    if args.paths:
        io.write_paths(args.paths, inc)
    log.info("wrote %d x %d increments to %s", inc.n, inc.d, args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    inc = io.read_increments(args.input)
    if args.k_grid:
        rows = []
        for k in args.k_grid:
            est = chi_hat(inc, k)
            io.write_chi(args.out, est, inc.labels, suffix=f"_k{k}")
            for i in range(inc.d):
                for j in range(i + 1, inc.d):
                    rows.append([str(k), repr(est.q), inc.labels[i], inc.labels[j], repr(float(est.chi[i, j]))])
        io._write_rows(Path(args.out) / "chi_grid.csv", ["k", "q", "i", "j", "chi"], rows)
    else:
        io.write_chi(args.out, chi_hat(inc, args.k), inc.labels)
    return EXIT_OK


def cmd_learn(args) -> int:
    if args.from_estimate:
        est, labels = io.read_chi(args.from_estimate)
        inc = None
    else:
        if not args.input or args.k is None:
            raise ValidationError("learn needs --input and --k, or --from-estimate")
        inc = io.read_increments(args.input)
        est, labels = chi_hat(inc, args.k), inc.labels
    learned = learned_from_estimate(est)
    Path(args.out_dot).write_text(io.tree_to_dot(learned, labels))
    io.write_edges(args.out_edges, learned, labels)
    if args.stability:
        if inc is None:
            raise ValidationError("--stability needs the raw increments (--input)")
        freqs = subsample_stability(inc, est.k, n_subsamples=args.stability, rng=args.seed)
        io.write_stability(args.out_stability, freqs, labels)
    return EXIT_OK


def cmd_study(args) -> int:
    cells = recovery_study(args.d, args.n_grid, args.q_grid, args.reps, rng=args.seed, threads=args.threads, epsilon=args.eps)
    io.write_recovery(args.out, cells)
    return EXIT_OK


def cmd_verify(args) -> int:
    if (args.config is None) == (args.gamma is None):
        raise ValidationError("verify needs exactly one of --config or --gamma")
    if args.config:
        dens = io.load_model(args.config).dependence
    else:
        gamma, _ = io.read_matrix(args.gamma)
        dens = HRDensity(gamma)
    d = dens.d
    a, b, c = _partition(args.partition, d)
    if len(args.lower) != d or len(args.upper) != d:
        raise ValidationError(f"--lower and --upper need {d} values")
    rect = Rectangle(tuple(args.lower), tuple(args.upper), args.resolution)
    ci = rectangle_ci_check(dens, rect, a, b, c, tol=args.tol)
    coarse = rect.with_resolution(min(8, args.resolution))
    pts = np.stack(np.meshgrid(*[coarse.axis(i)[0] for i in range(d)], indexing="ij"), axis=-1).reshape(-1, d)
    resid = factorization_residual(dens, a, b, c, pts)
    report = {
        "partition": {"A": [v + 1 for v in a], "B": [v + 1 for v in b], "C": [v + 1 for v in c]},
        "rectangle": {"lower": list(rect.lower), "upper": list(rect.upper), "resolution": list(rect.resolution)},
        "mass": ci.mass,
        "ci_violation": ci.violation,
        "tolerance": ci.tolerance,
        "ci_passed": ci.passed,
        "factorization_residual": resid,
        "factorization_passed": resid <= args.residual_tol,
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_couple(args) -> int:
    std = io.read_increments(args.std)
    obs = io.read_increments(args.observed)
    coupled = rank_couple_matrix(std.data, obs.data)
    io.write_increments(args.out, IncrementMatrix(coupled, labels=obs.labels), extra_meta={"source_std": str(args.std)})
    return EXIT_OK


def cmd_ingest(args) -> int:
    inc = io.ingest_prices(args.prices)
    io.write_increments(args.out, inc, extra_meta={"source": Path(args.prices).name})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levytree", description="Tree graphical models for multivariate Levy processes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate increments from a model config")
    s.add_argument("--config", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--eps", type=float, default=0.01)
    s.add_argument("--step", choices=("unit", "hf"), default="unit")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--drift-samples", type=int, default=20_000)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--paths", help="also write cumulative paths CSV")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="empirical Levy correlations")
    s.add_argument("--input", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--k", type=int)
    g.add_argument("--k-grid", type=_ints)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("learn", help="learn the tree structure")
    s.add_argument("--input")
    s.add_argument("--k", type=int)
    s.add_argument("--from-estimate", help="directory written by 'estimate --k'")
    s.add_argument("--out-dot", required=True)
    s.add_argument("--out-edges", required=True)
    s.add_argument("--stability", type=int, metavar="R", help="number of subsamples")
    s.add_argument("--out-stability", default="stability.csv")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("study", help="tree recovery study on random HR trees")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--n-grid", type=_ints, required=True)
    s.add_argument("--q-grid", type=_floats, required=True)
    s.add_argument("--reps", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--eps", type=float, default=0.01)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_study)

    s = sub.add_parser("verify", help="numerical conditional-independence check")
    s.add_argument("--config")
    s.add_argument("--gamma", help="variogram matrix CSV (positive orthant, HR)")
    s.add_argument("--partition", required=True, help="A|B|C with 1-based labels, e.g. 1|3|2")
    s.add_argument("--lower", type=_floats, required=True)
    s.add_argument("--upper", type=_floats, required=True)
    s.add_argument("--resolution", type=int, default=64)
    s.add_argument("--tol", type=float, default=1e-3)
    s.add_argument("--residual-tol", type=float, default=1e-8)
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("couple", help="rank-couple standardized increments to observed returns")
    s.add_argument("--std", required=True)
    s.add_argument("--observed", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_couple)

    s = sub.add_parser("ingest", help="prices CSV to log-returns CSV")
    s.add_argument("--prices", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)
    return p


def _origin(exc: BaseException) -> str:
    frames = traceback.extract_tb(exc.__traceback__)
    for fr in reversed(frames):
        path = Path(fr.filename)
        if path.parent.name == "levytree":
            return f"levytree.{path.stem}"
    return "levytree"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    if getattr(args, "threads", 1) is None:
        try:
            args.threads = io.default_threads()
        except ValidationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except ValidationError as exc:
        print(f"error [{_origin(exc)}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure [{_origin(exc)}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
