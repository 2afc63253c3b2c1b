"""Command-line front end.

Exit codes: 0 success, 2 usage / invalid input, 3 budget or resource cap
exhausted, 4 target is not a probability density.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from spheremix import __version__
from spheremix._parallel import resolve_threads
from spheremix.approximator import ApproximationConfig, NonDensity, TargetDensity, approximate
from spheremix.geometry import PartitionTooLarge, build_partition
from spheremix.io import (
    load_mixture,
    read_json,
    read_points_csv,
    save_mixture,
    save_partition,
    write_column_csv,
    write_json,
    write_points_csv,
)
from spheremix.quadrature import sup_grid
from spheremix.special import surface_measure
from spheremix.spectral import lemma1_report
from spheremix.targets import STANDARD_SUITE, standard_target
from spheremix.vmf import VmfMixture, sample_mixture

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_DENSITY = 0, 2, 3, 4

log = logging.getLogger("spheremix")


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    return vals


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")


def _manifest(out: Path, command: str, params: dict, outputs: list, t0: float, seed=None):
    path = out / "manifest.json"
    write_json(
        path,
        {
            "command": command,
            "parameters": params,
            "seed": seed,
            "version": __version__,
            "outputs": [str(p) for p in outputs],
            "wall_time_seconds": time.perf_counter() - t0,
        },
    )
    return path


def _params(args) -> dict:
    skip = {"func", "verbose", "command"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _load_target(args) -> TargetDensity:
    spec = args.target
    if spec in STANDARD_SUITE:
        if args.m is None:
            raise UsageError("--m is required for built-in targets")
        return standard_target(spec, args.m)
    path = Path(spec)
    if not path.exists():
        raise UsageError(f"{spec!r} is neither a built-in target ({', '.join(STANDARD_SUITE)}) nor a file")
    try:
        raw = read_json(path)
        weights = np.asarray(raw["weights"], dtype=float)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read mixture {spec}: {exc}")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        # a structurally valid file whose weights are not a probability vector
        raise NonDensity(f"{spec}: mixture weights must be >= 0 and sum to 1")
    try:
        mix = VmfMixture.from_dict(raw)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read mixture {spec}: {exc}")
    if args.m is not None and args.m != mix.m:
        raise UsageError(f"--m {args.m} does not match the mixture dimension {mix.m}")
    return TargetDensity.from_mixture(mix, name=path.stem)


def cmd_approximate(args) -> int:
    t0 = time.perf_counter()
    if not args.delta > 0 or not math.isfinite(args.delta):
        raise UsageError("--delta must be a positive number")
    f = _load_target(args)
    threads = resolve_threads(args.threads)
    grid = sup_grid(f.m, args.sup_resolution or (4096 if f.m == 1 else 20_000))
    delta = args.delta
    if args.relative:
        delta *= float(np.max(f(grid.points)))
    try:
        cfg = ApproximationConfig(
            delta=delta,
            n_initial=args.n0,
            n_growth=args.growth,
            max_n=args.max_n,
            initial_levels=tuple(args.levels) if args.levels else None,
            max_blocks=args.max_blocks,
            balanced=args.balanced,
            threads=threads,
        )
    except ValueError as exc:
        raise UsageError(str(exc))
    if cfg.initial_levels is not None and len(cfg.initial_levels) != f.m:
        raise UsageError(f"--levels needs {f.m} entries")
    report = approximate(f, cfg, grid=grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = [
        write_json(out / "report.json", report.to_dict()),
        save_mixture(out / "mixture.json", report.mixture),
        out / "history.csv",
    ]
    (out / "history.csv").write_text(report.history_csv())
    params = _params(args) | {"delta_absolute": delta}
    _manifest(out, "approximate", params, outputs, t0)
    status = "converged" if report.converged else "budget exhausted"
    print(
        f"{status}: sup_error={report.sup_error:.6g} delta={delta:.6g} "
        f"n={report.n:g} N={report.N} stages={len(report.history)}"
    )
    return EXIT_OK if report.converged else EXIT_BUDGET


def cmd_diagnose(args) -> int:
    t0 = time.perf_counter()
    if not args.n:
        raise UsageError("--n needs at least one value")
    if any(not v > 0 for v in args.n):
        raise UsageError("--n values must be > 0")
    if any(not -1.0 < r < 1.0 for r in args.rho):
        raise UsageError("--rho values must lie in (-1, 1)")
    if args.m < 1 or args.kmax < 0:
        raise UsageError("need m >= 1 and kmax >= 0")
    rep = lemma1_report(args.m, args.n, args.rho, args.kmax)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "lemma1.csv").write_text(rep.to_csv())
    (out / "spectrum.csv").write_text(rep.spectrum_csv())
    _manifest(out, "diagnose", _params(args), [out / "lemma1.csv", out / "spectrum.csv"], t0)
    for v in rep.violations:
        print(f"violation: {v}", file=sys.stderr)
    print(f"{len(rep.ns)} kernels, {len(rep.rhos)} rho values, {len(rep.violations)} violations")
    return EXIT_OK


def _read_mixture_arg(path):
    try:
        return load_mixture(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read mixture {path}: {exc}")


def cmd_sample(args) -> int:
    t0 = time.perf_counter()
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    mix = _read_mixture_arg(args.mixture)
    pts = sample_mixture(mix, args.count, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = write_points_csv(out / "samples.csv", pts, mix.m + 1)
    _manifest(out, "sample", _params(args), [path], t0, seed=args.seed)
    print(f"wrote {len(pts)} samples to {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    mix = _read_mixture_arg(args.mixture)
    try:
        pts = read_points_csv(args.points, mix.m + 1)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read points {args.points}: {exc}")
    norms = np.linalg.norm(pts, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise UsageError("points must be unit vectors (|norm - 1| <= 1e-6)")
    vals = mix.density(pts) if len(pts) else np.empty(0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = write_column_csv(out / "densities.csv", "density", vals)
    _manifest(out, "eval", _params(args), [path], t0)
    print(f"evaluated {len(vals)} points")
    return EXIT_OK


def cmd_partition(args) -> int:
    t0 = time.perf_counter()
    if len(args.levels) != args.m:
        raise UsageError(f"--levels needs {args.m} entries")
    try:
        part = build_partition(args.m, args.levels, args.balanced, args.max_blocks)
    except PartitionTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        raise UsageError(str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = save_partition(out / "partition.json", part)
    _manifest(out, "partition", _params(args), [path], t0)
    total = float(np.sum(part.measures))
    omega = surface_measure(args.m)
    print(f"blocks={len(part)} measure_sum={total!r} omega_m={omega!r} rel_err={abs(total - omega) / omega:.3e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spheremix", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log search progress")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("approximate", help="build a vMF mixture within sup error delta")
    a.add_argument("--target", required=True, help=f"one of {', '.join(STANDARD_SUITE)} or a mixture JSON file")
    a.add_argument("--m", type=int, help="sphere dimension (required for built-in targets)")
    a.add_argument("--delta", type=float, required=True, help="target sup error")
    a.add_argument("--relative", action="store_true", help="delta is a fraction of sup f")
    a.add_argument("--n0", type=float, default=1.0, help="initial concentration")
    a.add_argument("--growth", type=float, default=2.0, help="concentration growth factor")
    a.add_argument("--max-n", type=float, default=512.0)
    a.add_argument("--levels", type=_int_list, help="initial partition levels, e.g. 2,4")
    a.add_argument("--max-blocks", type=int, default=20_000)
    a.add_argument("--sup-resolution", type=int)
    a.add_argument("--balanced", action="store_true", help="equal-measure bands in theta_1")
    a.add_argument("--threads", type=int, default=0, help="0 = SPHEREMIX_THREADS or CPU count")
    a.add_argument("--out", default="spheremix-out")
    a.set_defaults(func=cmd_approximate)

    d = sub.add_parser("diagnose", help="eigenvalue and tail diagnostics of K_n")
    d.add_argument("--m", type=int, required=True)
    d.add_argument("--n", type=_float_list, required=True, help="comma-separated concentrations")
    d.add_argument("--rho", type=_float_list, default=[0.0, 0.5])
    d.add_argument("--kmax", type=int, default=4)
    d.add_argument("--out", default="spheremix-out")
    d.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("sample", help="draw points from a mixture")
    s.add_argument("--mixture", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="spheremix-out")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("eval", help="evaluate a mixture density at points")
    e.add_argument("--mixture", required=True)
    e.add_argument("--points", required=True, help="CSV of unit vectors")
    e.add_argument("--out", default="spheremix-out")
    e.set_defaults(func=cmd_eval)

    q = sub.add_parser("partition", help="build a coordinate-block partition")
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--levels", type=_int_list, required=True)
    q.add_argument("--balanced", action="store_true")
    q.add_argument("--max-blocks", type=int, default=1_000_000)
    q.add_argument("--out", default="spheremix-out")
    q.set_defaults(func=cmd_partition)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonDensity as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DENSITY


if __name__ == "__main__":
    sys.exit(main())
