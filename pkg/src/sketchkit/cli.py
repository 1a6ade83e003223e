"""Command-line front end: ``sketchkit gen | sketch | bench``.

Exit codes: 0 converged, 2 usage or input error, 3 the sketch did not converge
(rank budget exhausted, recurrence stalled, or Krylov basis collapsed).
Setting ``SKETCHKIT_THREADS`` pins the BLAS thread count, which together with
``--seed`` makes reports reproducible byte for byte (``--no-timing`` also
zeroes the wall-clock columns).
"""
import argparse
import csv
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io as skio
from .baselines import QBFactors, rand_block_lanczos, rand_qb, rand_qb_ei
from .driver import CONVERGED, rand_ubv, true_error
from .exceptions import SketchError, SketchWarning
from .lanczos import SketchConfig
from .postproc import truncated_svd
from .synth import gen_svd_matrix, standard_matrix, spectrum

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3

BENCH_COLUMNS = [
    "index", "matrix", "alg", "block_size", "power", "tau_stop", "tau_err", "seed",
    "status", "iterations", "sketch_rank", "r", "est_rel_err", "true_rel_err",
    "t_fac", "t_svd", "t_total",
]
BENCH_CONFIG_COLUMNS = ["matrix", "alg", "block_size", "power", "tau_stop", "tau_err", "seed",
                        "max_rank", "transpose"]


def _spectrum_kwargs(args):
    return {"alpha": args.alpha, "rate": args.rate, "base_exp": args.base, "cluster": args.cluster}


def load_matrix(path, transpose=False):
    """Read ``.mtx``, ``.pgm`` or ``.csv`` input, or ``synth:<index>:<size>[:<seed>]``."""
    source = str(path)
    if source.startswith("synth:"):
        parts = source.split(":")[1:]
        if len(parts) not in (2, 3):
            raise ValueError(f"synthetic matrix source must be synth:<index>:<size>[:<seed>], got {source!r}")
        seed = int(parts[2]) if len(parts) == 3 else 0
        a = standard_matrix(int(parts[0]), int(parts[1]), rng=seed)
    else:
        suffix = Path(source).suffix.lower()
        if suffix == ".mtx":
            a = skio.read_matrix_market(source)
        elif suffix in (".pgm", ".pnm"):
            a = skio.read_pgm(source)
        elif suffix == ".csv":
            a = np.loadtxt(source, delimiter=",", ndmin=2)
        else:
            raise ValueError(f"unrecognized input format {suffix!r}")
    if transpose:
        a = a.to_scipy().T.tocsr() if hasattr(a, "to_scipy") else a.T.copy()
    return a


def _run_alg(a, alg, block_size, power, tau_stop, tau_err, seed, max_rank=None, defl_tol=None,
             track_true_error=False, absolute_tol=False, rank=None, iters=None):
    if alg == "ubv":
        cfg = SketchConfig(block_size=block_size, tol=tau_err, stop_tol=tau_stop, seed=seed,
                           max_rank=max_rank, defl_tol=defl_tol)
        return rand_ubv(a, cfg, track_true_error=track_true_error)
    if alg == "qb-ei":
        cfg = SketchConfig(block_size=block_size, tol=tau_err, stop_tol=tau_stop, seed=seed,
                           max_rank=max_rank, power=power, absolute_tol=absolute_tol)
        return rand_qb_ei(a, cfg, track_true_error=track_true_error)
    if alg == "qb":
        return rand_qb(a, rank if rank is not None else block_size, power, seed)
    if alg == "rbl":
        return rand_block_lanczos(a, block_size, iters if iters is not None else 0, seed)
    raise ValueError(f"unknown algorithm {alg!r}")


def _warn_orientation(a):
    m, n = a.shape
    if m < n:
        print(f"warning: input has fewer rows than columns ({m} < {n}); "
              "consider --transpose", file=sys.stderr)


def cmd_gen(args):
    kw = _spectrum_kwargs(args)
    r = min(args.m, args.n) if args.rank is None else args.rank
    sigma = spectrum(args.kind, r, **kw)
    a = gen_svd_matrix(args.m, args.n, sigma, rng=args.seed)
    out = Path(args.output)
    skio.write_matrix_market(out, a)
    side = {"kind": args.kind, "m": args.m, "n": args.n, "seed": args.seed,
            "params": kw, "sigma": sigma.tolist()}
    Path(str(out) + ".spectrum.json").write_text(json.dumps(side, indent=2) + "\n")
    return EXIT_OK


def _write_factors(prefix, factors):
    if isinstance(factors, QBFactors):
        parts = {"Q": factors.q, "B": factors.b}
    else:
        parts = {"U": factors.u, "B": factors.b_dense(), "V": factors.v}
    for name, x in parts.items():
        skio.write_factor(f"{prefix}.{name}.bin", x)
        skio.write_matrix_market(f"{prefix}.{name}.mtx", x)


def cmd_sketch(args):
    a = load_matrix(args.input, args.transpose)
    if not args.transpose:
        _warn_orientation(a)
    tau_err = args.tol
    tau_stop = args.stop_tol if args.stop_tol is not None else tau_err
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SketchWarning)
        t0 = time.perf_counter()
        factors = _run_alg(a, args.alg, args.block_size, args.power, tau_stop, tau_err, args.seed,
                           args.max_rank, args.defl_tol, args.true_error, args.absolute_tol,
                           args.rank, args.iters)
        t_fac = time.perf_counter() - t0
        svd = truncated_svd(factors, tau_err)
        t_svd = time.perf_counter() - t0 - t_fac
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    report = factors.report
    report.extra.update({
        "input": str(args.input), "alg": args.alg, "transposed": bool(args.transpose),
        "tau_err": tau_err, "tau_stop": tau_stop, "block_size": args.block_size,
        "power": args.power, "seed": args.seed, "truncated_rank": svd.rank,
        "truncated_est_rel_err": svd.est_rel_err,
        "t_fac": 0.0 if args.no_timing else t_fac, "t_svd": 0.0 if args.no_timing else t_svd,
    })
    if args.no_timing:
        for r in report.records:
            r.elapsed_s = 0.0
    prefix = args.out_prefix or Path(str(args.input).replace(":", "_")).stem
    skio.write_report(report, "csv", f"{prefix}.report.csv")
    skio.write_report(report, "json", f"{prefix}.report.json")
    if not args.no_factors:
        _write_factors(prefix, factors)
    print(f"{args.alg}: status={report.status} iterations={report.iterations} "
          f"rank={report.final_rank} truncated_rank={svd.rank}")
    return EXIT_OK if report.status == CONVERGED else EXIT_NOT_CONVERGED


def _read_bench_config(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [{k.strip(): (v or "").strip() for k, v in row.items()}
                for row in csv.DictReader(fh)]
    if not rows:
        raise ValueError(f"benchmark grid {path} has no rows")
    unknown = set(rows[0]) - set(BENCH_CONFIG_COLUMNS)
    if unknown or "matrix" not in rows[0] or "alg" not in rows[0]:
        raise ValueError(f"benchmark grid header must use columns {BENCH_CONFIG_COLUMNS} "
                         "(matrix and alg required)")
    return rows


def _bench_cell(index, row, args):
    def get(name, default, cast):
        v = row.get(name, "")
        return cast(v) if v != "" else default

    tau_err = get("tau_err", args.tau_err, float)
    tau_stop = get("tau_stop", args.tau_stop if args.tau_stop is not None else tau_err, float)
    block_size = get("block_size", args.block_size, int)
    power = get("power", 0, int)
    seed = get("seed", args.seed, int)
    max_rank = get("max_rank", None, int)
    transpose = get("transpose", False, lambda s: s.lower() in ("1", "true", "yes"))
    a = load_matrix(row["matrix"], transpose)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SketchWarning)
        t0 = time.perf_counter()
        f = _run_alg(a, row["alg"], block_size, power, tau_stop, tau_err, seed, max_rank)
        t_fac = time.perf_counter() - t0
        svd = truncated_svd(f, tau_err)
        t_svd = time.perf_counter() - t0 - t_fac
    a_norm = f.report.a_norm
    true_rel = "" if args.no_true_error or not a_norm else repr(true_error(a, f) / a_norm)
    est = f.report.records[-1].est_rel_err if f.report.records else 0.0
    timing = ["", "", ""] if args.no_timing else [repr(t_fac), repr(t_svd), repr(t_fac + t_svd)]
    return [index, row["matrix"], row["alg"], block_size, power, repr(tau_stop), repr(tau_err), seed,
            f.report.status, f.report.iterations, f.rank, svd.rank, repr(est), true_rel, *timing]


def cmd_bench(args):
    rows = _read_bench_config(args.config)
    cells = list(enumerate(rows))
    if args.jobs > 1:
        with ThreadPoolExecutor(args.jobs) as pool:
            results = list(pool.map(lambda c: _bench_cell(c[0], c[1], args), cells))
    else:
        results = [_bench_cell(i, row, args) for i, row in cells]
    results.sort(key=lambda r: r[0])
    out = open(args.output, "w", newline="", encoding="utf-8") if args.output else nullcontext(sys.stdout)
    with out as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        w.writerows(results)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="sketchkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic matrix with a known spectrum")
    g.add_argument("--kind", required=True, choices=["power", "exp", "exponential", "step"])
    g.add_argument("--alpha", type=float, default=2.0, help="power decay exponent")
    g.add_argument("--rate", type=float, default=20.0, help="exponential decay length")
    g.add_argument("--base", type=float, default=-0.6, help="step spectrum exponent per cluster")
    g.add_argument("--cluster", type=int, default=30, help="step spectrum cluster size")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--rank", type=int, help="number of nonzero singular values (default min(m, n))")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("sketch", help="factor one matrix and write reports and factors")
    s.add_argument("input", help=".mtx, .pgm, .csv or synth:<index>:<size>[:<seed>]")
    s.add_argument("--alg", choices=["ubv", "qb-ei", "qb", "rbl"], default="ubv")
    s.add_argument("--tol", type=float, default=0.1, help="relative error of the truncated SVD")
    s.add_argument("--stop-tol", type=float, help="relative stopping tolerance (default --tol)")
    s.add_argument("--block-size", type=int, default=10)
    s.add_argument("--power", type=int, default=0)
    s.add_argument("--defl-tol", type=float)
    s.add_argument("--max-rank", type=int)
    s.add_argument("--rank", type=int, help="sketch size for --alg qb")
    s.add_argument("--iters", type=int, help="Krylov iterations for --alg rbl")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--transpose", action="store_true")
    s.add_argument("--absolute-tol", action="store_true", help="qb-ei: stop on absolute error")
    s.add_argument("--true-error", action="store_true", help="compute the exact residual every iteration")
    s.add_argument("--out-prefix")
    s.add_argument("--no-factors", action="store_true")
    s.add_argument("--no-timing", action="store_true")
    s.set_defaults(func=cmd_sketch)

    b = sub.add_parser("bench", help="run a matrix x algorithm grid and emit one CSV row per run")
    b.add_argument("config", help=f"CSV grid with header drawn from {','.join(BENCH_CONFIG_COLUMNS)}")
    b.add_argument("-o", "--output")
    b.add_argument("--tau-stop", type=float)
    b.add_argument("--tau-err", type=float, default=0.1)
    b.add_argument("--block-size", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--no-true-error", action="store_true")
    b.add_argument("--no-timing", action="store_true")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = os.environ.get("SKETCHKIT_THREADS")
    limits = threadpool_limits(int(threads)) if threads else nullcontext()
    try:
        with limits:
            return args.func(args)
    except (OSError, ValueError, SketchError) as exc:
        print(f"sketchkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
