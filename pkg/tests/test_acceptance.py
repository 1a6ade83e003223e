"""Exit criteria, each at its stated tolerance. A pass/fail line per criterion is
printed in the terminal summary by ``conftest.py``."""
import csv
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from sketchkit.baselines import rand_block_lanczos, rand_qb, rand_qb_ei
from sketchkit.diagnostics import accuracy_bound, flops_model, lemma_theta, local_orth_loss
from sketchkit.driver import CONVERGED, SketchReport, _factors, rand_ubv, true_error
from sketchkit.io import read_pgm
from sketchkit.lanczos import SketchConfig
from sketchkit.matcore import EPS, defl_qr, fro_norm_sq
from sketchkit.postproc import truncated_svd
from sketchkit.sparsemat import SparseMatrix, spmm, spmm_t
from sketchkit.synth import gen_svd_matrix, optimal_rank, spectrum, standard_matrix

DATA = Path(__file__).parent / "data"
SPECTRA_400 = [("power", {"alpha": 2.0}), ("power", {"alpha": 1.0}), ("exp", {"rate": 20.0})]


def _detail(record_property, text):
    record_property("detail", text)


@pytest.fixture(scope="module")
def matrices_500x400():
    return [gen_svd_matrix(500, 400, spectrum(kind, 400, **kw), rng=5) for kind, kw in SPECTRA_400]


@pytest.fixture(scope="module")
def gravel():
    # stored 512 x 768; factored as its transpose so rows >= cols
    return read_pgm(DATA / "gravel_512x768.pgm").T.copy()


@pytest.mark.acceptance(1, "estimator fidelity: true^2 <= bound, gap <= 1e-6 when eps <= 1e-8")
def test_criterion_01_estimator_fidelity(matrices_500x400, record_property):
    t0 = time.perf_counter()
    worst_margin, worst_gap, checked = -math.inf, 0.0, 0
    for a in matrices_500x400:
        a_norm = np.linalg.norm(a)
        for stop_tol in (0.1, 0.01):
            snaps = []
            rand_ubv(a, SketchConfig(block_size=10, tol=stop_tol, seed=6),
                     callback=lambda s, r: snaps.append(s.snapshot()))
            for i, s in enumerate(snaps):
                true = true_error(a, _factors(s, SketchReport()))
                # loss of orthogonality over U_1..U_(k+1) when the next block exists
                blocks = snaps[min(i + 1, len(snaps) - 1)].u_blocks[:s.k + 1]
                eps = local_orth_loss(blocks)
                bound = accuracy_bound(max(s.e_acc, 0.0), eps, s.delta, s.d, a_norm)
                margin = true**2 - bound - 10 * EPS * a_norm**2
                worst_margin = max(worst_margin, margin)
                assert margin <= 0, f"bound violated at k={s.k}: {margin:.3e}"
                if eps <= 1e-8:
                    gap = abs(true - math.sqrt(max(s.e_acc, 0.0))) / true
                    worst_gap = max(worst_gap, gap)
                    assert gap <= 1e-6, f"relative gap {gap:.3e} at k={s.k}"
                checked += 1
    elapsed = time.perf_counter() - t0
    _detail(record_property, f"{checked} iterations, max gap {worst_gap:.1e}, {elapsed:.1f}s")
    assert elapsed < 30


@pytest.mark.acceptance(2, "convergence ordering: ubv <= qb-ei(p=0) >=90%, >= qb-ei(p=1) >=70%")
def test_criterion_02_convergence_ordering(record_property):
    t0 = time.perf_counter()
    results = []
    stop = 2.99e-8  # just above the estimator floor, so every run goes the full 40 iterations
    for idx in (1, 2, 3):
        a = standard_matrix(idx, 500, rng=1)
        ubv = rand_ubv(a, SketchConfig(block_size=10, tol=stop, max_rank=400, seed=2),
                       track_true_error=True)
        qb = {p: rand_qb_ei(a, SketchConfig(block_size=10, tol=stop, max_rank=400, seed=2, power=p),
                            track_true_error=True) for p in (0, 1)}
        e_u = [r.true_rel_err for r in ubv.report.records]
        e0 = [r.true_rel_err for r in qb[0].report.records]
        e1 = [r.true_rel_err for r in qb[1].report.records]
        n = min(len(e_u), len(e0), len(e1))
        ks = range(1, n)  # iterations k >= 2
        better = np.mean([e_u[k] <= e0[k] for k in ks])
        lags = np.mean([e_u[k] >= e1[k] for k in ks])
        results.append((idx, better, lags))
    elapsed = time.perf_counter() - t0
    _detail(record_property, ", ".join(f"M{i}: {b:.0%}/{l:.0%}" for i, b, l in results)
            + f", {elapsed:.1f}s")
    for idx, better, lags in results:
        assert better >= 0.9, f"matrix {idx}: ubv beat p=0 in only {better:.0%}"
        assert lags >= 0.7, f"matrix {idx}: ubv lagged p=1 in only {lags:.0%}"
    assert elapsed < 60


@pytest.mark.acceptance(3, "cluster robustness: step spectrum reaches 0.01 before rank 400")
def test_criterion_03_cluster_robustness(record_property):
    t0 = time.perf_counter()
    a = standard_matrix(4, 500, rng=3)
    f = rand_ubv(a, SketchConfig(block_size=10, tol=0.01, max_rank=400, seed=4))
    rel = true_error(a, f) / np.linalg.norm(a)
    elapsed = time.perf_counter() - t0
    _detail(record_property, f"rank {f.rank}, true error {rel:.4f}, {elapsed:.1f}s")
    assert f.report.status == CONVERGED
    assert f.rank < 400
    assert rel <= 0.01
    assert elapsed < 30


@pytest.mark.acceptance(4, "identity: converges at k=15 with augmentation, not without")
def test_criterion_04_identity(record_property):
    t0 = time.perf_counter()
    a = np.eye(200)
    est = []
    f = rand_ubv(a, SketchConfig(block_size=10, tol=0.5, seed=0),
                 callback=lambda s, r: est.append(s.e_acc))
    g = rand_ubv(a, SketchConfig(block_size=10, tol=0.5, seed=0, augment=False))
    elapsed = time.perf_counter() - t0
    _detail(record_property, f"k={f.report.iterations}, no-augment status {g.report.status}")
    assert f.report.status == CONVERGED and f.report.iterations == 15
    np.testing.assert_allclose(est, [200 - 10 * k for k in range(1, 16)], atol=1e-9)
    assert not g.report.converged
    assert elapsed < 5


def _perturbed_blocks(g, eps_target):
    sizes = [int(s) for s in g.integers(1, 6, size=int(g.integers(2, 7)))]
    m = sum(sizes) + int(g.integers(0, 20))
    q, _ = np.linalg.qr(g.standard_normal((m, sum(sizes))))
    u = q + (eps_target / math.sqrt(m)) * g.standard_normal(q.shape)
    return np.split(u, np.cumsum(sizes)[:-1], axis=1), sizes


def _block_bidiagonal(g, sizes):
    n = sum(sizes)
    b = np.zeros((n, n))
    off = np.concatenate([[0], np.cumsum(sizes)])
    for i in range(len(sizes)):
        b[off[i]:off[i + 1], off[i]:off[i + 1]] = np.triu(g.standard_normal((sizes[i], sizes[i])))
        if i + 1 < len(sizes):
            b[off[i]:off[i + 1], off[i + 1]:off[i + 2]] = g.standard_normal((sizes[i], sizes[i + 1]))
    return b


@pytest.mark.acceptance(5, "|theta| <= 2 eps on 500 trials, eps in [1e-12, 0.5]")
def test_criterion_05_lemma_theta(record_property):
    t0 = time.perf_counter()
    g = np.random.default_rng(5)
    eps_seen, violations = [], 0
    targets = np.logspace(-12, math.log10(0.5), 500)
    for target in targets:
        while True:
            u, sizes = _perturbed_blocks(g, target)
            eps = local_orth_loss(u)
            if 1e-12 <= eps <= 0.5:
                break
            target *= 0.5 if eps > 0.5 else 2.0
        theta = lemma_theta(u, _block_bidiagonal(g, sizes))
        violations += abs(theta) > 2 * eps
        eps_seen.append(eps)
    elapsed = time.perf_counter() - t0
    _detail(record_property, f"eps range [{min(eps_seen):.1e}, {max(eps_seen):.2f}], "
            f"{violations} violations")
    assert violations == 0
    assert min(eps_seen) < 1e-11 and max(eps_seen) > 0.25
    assert elapsed < 10


@pytest.mark.acceptance(6, "deflQR: rank detected >= 99%, residual <= 10 delta sqrt(n - s)")
def test_criterion_06_defl_qr(record_property):
    t0 = time.perf_counter()
    g = np.random.default_rng(6)
    delta = 1e-8
    hits = 0
    for _ in range(200):
        n = int(g.integers(3, 25))
        m = int(g.integers(n, 3 * n + 1))
        rank = int(g.integers(0, n))  # strictly rank deficient
        u, _ = np.linalg.qr(g.standard_normal((m, n)))
        v, _ = np.linalg.qr(g.standard_normal((n, n)))
        sigma = np.zeros(n)
        sigma[:rank] = np.sort(10.0 ** g.uniform(-6, 0, rank))[::-1]
        sigma[rank:] = 10.0 ** g.uniform(-16, -12, n - rank)
        x = (u * sigma) @ v.T
        res = defl_qr(x, delta)
        hits += res.s == rank
        resid = math.sqrt(fro_norm_sq(x - res.q @ res.r))
        assert resid <= 10 * delta * math.sqrt(n - res.s), f"residual {resid:.2e} with s={res.s}"
    elapsed = time.perf_counter() - t0
    _detail(record_property, f"{hits}/200 ranks exact, {elapsed:.2f}s")
    assert hits >= 198
    assert elapsed < 10


@pytest.mark.acceptance(7, "fixed-accuracy contract: converged runs have true error <= 1.05 tau")
def test_criterion_07_fixed_accuracy(matrices_500x400, gravel, record_property):
    named = [(f"M{i}", standard_matrix(i, 500, rng=i)) for i in (1, 2, 3, 4)]
    named += [(f"{kind}-{list(kw.values())[0]}", a) for (kind, kw), a in zip(SPECTRA_400, matrices_500x400)]
    named += [("identity", np.eye(200)), ("gravel", gravel)]
    worst, runs = 0.0, 0
    for name, a in named:
        a_norm = np.linalg.norm(a)
        for tau in (0.5, 0.1, 0.01):
            for factor in (rand_ubv(a, SketchConfig(block_size=10, tol=tau, seed=7)),
                           rand_qb_ei(a, SketchConfig(block_size=10, tol=tau, seed=7))):
                if factor.report.status != CONVERGED:
                    continue
                sketch_err = true_error(a, factor) / a_norm
                svd = truncated_svd(factor, tau)
                trunc_err = np.linalg.norm(a - (svd.u * svd.s) @ svd.v.T) / a_norm
                worst = max(worst, sketch_err / tau, trunc_err / tau)
                runs += 1
                assert sketch_err <= 1.05 * tau, f"{name} tau={tau}: sketch error {sketch_err:.4g}"
                assert trunc_err <= 1.05 * tau, f"{name} tau={tau}: truncated error {trunc_err:.4g}"
    _detail(record_property, f"{runs} converged runs, worst error/tau {worst:.3f}")


@pytest.mark.acceptance(8, "image postprocessing: truncated rank <= 1.05 x optimal")
def test_criterion_08_image_rank(gravel, record_property):
    t0 = time.perf_counter()
    sigma = np.linalg.svd(gravel, compute_uv=False)
    r_opt = optimal_rank(sigma, 0.1)
    f = rand_ubv(gravel, SketchConfig(block_size=20, tol=0.1, stop_tol=0.09, seed=8))
    svd = truncated_svd(f, 0.1)
    err = np.linalg.norm(gravel - (svd.u * svd.s) @ svd.v.T) / np.linalg.norm(gravel)
    elapsed = time.perf_counter() - t0
    _detail(record_property, f"r={svd.rank} vs optimal {r_opt} (sketch {f.rank}), "
            f"error {err:.4f}, {elapsed:.1f}s")
    assert f.report.status == CONVERGED
    assert svd.rank <= 1.05 * r_opt
    assert err <= 0.1 * 1.05
    assert elapsed < 60


@pytest.mark.acceptance(9, "adjoint consistency and QB Frobenius identity")
def test_criterion_09_adjoint_and_qb_identity(record_property):
    g = np.random.default_rng(9)
    worst_adj = 0.0
    for _ in range(100):
        m, n = (int(v) for v in g.integers(1, 200, size=2))
        a = SparseMatrix.from_scipy(sp.random(m, n, density=float(g.uniform(0.001, 0.3)),
                                              rng=g, format="csr"))
        x = g.standard_normal((n, 4))
        y = g.standard_normal((m, 4))
        lhs, rhs = np.sum(y * spmm(a, x)), np.sum(x * spmm_t(a, y))
        scale = np.linalg.norm(a.values) * np.linalg.norm(x) * np.linalg.norm(y)
        rel = abs(lhs - rhs) / scale if scale else abs(lhs - rhs)
        worst_adj = max(worst_adj, rel)
    assert worst_adj <= 1e-12

    a = gen_svd_matrix(300, 200, spectrum("power", 200, alpha=1.0), rng=9)
    norm_sq = fro_norm_sq(a)
    runs = {
        "qb p=0": rand_qb(a, 40, 0, rng=1),
        "qb p=2": rand_qb(a, 40, 2, rng=1),
        "rbl": rand_block_lanczos(a, 10, 3, rng=1),
        "qb-ei p=0": rand_qb_ei(a, SketchConfig(block_size=10, tol=0.05, seed=1)),
        "qb-ei p=1": rand_qb_ei(a, SketchConfig(block_size=10, tol=0.05, seed=1, power=1)),
    }
    worst_id = 0.0
    for name, f in runs.items():
        lhs = fro_norm_sq(a - f.q @ f.b)
        rel = abs(lhs - (norm_sq - fro_norm_sq(f.b))) / norm_sq
        worst_id = max(worst_id, rel)
        assert rel <= 1e-10, f"{name}: identity off by {rel:.2e}"
    _detail(record_property, f"adjoint {worst_adj:.1e}, QB identity {worst_id:.1e}")


# (m, n, ell, t, p) -> hand-evaluated randqb, randqb_ei, bgkl, randubv
COST_TABLE = {
    (1000, 1000, 100, 10, 0): (210000000, 222000000, 203000000, 213000000),
    (500, 400, 40, 4, 1): (32800000, 35720000, 16540000, 17180000),
    (2000, 300, 60, 6, 2): (223200000, 249060000, 74070000, 75150000),
    (10000, 500, 200, 20, 0): (2400000000, 2650000000, 2031500000, 2051500000),
    (64, 32, 8, 1, 3): (135168, 183296, 41984, 44032),
}


@pytest.mark.acceptance(10, "cost models match hand values; randubv <= randqb_ei(p=0)")
def test_criterion_10_cost_models(record_property):
    for (m, n, ell, t, p), expected in COST_TABLE.items():
        got = tuple(flops_model(alg, m, n, ell, t, p)
                    for alg in ("randqb", "randqb_ei", "bgkl", "randubv"))
        assert got == expected, f"{(m, n, ell, t, p)}: {got}"
        assert flops_model("randubv", m, n, ell, t) <= flops_model("randqb_ei", m, n, ell, t, 0)
    _detail(record_property, f"{len(COST_TABLE)} tuples x 4 models exact")


def _cli(args, cwd):
    env = {**os.environ, "SKETCHKIT_THREADS": "1"}
    proc = subprocess.run([sys.executable, "-m", "sketchkit.cli", *args], cwd=cwd, env=env,
                          capture_output=True, text=True)
    return proc.returncode


def _strip_timing(doc):
    if isinstance(doc, dict):
        return {k: _strip_timing(v) for k, v in doc.items()
                if k not in ("elapsed_s", "t_fac", "t_svd", "t_total")}
    if isinstance(doc, list):
        return [_strip_timing(v) for v in doc]
    return doc


@pytest.mark.acceptance(11, "determinism: repeated CLI runs give byte-identical reports")
def test_criterion_11_cli_determinism(tmp_path, record_property):
    img = str(DATA / "gravel_512x768.pgm")
    grid = tmp_path / "grid.csv"
    grid.write_text("matrix,alg,block_size,power,tau_stop,tau_err,seed\n"
                    "synth:1:200,ubv,10,0,0.09,0.1,1\n"
                    "synth:1:200,qb-ei,10,1,0.1,0.1,1\n")
    files = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        assert _cli(["sketch", img, "--transpose", "--tol", "0.1", "--stop-tol", "0.09",
                     "--block-size", "20", "--seed", "3", "--no-timing", "--out-prefix", "t"], d) == 0
        assert _cli(["sketch", img, "--transpose", "--alg", "qb-ei", "--power", "1",
                     "--seed", "3", "--out-prefix", "q"], d) == 0
        assert _cli(["bench", str(grid), "--jobs", "2", "--no-timing", "-o", "bench.csv"], d) == 0
        files.append(d)
    a, b = files
    identical = ["t.report.csv", "t.report.json", "t.U.bin", "t.B.bin", "t.V.bin", "bench.csv"]
    for name in identical:
        assert (a / name).read_bytes() == (b / name).read_bytes(), f"{name} differs"
    # timed runs agree everywhere except the wall-clock fields
    ja, jb = (json.loads((d / "q.report.json").read_text()) for d in files)
    assert _strip_timing(ja) == _strip_timing(jb)
    ca, cb = ([{k: v for k, v in r.items() if k != "elapsed_s"}
               for r in csv.DictReader(open(d / "q.report.csv"))] for d in files)
    assert ca == cb
    assert (a / "q.Q.bin").read_bytes() == (b / "q.Q.bin").read_bytes()
    _detail(record_property, f"{len(identical)} files byte-identical, timed reports equal modulo timing")
