"""Subspace-iteration and prototype block Krylov baselines producing ``A ~= Q B``."""
import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from ._operator import as_operator
from .driver import (BUDGET_EXHAUSTED, CONVERGED, IterationRecord, SketchReport,
                     _clamp_stop_tol, true_error)
from .exceptions import SketchWarning
from .lanczos import SketchConfig, stop_threshold
from .matcore import defl_qr, fro_norm_sq, gaussian_matrix, make_rng, qr_thin

RANK_DEFICIENT = "rank_deficient"


@dataclass
class QBFactors:
    """``A ~= q @ b`` with orthonormal ``q`` and ``b = q.T @ A``."""

    q: np.ndarray
    b: np.ndarray
    report: SketchReport
    a_norm_sq: float = 0.0

    @property
    def rank(self):
        return self.q.shape[1]


def _qb_report(alg, op, q, b, t0):
    a_norm_sq = op.fro_norm_sq()
    a_norm = math.sqrt(a_norm_sq)
    est = math.sqrt(max(a_norm_sq - fro_norm_sq(b), 0.0))
    rec = IterationRecord(k=1, est_rel_err=est / a_norm if a_norm else 0.0, rank=q.shape[1],
                          elapsed_s=time.perf_counter() - t0)
    return SketchReport(algorithm=alg, records=[rec], status=CONVERGED,
                        final_rank=q.shape[1], a_norm=a_norm), a_norm_sq


def rand_qb(a, rank_ell, power_p=0, rng=None):
    """Fixed-rank randomized subspace iteration.

    Forms ``Y = (A A^T)^p A Omega`` with a QR after every application of ``A``
    or ``A^T``, then ``Q = qr(Y)`` and ``B = Q^T A``.
    """
    op = as_operator(a)
    m, n = op.shape
    if not 1 <= rank_ell <= min(m, n):
        raise ValueError(f"rank_ell must lie in [1, {min(m, n)}], got {rank_ell}")
    if power_p < 0:
        raise ValueError("power_p must be non-negative")
    rng = make_rng(rng)
    t0 = time.perf_counter()
    q, _ = qr_thin(op.matmat(gaussian_matrix(n, rank_ell, rng)))
    for _ in range(power_p):
        z, _ = qr_thin(op.rmatmat(q))
        q, _ = qr_thin(op.matmat(z))
    b = op.rmatmat(q).T
    report, a_norm_sq = _qb_report("qb", op, q, b, t0)
    return QBFactors(q, np.ascontiguousarray(b), report, a_norm_sq)


def rand_block_lanczos(a, b_size, q_iters, rng=None):
    """Prototype randomized block Lanczos: ``Q`` spans ``[A Om, (A A^T) A Om, ..., (A A^T)^q A Om]``.

    Each Krylov term is generated from the previous orthonormalized one and
    reorthogonalized against all earlier terms (two Gram-Schmidt passes), then
    deflated with a tolerance of ``1e-12`` relative to its norm. If deflation
    drops any column, ``report.status`` is ``"rank_deficient"`` and ``Q`` has
    fewer than ``(q + 1) * b_size`` columns.
    """
    op = as_operator(a)
    m, n = op.shape
    if b_size < 1 or q_iters < 0:
        raise ValueError("b_size must be positive and q_iters non-negative")
    if (q_iters + 1) * b_size > min(m, n):
        raise ValueError(f"(q_iters + 1) * b_size must not exceed {min(m, n)}")
    rng = make_rng(rng)
    t0 = time.perf_counter()
    blocks = []
    q = np.zeros((m, 0))
    term = op.matmat(gaussian_matrix(n, b_size, rng))
    for j in range(q_iters + 1):
        if j:
            term = op.matmat(op.rmatmat(blocks[-1]))
        scale = math.sqrt(fro_norm_sq(term))
        for _ in range(2):
            term = term - q @ (q.T @ term)
        qj, _, s, _ = defl_qr(term, 1e-12 * scale)
        if s == 0:
            break
        blocks.append(qj)
        q = np.hstack(blocks)
    b = op.rmatmat(q).T
    report, a_norm_sq = _qb_report("rbl", op, q, b, t0)
    if q.shape[1] < (q_iters + 1) * b_size:
        report.status = RANK_DEFICIENT
        msg = f"Krylov basis collapsed to rank {q.shape[1]} < {(q_iters + 1) * b_size}"
        report.notes.append(msg)
        warnings.warn(msg, SketchWarning, stacklevel=2)
    return QBFactors(q, np.ascontiguousarray(b), report, a_norm_sq)


def rand_qb_ei(a, config=None, callback=None, track_true_error=False):
    """Blocked fixed-accuracy randQB with incremental error estimation.

    Each iteration draws ``block_size`` Gaussian columns, applies ``power``
    rounds of subspace iteration, reorthogonalizes against the current ``Q``
    and subtracts ``||B_k||_F^2`` from the running error ``E``. Stops when
    ``E <= stop_tol^2 ||A||_F^2`` (or ``E <= stop_tol^2`` with
    ``config.absolute_tol``) or when another block would exceed ``max_rank``.
    """
    config = config or SketchConfig()
    op = as_operator(a)
    m, n = op.shape
    b = config.block_size
    report = SketchReport(algorithm=f"qb-ei(p={config.power})")
    if not config.absolute_tol:
        config = _clamp_stop_tol(config, report)
    max_rank = min(config.max_rank if config.max_rank is not None else min(m, n), min(m, n))
    rng = make_rng(config.seed)
    a_norm_sq = op.fro_norm_sq()
    a_norm = math.sqrt(a_norm_sq)
    report.a_norm = a_norm
    q = np.zeros((m, 0))
    bmat = np.zeros((0, n))
    terms = []
    t0 = time.perf_counter()
    k = 0
    status = CONVERGED if a_norm_sq == 0 else None
    while status is None:
        if q.shape[1] + b > max_rank:
            status = BUDGET_EXHAUSTED
            break
        omega = gaussian_matrix(n, b, rng)
        qk, _ = qr_thin(op.matmat(omega) - q @ (bmat @ omega))
        for _ in range(config.power):
            qt, _ = qr_thin(op.rmatmat(qk) - bmat.T @ (q.T @ qk))
            qk, _ = qr_thin(op.matmat(qt) - q @ (bmat @ qt))
        qk, _ = qr_thin(qk - q @ (q.T @ qk))
        bk = op.rmatmat(qk).T
        q = np.hstack([q, qk])
        bmat = np.vstack([bmat, bk])
        terms.append(fro_norm_sq(bk))
        k += 1
        e = math.fsum([a_norm_sq] + [-t for t in terms])
        rec = IterationRecord(k=k, est_rel_err=math.sqrt(max(e, 0.0)) / a_norm,
                              rank=q.shape[1], elapsed_s=time.perf_counter() - t0)
        factors = QBFactors(q, bmat, report, a_norm_sq)
        if track_true_error:
            rec.true_rel_err = true_error(op, factors) / a_norm
        report.records.append(rec)
        if callback is not None:
            callback(factors, rec)
        if e <= stop_threshold(a_norm_sq, config.stop_tol, k, config.absolute_tol):
            status = CONVERGED
    report.status = status
    report.final_rank = q.shape[1]
    return QBFactors(q, bmat, report, a_norm_sq)
