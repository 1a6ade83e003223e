"""Numerical checks for the error estimate, plus the flop-count models.

These are the oracles used by the test suite: local loss of orthogonality of
``U``, the relative perturbation of ``||U B||_F`` it induces, the a-posteriori
bound on the true error, the cancellation floor of the estimator, and the
approximate operation counts of each algorithm.
"""
import math
from dataclasses import dataclass

import numpy as np

from .matcore import EPS, fro_norm_sq


@dataclass(frozen=True)
class CostConstants:
    c_mul: float = 1.0
    c_qr: float = 1.0
    c_qrcp: float = 1.0

    def __post_init__(self):
        if min(self.c_mul, self.c_qr, self.c_qrcp) <= 0:
            raise ValueError("cost constants must be positive")


def _norm2(x):
    return float(np.linalg.norm(x, 2)) if x.size else 0.0


def local_orth_loss(u_blocks):
    """Local loss of orthogonality of ``[U_1, ..., U_k]``.

    The maximum of ``||U_i^T U_i - I||_2`` over all blocks and of
    ``||U_{i-1}^T U_i||_2`` over adjacent pairs. Blocks far apart in the
    sequence are allowed to lose orthogonality without affecting this value.
    """
    if not u_blocks:
        raise ValueError("need at least one block")
    eps = 0.0
    prev = None
    for u in u_blocks:
        g = u.T @ u
        g[np.diag_indices_from(g)] -= 1.0
        eps = max(eps, _norm2(g))
        if prev is not None:
            eps = max(eps, _norm2(prev.T @ u))
        prev = u
    return eps


def lemma_theta(u_blocks, b):
    """Relative change ``theta`` in ``||U B||_F^2 = (1 + theta) ||B||_F^2``.

    ``b`` is a :class:`~sketchkit.lanczos.BlockBidiagonal` or a dense matrix whose
    rows are partitioned conformally with ``u_blocks``. For a block upper
    bidiagonal ``b``, ``|theta| <= 2 * local_orth_loss(u_blocks)``.
    """
    dense = b.toarray() if hasattr(b, "toarray") else np.asarray(b, dtype=np.float64)
    u = np.hstack(u_blocks)
    if u.shape[1] != dense.shape[0]:
        raise ValueError(f"U has {u.shape[1]} columns but B has {dense.shape[0]} rows")
    b_sq = fro_norm_sq(dense)
    if b_sq == 0:
        raise ZeroDivisionError("theta is undefined for B = 0")
    return fro_norm_sq(u @ dense) / b_sq - 1.0


def accuracy_bound(estimate_sq, eps_local, delta, defl_count, a_norm):
    """Upper bound on the true squared error given the estimate ``E``.

    ``E + 4 eps ||A||^2 + 2 delta sqrt(d) (1 + 2 eps) ||A||`` where ``eps`` is the
    local loss of orthogonality of ``U`` and ``d`` the number of deflated
    ``U`` columns.
    """
    if min(estimate_sq, eps_local, delta, defl_count, a_norm) < 0:
        raise ValueError("all inputs must be non-negative")
    return (estimate_sq + 4.0 * eps_local * a_norm**2
            + 2.0 * delta * math.sqrt(defl_count) * (1.0 + 2.0 * eps_local) * a_norm)


def min_reliable_tol(a_norm, gamma=1.0):
    """Smallest absolute error the subtraction estimate resolves to relative accuracy ``gamma``."""
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    return math.sqrt(4.0 * EPS / gamma) * a_norm


def flops_model(alg, m, n, ell, t, p=0, constants=CostConstants()):
    """Approximate cost of ``t`` iterations reaching rank ``ell = t * b``.

    ``alg`` is one of ``"randqb"``, ``"randqb_ei"``, ``"bgkl"``, ``"randubv"``.
    The QR terms use ``c_qr`` throughout, matching the published formulas.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    cm, cq = constants.c_mul, constants.c_qr
    if alg == "randqb":
        return 2 * (p + 1) * cm * m * n * ell + cq * m * ell**2
    if alg == "randqb_ei":
        base = 2 * cm * m * n * ell + 0.5 * cm * (3 * m + n) * ell**2 + (2 / t) * cq * m * ell**2
        power = 2 * cm * m * n * ell + cm * (m + n) * ell**2 + (1 / t) * cq * (m + n) * ell**2
        return base + p * power
    if alg == "bgkl":
        return (2 * cm * m * n * ell + (1 / (2 * t)) * cm * (m + n) * ell**2
                + (1 / t) * cq * (m + n) * ell**2)
    if alg == "randubv":
        return (2 * cm * m * n * ell + cm * n * ell**2 + (1 / (2 * t)) * cm * (m + n) * ell**2
                + (1 / t) * cq * (m + n) * ell**2)
    raise ValueError(f"unknown algorithm {alg!r}")
