"""Truncated SVD of ``A`` from a sketch: SVD of the small factor, rank selection, vector recovery."""
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import SketchWarning


def svd_small(b):
    """Thin SVD ``b = u_hat @ diag(sigma) @ v_hat.T`` with ``sigma`` non-increasing."""
    b = np.asarray(b, dtype=np.float64)
    if b.size == 0:
        raise ValueError("svd_small needs a non-empty matrix")
    u_hat, sigma, vt = np.linalg.svd(b, full_matrices=False)
    return u_hat, sigma, vt.T


def truncate_rank(sigma, a_norm_sq, tau_err):
    """Smallest ``r`` with ``a_norm_sq - sum(sigma[:r]**2) <= tau_err**2 * a_norm_sq``.

    Returns 0 only when ``a_norm_sq == 0``. If no prefix meets the bound the
    full length is returned and a :class:`SketchWarning` is issued.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if a_norm_sq == 0:
        return 0
    target = tau_err * tau_err * a_norm_sq
    captured = 0.0
    for r, s in enumerate(sigma, start=1):
        captured += s * s
        if a_norm_sq - captured <= target:
            return r
    warnings.warn(f"no truncation of the {sigma.size} computed singular values reaches "
                  f"relative error {tau_err}", SketchWarning, stacklevel=2)
    return int(sigma.size)


def recover_vectors(outer, inner_r):
    """Singular vectors of ``A`` from the sketch basis and the small SVD factor."""
    outer = np.asarray(outer)
    inner_r = np.asarray(inner_r)
    if outer.shape[1] != inner_r.shape[0]:
        raise ValueError(f"dimension mismatch: {outer.shape} @ {inner_r.shape}")
    return outer @ inner_r


@dataclass
class TruncatedSVD:
    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    rank: int
    est_rel_err: float


def truncated_svd(factors, tau_err):
    """Truncate a ``UBVFactors`` or ``QBFactors`` sketch to the smallest adequate rank.

    With ``tau_err=None`` every singular triplet of the sketch is kept.
    ``est_rel_err`` is the error predicted from ``||A||_F`` and the kept
    singular values; it assumes the sketch bases are orthonormal.
    """
    if hasattr(factors, "q"):
        left, small, right = factors.q, factors.b, None
    else:
        left, small, right = factors.u, factors.b_dense(), factors.v
    a_norm_sq = factors.a_norm_sq
    if small.size == 0:
        empty = np.zeros((left.shape[0], 0))
        n = small.shape[1] if right is None else right.shape[0]
        return TruncatedSVD(empty, np.zeros(0), np.zeros((n, 0)), 0, 0.0 if a_norm_sq == 0 else 1.0)
    u_hat, sigma, v_hat = svd_small(small)
    r = sigma.size if tau_err is None else truncate_rank(sigma, a_norm_sq, tau_err)
    u = recover_vectors(left, u_hat[:, :r])
    v = v_hat[:, :r] if right is None else recover_vectors(right, v_hat[:, :r])
    resid = max(a_norm_sq - float(np.sum(sigma[:r] ** 2)), 0.0)
    est = math.sqrt(resid / a_norm_sq) if a_norm_sq else 0.0
    return TruncatedSVD(u, sigma[:r].copy(), v, r, est)
