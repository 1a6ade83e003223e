"""Synthetic test matrices ``A = U diag(sigma) V^T`` with prescribed spectra."""
import math

import numpy as np

from .matcore import gaussian_matrix, make_rng, qr_thin


def spectrum(kind, n, *, alpha=2.0, rate=20.0, base_exp=-0.6, cluster=30):
    """Singular values ``sigma_1 >= ... >= sigma_n`` of a named decay profile.

    ``power``        sigma_j = j ** -alpha
    ``exponential``  sigma_j = exp(-j / rate)
    ``step``         sigma_j = 10 ** (base_exp * (ceil(j / cluster) - 1))
    """
    if n < 1:
        raise ValueError("n must be positive")
    j = np.arange(1, n + 1, dtype=np.float64)
    if kind == "power":
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        return j ** -alpha
    if kind in ("exponential", "exp"):
        if rate <= 0:
            raise ValueError("rate must be positive")
        return np.exp(-j / rate)
    if kind == "step":
        if base_exp >= 0 or cluster < 1 or int(cluster) != cluster:
            raise ValueError("step spectrum needs base_exp < 0 and a positive integer cluster")
        return 10.0 ** (base_exp * (np.ceil(j / cluster) - 1))
    raise ValueError(f"unknown spectrum kind {kind!r}")


def gen_svd_matrix(m, n, sigma, rng=None):
    """Dense ``m x n`` matrix with singular values ``sigma`` and Haar-like singular vectors.

    ``U`` and ``V`` come from thin QR of Gaussian matrices, ``U`` drawn first.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    r = sigma.size
    if r < 1 or r > min(m, n):
        raise ValueError(f"need 1 <= len(sigma) <= min(m, n) = {min(m, n)}, got {r}")
    if np.any(sigma < 0) or np.any(np.diff(sigma) > 0):
        raise ValueError("sigma must be non-negative and non-increasing")
    rng = make_rng(rng)
    u, _ = qr_thin(gaussian_matrix(m, r, rng))
    v, _ = qr_thin(gaussian_matrix(n, r, rng))
    return (u * sigma) @ v.T


def standard_matrix(index, size=500, rng=None):
    """Desk-scale analogs of the four standard test spectra (index 1 to 4)."""
    params = {
        1: ("power", {"alpha": 2.0}),
        2: ("power", {"alpha": 1.0}),
        3: ("exponential", {"rate": 20.0}),
        4: ("step", {"base_exp": -0.6, "cluster": 30}),
    }
    if index not in params:
        raise ValueError("index must be 1, 2, 3 or 4")
    kind, kw = params[index]
    return gen_svd_matrix(size, size, spectrum(kind, size, **kw), rng)


def optimal_rank(sigma, tau):
    """Smallest rank whose SVD truncation has relative Frobenius error at most ``tau``."""
    sq = np.asarray(sigma, dtype=np.float64) ** 2
    tails = np.concatenate([np.cumsum(sq[::-1])[::-1][1:], [0.0]])
    total = math.fsum(sq)
    hits = np.flatnonzero(tails <= tau * tau * total)
    return int(hits[0]) + 1 if hits.size else int(sq.size)
