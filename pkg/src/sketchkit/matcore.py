"""Dense linear-algebra primitives.

Dense matrices are plain ``numpy.ndarray`` objects of dtype float64. Random
streams are ``numpy.random.Generator`` instances; :func:`make_rng` builds one
from an integer seed.
"""
from typing import NamedTuple

import numpy as np
import scipy.linalg as la

EPS = 2.0**-52


def make_rng(seed=None):
    """Return a ``numpy.random.Generator`` seeded with ``seed``.

    Passing an existing generator returns it unchanged, so callers can thread
    one stream through several operations.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gaussian_matrix(rows, cols, rng):
    """Draw a ``rows x cols`` matrix of i.i.d. standard normal entries.

    The stream fills the matrix column by column, so drawing ``n x l`` at once
    gives the same matrix as drawing ``n x b`` blocks one after another and
    concatenating them horizontally.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"gaussian_matrix needs positive dimensions, got {rows}x{cols}")
    return np.ascontiguousarray(rng.standard_normal((cols, rows)).T)


def fro_norm_sq(x):
    """Squared Frobenius norm, accumulated by pairwise summation."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    return float(np.add.reduce(np.square(x).ravel()))


def orth_defect(q):
    """Return ``||q^T q - I||_2``; zero for a matrix with no columns."""
    q = np.asarray(q)
    if q.shape[1] == 0:
        return 0.0
    g = q.T @ q
    g[np.diag_indices_from(g)] -= 1.0
    return float(np.linalg.norm(g, 2))


def _fix_signs(q, r):
    # non-negative diagonal in r; zero diagonals keep their sign
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d, r * d[:, None]


def qr_thin(x):
    """Thin QR factorization ``x = q r`` with a non-negative diagonal in ``r``.

    Requires ``x.shape[0] >= x.shape[1]``. Rank-deficient input is accepted;
    ``r`` then carries tiny diagonal entries.
    """
    x = np.asarray(x, dtype=np.float64)
    m, n = x.shape
    if m < n:
        raise ValueError(f"qr_thin needs rows >= cols, got {m}x{n}")
    if n == 0:
        return np.zeros((m, 0)), np.zeros((0, 0))
    q, r = np.linalg.qr(x, mode="reduced")
    return _fix_signs(q, r)


class DeflQRResult(NamedTuple):
    q: np.ndarray
    r: np.ndarray
    s: int
    perm: np.ndarray


def defl_qr(x, delta):
    """Deflated QR: keep only the part of ``x`` whose pivots exceed ``delta``.

    Computes the column-pivoted factorization ``x[:, perm] = Q R`` (largest
    remaining column norm first) and truncates it at the largest ``s`` with
    ``|R[s-1, s-1]| >= delta``. Returns ``q = Q[:, :s]`` and ``r`` equal to the
    first ``s`` rows of ``R`` with the pivoting undone, so ``x ~= q @ r``.

    ``delta`` is an absolute threshold. ``s == 0`` is a valid outcome and
    yields empty factors.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    m, n = x.shape
    if m == 0 or n == 0:
        return DeflQRResult(np.zeros((m, 0)), np.zeros((0, n)), 0, np.arange(n))
    q_hat, r_hat, perm = la.qr(x, mode="economic", pivoting=True)
    q_hat, r_hat = _fix_signs(q_hat, r_hat)
    keep = np.flatnonzero(np.abs(np.diag(r_hat)) >= delta)
    s = int(keep[-1]) + 1 if keep.size else 0
    r = np.empty((s, n))
    r[:, perm] = r_hat[:s]
    return DeflQRResult(np.ascontiguousarray(q_hat[:, :s]), r, s, perm)
