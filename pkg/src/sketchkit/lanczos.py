"""Block Lanczos bidiagonalization with one-sided reorthogonalization.

The recurrence builds ``A V_(k) ~= U_(k) B_k'`` and ``A^T U_(k) ~= V_(k+1) B_k^T``
one block at a time. Only ``V`` is reorthogonalized; ``U`` is left to drift.
Rank-deficient blocks are deflated by :func:`~sketchkit.matcore.defl_qr`, and
deflated ``V`` directions are replaced by fresh Gaussian ones so each ``V``
block keeps ``block_size`` columns.
"""
import copy
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._operator import as_operator
from .exceptions import BudgetExhausted, DegenerateInputError, SketchError, SketchWarning
from .matcore import EPS, defl_qr, fro_norm_sq, gaussian_matrix, make_rng, qr_thin

# A single classical Gram-Schmidt pass is followed by a second one whenever the
# new block's inner products with V exceed this (Frobenius) level.
AUTO_PASS_TRIGGER = 1e-12
_AUGMENT_REDRAWS = 2


@dataclass
class SketchConfig:
    """Parameters shared by the Lanczos driver and the subspace-iteration baselines.

    Parameters
    ----------
    block_size : int
        Number of columns added to ``V`` (or ``Q``) per iteration.
    tol : float
        Target relative Frobenius error used when truncating the factorization.
    stop_tol : float, optional
        Relative error at which iteration stops. Defaults to ``tol``; setting it
        slightly below ``tol`` buys a smaller truncated rank.
    defl_tol : float, optional
        Absolute deflation threshold. Defaults to
        ``1e-12 * sqrt(||A||_1 * ||A||_inf)``.
    max_rank : int, optional
        Cap on the rank of the sketch: columns of ``U`` (``Q`` for the
        baselines). ``V`` runs one block ahead and may hold ``block_size``
        more. Defaults to ``min(m, n)``.
    seed : int or numpy.random.Generator, optional
    augment : bool
        Replace deflated ``V`` directions with fresh random ones.
    reorth_passes : {1, 2}
        Gram-Schmidt passes used to reorthogonalize each new ``V`` block.
    power : int
        Power-iteration count for the subspace-iteration baselines.
    absolute_tol : bool
        Interpret ``stop_tol`` as an absolute error (baselines only).
    """

    block_size: int = 10
    tol: float = 0.1
    stop_tol: float | None = None
    defl_tol: float | None = None
    max_rank: int | None = None
    seed: object = None
    augment: bool = True
    reorth_passes: int = 1
    power: int = 0
    absolute_tol: bool = False

    def __post_init__(self):
        if int(self.block_size) != self.block_size or self.block_size < 1:
            raise ValueError(f"block_size must be a positive integer, got {self.block_size}")
        self.block_size = int(self.block_size)
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.stop_tol is None:
            self.stop_tol = self.tol
        if not 0 < self.stop_tol <= self.tol:
            raise ValueError(f"stop_tol must lie in (0, tol], got {self.stop_tol} with tol={self.tol}")
        if self.defl_tol is not None and self.defl_tol < 0:
            raise ValueError("defl_tol must be non-negative")
        if self.max_rank is not None and self.max_rank < self.block_size:
            raise ValueError("max_rank must be at least block_size")
        if self.reorth_passes not in (1, 2):
            raise ValueError("reorth_passes must be 1 or 2")
        if self.power < 0:
            raise ValueError("power must be non-negative")


@dataclass
class BlockBidiagonal:
    """Block upper bidiagonal factor ``B``.

    Row block ``i`` has ``row_sizes[i]`` rows (the width of ``U_i``); column
    block ``j`` has ``col_sizes[j]`` columns (the width of ``V_j``). The diagonal
    block ``R_i`` sits at (row ``i``, column ``i``) and ``L_{i+1}`` at (row ``i``,
    column ``i+1``). After ``k`` steps there are ``k + 1`` column blocks.
    """

    block_cols: int
    diag_blocks: list = field(default_factory=list)
    super_blocks: list = field(default_factory=list)
    col_sizes: list = field(default_factory=list)

    @property
    def row_sizes(self):
        return [r.shape[0] for r in self.diag_blocks]

    @property
    def steps(self):
        return len(self.diag_blocks)

    @property
    def shape(self):
        return sum(self.row_sizes), sum(self.col_sizes)

    def fro_norm_sq(self):
        return math.fsum(fro_norm_sq(x) for x in self.diag_blocks + self.super_blocks)

    def toarray(self):
        out = np.zeros(self.shape)
        row_offsets = np.concatenate([[0], np.cumsum(self.row_sizes)]).astype(int)
        col_offsets = np.concatenate([[0], np.cumsum(self.col_sizes)]).astype(int)
        for i, (r, l) in enumerate(zip(self.diag_blocks, self.super_blocks)):
            r0, r1 = row_offsets[i], row_offsets[i + 1]
            out[r0:r1, col_offsets[i]:col_offsets[i + 1]] = r
            out[r0:r1, col_offsets[i + 1]:col_offsets[i + 2]] = l
        return out


@dataclass
class LanczosState:
    """Mutable state of the recurrence.

    ``e_terms`` records every ``||R_i||_F^2`` and ``||L_{i+1}||_F^2`` removed from
    ``||A||_F^2``; :attr:`e_acc` sums them with :func:`math.fsum` so the
    accumulator carries no rounding beyond that of the individual terms.
    """

    config: SketchConfig
    shape: tuple
    delta: float
    a_norm_sq: float
    max_rank: int
    rng: np.random.Generator
    b_factor: BlockBidiagonal
    u_blocks: list = field(default_factory=list)
    e_terms: list = field(default_factory=list)
    k: int = 0
    d: int = 0
    augmented_cols: int = 0
    v_buf: np.ndarray = None
    v_cols: int = 0

    @property
    def v_agg(self):
        return self.v_buf[:, :self.v_cols]

    @property
    def current_v_block(self):
        return self.v_buf[:, self.v_cols - self.b_factor.col_sizes[-1]:self.v_cols]

    @property
    def e_acc(self):
        return math.fsum([self.a_norm_sq] + [-t for t in self.e_terms])

    @property
    def rank(self):
        """Number of columns of ``U``."""
        return sum(self.b_factor.row_sizes)

    @property
    def stalled(self):
        """True when the newest ``V`` block is empty, so no step can make progress."""
        return self.b_factor.col_sizes[-1] == 0

    def snapshot(self):
        return copy.deepcopy(self)

    def _append_v(self, block):
        n, c = block.shape
        need = self.v_cols + c
        if need > self.v_buf.shape[1]:
            cap = max(need, min(2 * self.v_buf.shape[1], n))
            grown = np.empty((n, cap))
            grown[:, :self.v_cols] = self.v_agg
            self.v_buf = grown
        self.v_buf[:, self.v_cols:need] = block
        self.v_cols = need


def default_defl_tol(a):
    op = as_operator(a)
    return 1e-12 * math.sqrt(op.norm_1() * op.norm_inf())


def _project_out(v, w, passes):
    for _ in range(passes):
        w = w - v @ (v.T @ w)
    return w


def lanczos_init(a, config):
    """Start the recurrence from ``V_1 = qr(Omega)`` with ``Omega`` Gaussian ``n x b``.

    Warns when ``A`` has fewer rows than columns: the caller is expected to
    pass ``A^T`` in that case.
    """
    op = as_operator(a)
    m, n = op.shape
    b = config.block_size
    if b > n:
        raise ValueError(f"block_size {b} exceeds the number of columns {n}")
    if m < n:
        warnings.warn(f"matrix has fewer rows than columns ({m} < {n}); "
                      "consider factoring its transpose", SketchWarning, stacklevel=2)
    delta = config.defl_tol if config.defl_tol is not None else default_defl_tol(op)
    max_rank = min(config.max_rank if config.max_rank is not None else min(m, n), min(m, n))
    max_rank = max(max_rank, b)
    rng = make_rng(config.seed)
    v1, _ = qr_thin(gaussian_matrix(n, b, rng))
    state = LanczosState(
        config=config, shape=(m, n), delta=delta, a_norm_sq=op.fro_norm_sq(),
        max_rank=max_rank, rng=rng, b_factor=BlockBidiagonal(b),
        v_buf=np.empty((n, min(max_rank + b, n, 8 * b))),
    )
    state._append_v(v1)
    state.b_factor.col_sizes.append(b)
    return state


def _augment(state, cols):
    n = state.shape[1]
    if state.v_cols + cols > n:
        raise DegenerateInputError(f"cannot add {cols} directions orthogonal to {state.v_cols} in R^{n}")
    for _ in range(1 + _AUGMENT_REDRAWS):
        w = _project_out(state.v_agg, gaussian_matrix(n, cols, state.rng), 2)
        q, r = qr_thin(w)
        if np.min(np.abs(np.diag(r))) > 1e-8 * math.sqrt(n):
            return q
    raise DegenerateInputError("orthogonalized augmentation block is numerically rank deficient")


def lanczos_step(state, a):
    """Advance the recurrence by one block; ``state`` is updated in place and returned.

    Raises :class:`BudgetExhausted` if the step could push ``U`` past
    ``max_rank`` columns, and :class:`DegenerateInputError` if augmentation
    fails.
    """
    op = as_operator(a)
    cfg = state.config
    b = cfg.block_size
    if state.stalled:
        raise SketchError("no Krylov directions left; the recurrence has stalled")
    if state.rank + b > state.max_rank:
        raise BudgetExhausted(f"U already has {state.rank} of at most {state.max_rank} columns")
    bf = state.b_factor
    vk = state.current_v_block

    w = op.matmat(vk)
    if state.k > 0:
        w -= state.u_blocks[-1] @ bf.super_blocks[-1]
    u_k, r_k, s_u, _ = defl_qr(w, state.delta)
    state.u_blocks.append(u_k)
    bf.diag_blocks.append(r_k)
    state.e_terms.append(fro_norm_sq(r_k))
    state.d += vk.shape[1] - s_u

    v = state.v_agg
    wt = _project_out(v, op.rmatmat(u_k) - vk @ r_k.T, cfg.reorth_passes)
    v_next, lt, s, _ = defl_qr(wt, state.delta)
    if cfg.reorth_passes == 1 and s and np.linalg.norm(v.T @ v_next) > AUTO_PASS_TRIGGER:
        wt = _project_out(v, wt, 1)
        v_next, lt, s, _ = defl_qr(wt, state.delta)
    state._append_v(v_next)
    l_next = lt.T
    width = s
    # once V spans R^n there is nothing left to augment with
    extra = min(b - s, state.shape[1] - state.v_cols) if cfg.augment else 0
    if extra > 0:
        state._append_v(_augment(state, extra))
        l_next = np.hstack([l_next, np.zeros((s_u, extra))])
        state.augmented_cols += extra
        width = s + extra
    bf.super_blocks.append(l_next)
    bf.col_sizes.append(width)
    state.e_terms.append(fro_norm_sq(l_next))
    state.k += 1
    return state


def assemble_b(state):
    """Dense copy of the block bidiagonal factor."""
    return state.b_factor.toarray()


def residual_estimate(state):
    """Estimated ``||A - U B V^T||_F``, clamped at zero against cancellation."""
    return math.sqrt(max(state.e_acc, 0.0))


def stop_threshold(a_norm_sq, tol, steps, absolute=False):
    """Squared error below which iteration stops.

    Adds ``steps * eps * ||A||_F^2`` so that an estimate equal to the target up
    to accumulated rounding counts as reached.
    """
    target = tol * tol if absolute else tol * tol * a_norm_sq
    return target + steps * EPS * a_norm_sq
