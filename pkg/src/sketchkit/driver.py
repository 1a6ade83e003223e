"""Fixed-accuracy driver: run the Lanczos recurrence until the error estimate is small enough."""
import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from ._operator import as_operator
from .diagnostics import local_orth_loss, min_reliable_tol
from .exceptions import BudgetExhausted, SketchWarning
from .lanczos import (BlockBidiagonal, SketchConfig, lanczos_init, lanczos_step,
                      residual_estimate, stop_threshold)
from .matcore import fro_norm_sq

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"
STALLED = "stalled"


@dataclass
class IterationRecord:
    k: int
    est_rel_err: float
    true_rel_err: float | None = None
    eps_local: float | None = None
    deflations: int = 0
    augmented_cols: int = 0
    rank: int = 0
    elapsed_s: float = 0.0


@dataclass
class SketchReport:
    """Per-iteration telemetry of one factorization."""

    algorithm: str = "ubv"
    records: list = field(default_factory=list)
    status: str = CONVERGED
    final_rank: int = 0
    a_norm: float = 0.0
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.records)

    @property
    def converged(self):
        return self.status == CONVERGED

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["records"] = [IterationRecord(**r) for r in d.get("records", [])]
        return cls(**d)


@dataclass
class UBVFactors:
    """``A ~= u @ b.toarray() @ v.T`` with the run's report attached."""

    u: np.ndarray
    b: BlockBidiagonal
    v: np.ndarray
    report: SketchReport
    a_norm_sq: float = 0.0
    delta: float = 0.0
    deflations: int = 0

    def b_dense(self):
        return self.b.toarray()

    @property
    def rank(self):
        return self.u.shape[1]


def true_error(a, f, chunk=512):
    """Exact ``||A - U B V^T||_F`` by explicit residual formation, ``chunk`` columns at a time.

    ``f`` may be :class:`UBVFactors` or a :class:`~sketchkit.baselines.QBFactors`.
    Intended for tests and benchmarks: the cost is ``O(m n rank)``.
    """
    op = as_operator(a)
    m, n = op.shape
    left, right = _left_right(f)
    if left.shape[0] != m or right.shape[1] != n:
        raise ValueError(f"factors of shape {left.shape[0]}x{right.shape[1]} do not match A {op.shape}")
    total = []
    for j in range(0, n, chunk):
        block = op.column_slice(j, min(j + chunk, n)) - left @ right[:, j:j + chunk]
        total.append(fro_norm_sq(block))
    return math.sqrt(math.fsum(total))


def _left_right(f):
    # factor pair (left, right) with A ~= left @ right
    if isinstance(f, UBVFactors):
        return f.u, f.b_dense() @ f.v.T
    return f.q, f.b


def _clamp_stop_tol(config, report):
    floor = min_reliable_tol(1.0)
    if config.stop_tol < floor:
        msg = f"stop_tol {config.stop_tol:.3g} is below the estimator floor {floor:.3g}; clamped"
        warnings.warn(msg, SketchWarning, stacklevel=3)
        report.notes.append(msg)
        config = SketchConfig(**{**config.__dict__, "stop_tol": floor, "tol": max(config.tol, floor)})
    return config


def rand_ubv(a, config=None, callback=None, track_true_error=False):
    """Fixed-accuracy ``U B V^T`` factorization by randomized block Lanczos.

    Iterates until the estimated relative error drops to ``config.stop_tol``
    or ``U`` would exceed ``config.max_rank`` columns.

    Parameters
    ----------
    a : ndarray, SparseMatrix or scipy sparse matrix
        Matrix to factor, ideally with at least as many rows as columns.
    config : SketchConfig
    callback : callable, optional
        Called as ``callback(state, record)`` after every iteration, in order.
    track_true_error : bool
        Compute the exact residual every iteration (expensive).

    Returns
    -------
    UBVFactors
        ``report.status`` is ``"converged"``, ``"budget_exhausted"`` (rank cap
        hit) or ``"stalled"`` (every ``V`` direction deflated and augmentation
        disabled). Partial factors are valid in every case.
    """
    config = config or SketchConfig()
    op = as_operator(a)
    m, n = op.shape
    if m == 0 or n == 0:
        raise ValueError("cannot factor an empty matrix")
    report = SketchReport(algorithm="ubv")
    config = _clamp_stop_tol(config, report)
    a_norm_sq = op.fro_norm_sq()
    a_norm = math.sqrt(a_norm_sq)
    report.a_norm = a_norm
    if a_norm_sq == 0:
        b = BlockBidiagonal(config.block_size, col_sizes=[0])
        report.status = CONVERGED
        return UBVFactors(np.zeros((m, 0)), b, np.zeros((n, 0)), report)

    t0 = time.perf_counter()
    state = lanczos_init(op, config)
    eps_local = 0.0
    status = None
    while status is None:
        if state.stalled:
            status = STALLED
            break
        try:
            lanczos_step(state, op)
        except BudgetExhausted:
            status = BUDGET_EXHAUSTED
            break
        blocks = state.u_blocks[-2:]
        eps_local = max(eps_local, local_orth_loss(blocks))
        rec = IterationRecord(
            k=state.k,
            est_rel_err=residual_estimate(state) / a_norm,
            eps_local=eps_local,
            deflations=state.d,
            augmented_cols=state.augmented_cols,
            rank=state.rank,
            elapsed_s=time.perf_counter() - t0,
        )
        if track_true_error:
            rec.true_rel_err = true_error(op, _factors(state, report)) / a_norm
        report.records.append(rec)
        if callback is not None:
            callback(state, rec)
        if state.e_acc <= stop_threshold(a_norm_sq, config.stop_tol, state.k):
            status = CONVERGED
    report.status = status
    return _factors(state, report)


def _factors(state, report):
    u = np.hstack(state.u_blocks) if state.u_blocks else np.zeros((state.shape[0], 0))
    report.final_rank = u.shape[1]
    return UBVFactors(u=u, b=state.b_factor, v=state.v_agg.copy(), report=report,
                      a_norm_sq=state.a_norm_sq, delta=state.delta, deflations=state.d)
