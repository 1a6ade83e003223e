"""scikit-learn compatible truncated-SVD transformers backed by the sketching algorithms.

Both estimators pick the smallest rank whose truncated SVD reaches relative
Frobenius error ``tol`` on the training matrix, so ``n_components_`` is an
outcome of ``fit`` rather than a parameter.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted, validate_data

from .baselines import rand_qb_ei
from .driver import rand_ubv
from .lanczos import SketchConfig
from .postproc import truncated_svd


def _seed(random_state):
    if random_state is None or isinstance(random_state, (int, np.integer, np.random.Generator)):
        return random_state
    return int(check_random_state(random_state).randint(2**31 - 1))


class _SketchSVD(TransformerMixin, BaseEstimator):

    def _sketch(self, a, config):
        raise NotImplementedError

    def _config(self, a):
        block = min(self.block_size, a.shape[1])
        max_rank = self.max_rank
        if max_rank is not None:
            max_rank = max(max_rank, block)
        return SketchConfig(
            block_size=block, tol=self.tol, stop_tol=self.stop_tol, max_rank=max_rank,
            seed=_seed(self.random_state), **self._extra_config(),
        )

    def _extra_config(self):
        return {}

    def fit(self, X, y=None):
        self._fit(X)
        return self

    def fit_transform(self, X, y=None):
        return self._fit(X)

    def _fit(self, X):
        X = validate_data(self, X, accept_sparse=["csr", "csc"], dtype=np.float64)
        # factor the orientation with more rows; results are mapped back below
        transposed = X.shape[0] < X.shape[1]
        a = X.T if transposed else X
        factors = self._sketch(a, self._config(a))
        svd = truncated_svd(factors, self.tol if self.truncate else None)
        left, right = (svd.v, svd.u) if transposed else (svd.u, svd.v)
        self.components_ = np.ascontiguousarray(right.T)
        self.singular_values_ = svd.s
        self.n_components_ = svd.rank
        self.report_ = factors.report
        self.converged_ = factors.report.converged
        self.transposed_ = transposed
        self.estimated_error_ = svd.est_rel_err
        return left * svd.s

    def transform(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, accept_sparse=["csr", "csc"], dtype=np.float64, reset=False)
        return np.asarray(X @ self.components_.T)

    def inverse_transform(self, X):
        check_is_fitted(self)
        return np.asarray(X) @ self.components_


class RandUBVSVD(_SketchSVD):
    """Truncated SVD to a prescribed relative accuracy via randomized block Lanczos.

    Parameters
    ----------
    tol : float, default=0.1
        Relative Frobenius error of the returned truncation.
    stop_tol : float, optional
        Relative error at which the Lanczos iteration stops; defaults to
        ``tol``. A value slightly below ``tol`` (e.g. ``0.9 * tol``) usually
        gives a noticeably smaller ``n_components_``.
    block_size : int, default=10
    defl_tol : float, optional
        Absolute deflation threshold; see :class:`~sketchkit.lanczos.SketchConfig`.
    max_rank : int, optional
        Cap on the sketch size.
    augment : bool, default=True
    reorth_passes : {1, 2}, default=1
    truncate : bool, default=True
        If False keep every singular triplet of the sketch.
    random_state : int, Generator, RandomState or None

    Attributes
    ----------
    components_ : ndarray of shape (n_components_, n_features)
    singular_values_ : ndarray of shape (n_components_,)
    n_components_ : int
    report_ : SketchReport
    converged_ : bool
    estimated_error_ : float
        Relative error of the truncation predicted by the sketch.
    """

    def __init__(self, tol=0.1, stop_tol=None, block_size=10, defl_tol=None, max_rank=None,
                 augment=True, reorth_passes=1, truncate=True, random_state=None):
        self.tol = tol
        self.stop_tol = stop_tol
        self.block_size = block_size
        self.defl_tol = defl_tol
        self.max_rank = max_rank
        self.augment = augment
        self.reorth_passes = reorth_passes
        self.truncate = truncate
        self.random_state = random_state

    def _extra_config(self):
        return {"defl_tol": self.defl_tol, "augment": self.augment,
                "reorth_passes": self.reorth_passes}

    def _sketch(self, a, config):
        return rand_ubv(a, config)


class RandQBSVD(_SketchSVD):
    """Truncated SVD to a prescribed relative accuracy via blocked randQB with power iteration.

    Same interface as :class:`RandUBVSVD`; ``power`` sets the number of
    ``A A^T`` applications per block.
    """

    def __init__(self, tol=0.1, stop_tol=None, block_size=10, power=0, max_rank=None,
                 truncate=True, random_state=None):
        self.tol = tol
        self.stop_tol = stop_tol
        self.block_size = block_size
        self.power = power
        self.max_rank = max_rank
        self.truncate = truncate
        self.random_state = random_state

    def _extra_config(self):
        return {"power": self.power}

    def _sketch(self, a, config):
        return rand_qb_ei(a, config)
