"""Uniform access to dense and sparse inputs: products, norms and column slices."""
import numpy as np
import scipy.sparse as sp

from .matcore import fro_norm_sq
from .sparsemat import SparseMatrix, spmm, spmm_t


class MatrixOperator:
    """Wraps a dense array, a :class:`SparseMatrix` or a scipy sparse matrix."""

    def __init__(self, a):
        if isinstance(a, MatrixOperator):
            a = a.a
        if sp.issparse(a):
            a = SparseMatrix.from_scipy(a)
        if isinstance(a, SparseMatrix):
            self.a = a
            self.is_sparse = True
        else:
            a = np.asarray(a, dtype=np.float64)
            if a.ndim != 2:
                raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
            self.a = a
            self.is_sparse = False
        self.shape = tuple(self.a.shape)

    def matmat(self, x):
        if self.is_sparse:
            return spmm(self.a, x)
        return self.a @ x

    def rmatmat(self, x):
        if self.is_sparse:
            return spmm_t(self.a, x)
        return self.a.T @ x

    def fro_norm_sq(self):
        if self.is_sparse:
            return fro_norm_sq(self.a.values)
        return fro_norm_sq(self.a)

    def norm_1(self):
        """Largest absolute column sum."""
        if self.is_sparse:
            s = abs(self.a.to_scipy()).sum(axis=0)
        else:
            s = np.abs(self.a).sum(axis=0)
        return float(np.max(s)) if np.size(s) else 0.0

    def norm_inf(self):
        """Largest absolute row sum."""
        if self.is_sparse:
            s = abs(self.a.to_scipy()).sum(axis=1)
        else:
            s = np.abs(self.a).sum(axis=1)
        return float(np.max(s)) if np.size(s) else 0.0

    def column_slice(self, start, stop):
        """Dense copy of columns ``start:stop``."""
        if self.is_sparse:
            return self.a.to_scipy()[:, start:stop].toarray()
        return self.a[:, start:stop]

    def toarray(self):
        return self.a.toarray() if self.is_sparse else self.a


def as_operator(a):
    return a if isinstance(a, MatrixOperator) else MatrixOperator(a)
