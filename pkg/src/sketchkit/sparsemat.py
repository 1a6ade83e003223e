"""Compressed sparse row matrices and the two products the Lanczos recurrence uses."""
import numpy as np
import scipy.sparse as sp


class SparseMatrix:
    """Canonical CSR matrix: sorted column indices per row, no duplicates.

    The index arrays are shared with a ``scipy.sparse.csr_array`` that does the
    arithmetic. ``spmm_t`` multiplies by the transpose through a CSC view of
    the same arrays, so the transpose is never stored.
    """

    def __init__(self, rows, cols, row_offsets, col_indices, values):
        row_offsets = np.asarray(row_offsets, dtype=np.int64)
        col_indices = np.asarray(col_indices, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if row_offsets.shape != (rows + 1,):
            raise ValueError("row_offsets must have length rows + 1")
        if row_offsets[0] != 0 or np.any(np.diff(row_offsets) < 0):
            raise ValueError("row_offsets must start at 0 and be non-decreasing")
        nnz = int(row_offsets[-1])
        if col_indices.shape != (nnz,) or values.shape != (nnz,):
            raise ValueError("col_indices and values must have length nnz")
        if nnz and (col_indices.min() < 0 or col_indices.max() >= cols):
            raise ValueError("column index out of range")
        if nnz > 1:
            row_start = np.zeros(nnz, dtype=bool)
            row_start[row_offsets[:-1][row_offsets[:-1] < nnz]] = True
            bad = np.flatnonzero((np.diff(col_indices) <= 0) & ~row_start[1:])
            if bad.size:
                row = int(np.searchsorted(row_offsets, bad[0], side="right")) - 1
                raise ValueError(f"row {row} is not in canonical form")
        self._csr = sp.csr_array((values, col_indices, row_offsets), shape=(rows, cols))

    @classmethod
    def from_scipy(cls, a):
        a = sp.csr_array(a, dtype=np.float64)
        a.sum_duplicates()
        a.sort_indices()
        return cls(a.shape[0], a.shape[1], a.indptr, a.indices, a.data)

    @property
    def shape(self):
        return self._csr.shape

    @property
    def rows(self):
        return self._csr.shape[0]

    @property
    def cols(self):
        return self._csr.shape[1]

    @property
    def nnz(self):
        return int(self._csr.indptr[-1])

    @property
    def row_offsets(self):
        return self._csr.indptr

    @property
    def col_indices(self):
        return self._csr.indices

    @property
    def values(self):
        return self._csr.data

    def to_scipy(self):
        return self._csr

    def toarray(self):
        return self._csr.toarray()

    def to_triplets(self):
        """Return ``(i, j, value)`` arrays in row-major canonical order."""
        counts = np.diff(self._csr.indptr)
        i = np.repeat(np.arange(self.rows), counts)
        return i, self._csr.indices.copy(), self._csr.data.copy()

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix) or self.shape != other.shape:
            return NotImplemented
        return (np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def from_triplets(rows, cols, triplets):
    """Build a canonical CSR matrix from ``(i, j, value)`` triplets.

    Indices are zero-based. Duplicate coordinates are summed.
    """
    triplets = list(triplets)
    for t in triplets:
        i, j, _ = t
        if not (0 <= i < rows):
            raise ValueError(f"row index out of range in triplet {t} for shape ({rows}, {cols})")
        if not (0 <= j < cols):
            raise ValueError(f"column index out of range in triplet {t} for shape ({rows}, {cols})")
    if triplets:
        i, j, v = (np.array(c) for c in zip(*triplets))
    else:
        i = j = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    coo = sp.coo_array((v.astype(np.float64), (i.astype(np.int64), j.astype(np.int64))),
                       shape=(rows, cols))
    return SparseMatrix.from_scipy(coo.tocsr())


def spmm(a, x):
    """Sparse-dense product ``a @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if a.cols != x.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {x.shape}")
    return np.asarray(a.to_scipy() @ x)


def spmm_t(a, x):
    """Sparse-dense product ``a.T @ x`` without materializing ``a.T``."""
    x = np.asarray(x, dtype=np.float64)
    if a.rows != x.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape}^T @ {x.shape}")
    return np.asarray(a.to_scipy().T @ x)
