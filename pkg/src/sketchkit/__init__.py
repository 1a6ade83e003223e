"""Fixed-accuracy low-rank sketching: ``A ~= U B V^T`` by randomized block Lanczos bidiagonalization."""
from .baselines import QBFactors, rand_block_lanczos, rand_qb, rand_qb_ei
from .diagnostics import (CostConstants, accuracy_bound, flops_model, lemma_theta,
                          local_orth_loss, min_reliable_tol)
from .driver import IterationRecord, SketchReport, UBVFactors, rand_ubv, true_error
from .estimator import RandQBSVD, RandUBVSVD
from .exceptions import (BudgetExhausted, DegenerateInputError, IngestionError, SketchError,
                         SketchWarning)
from .lanczos import BlockBidiagonal, SketchConfig
from .matcore import defl_qr, qr_thin
from .postproc import TruncatedSVD, truncated_svd
from .sparsemat import SparseMatrix, from_triplets, spmm, spmm_t

__version__ = "0.1.0"

__all__ = [
    "BlockBidiagonal", "BudgetExhausted", "CostConstants", "DegenerateInputError",
    "IngestionError", "IterationRecord", "QBFactors", "RandQBSVD", "RandUBVSVD",
    "SketchConfig", "SketchError", "SketchReport", "SketchWarning", "SparseMatrix",
    "TruncatedSVD", "UBVFactors", "accuracy_bound", "defl_qr", "flops_model", "from_triplets",
    "lemma_theta", "local_orth_loss", "min_reliable_tol", "qr_thin", "rand_block_lanczos",
    "rand_qb", "rand_qb_ei", "rand_ubv", "spmm", "spmm_t", "true_error", "truncated_svd",
]
