import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchkit.matcore import (EPS, defl_qr, fro_norm_sq, gaussian_matrix, make_rng,
                               orth_defect, qr_thin)


def test_eps_is_double_precision_unit():
    assert EPS == np.finfo(np.float64).eps


def test_make_rng_passes_generators_through():
    g = np.random.default_rng(0)
    assert make_rng(g) is g
    assert make_rng(7).standard_normal() == np.random.default_rng(7).standard_normal()


def test_gaussian_blocks_concatenate_to_one_draw():
    whole = gaussian_matrix(30, 12, make_rng(4))
    rng = make_rng(4)
    parts = np.hstack([gaussian_matrix(30, 4, rng) for _ in range(3)])
    np.testing.assert_array_equal(whole, parts)


@pytest.mark.parametrize("shape", [(0, 3), (3, 0)])
def test_gaussian_rejects_empty(shape):
    with pytest.raises(ValueError):
        gaussian_matrix(*shape, make_rng(0))


def test_fro_norm_sq_small():
    assert fro_norm_sq(np.array([[3.0, 4.0], [0.0, 12.0]])) == 169.0
    assert fro_norm_sq(np.zeros((0, 4))) == 0.0


def test_qr_thin_hand_case():
    q, r = qr_thin(np.array([[3.0, 1.0], [4.0, 2.0], [0.0, 0.0]]))
    # column 1 has norm 5; second column's component along it is (3 + 8) / 5
    np.testing.assert_allclose(q[:, 0], [0.6, 0.8, 0.0], atol=1e-15)
    np.testing.assert_allclose(r, [[5.0, 2.2], [0.0, 0.4]], atol=1e-15)


def test_qr_thin_rejects_wide():
    with pytest.raises(ValueError):
        qr_thin(np.ones((2, 3)))


def test_qr_thin_nonnegative_diagonal(rng):
    x = rng.standard_normal((40, 7))
    q, r = qr_thin(x)
    assert np.all(np.diag(r) >= 0)
    assert orth_defect(q) < 1e-14
    np.testing.assert_allclose(q @ r, x, atol=1e-13)


def test_defl_qr_hand_case():
    # second column is twice the first; third is zero
    x = np.array([[3.0, 6.0, 0.0], [4.0, 8.0, 0.0]])
    res = defl_qr(x, 1e-8)
    assert res.s == 1
    assert res.perm[0] == 1
    np.testing.assert_allclose(res.q[:, 0], [0.6, 0.8])
    np.testing.assert_allclose(res.r, [[5.0, 10.0, 0.0]])


def test_defl_qr_full_rank_reconstructs(rng):
    x = rng.standard_normal((20, 5))
    res = defl_qr(x, 1e-10)
    assert res.s == 5
    np.testing.assert_allclose(res.q @ res.r, x, atol=1e-13)


def test_defl_qr_all_below_threshold():
    res = defl_qr(np.full((4, 2), 1e-14), 1e-8)
    assert res.s == 0
    assert res.q.shape == (4, 0) and res.r.shape == (0, 2)


def test_defl_qr_empty_and_negative_delta():
    assert defl_qr(np.zeros((5, 0)), 1e-8).s == 0
    with pytest.raises(ValueError):
        defl_qr(np.ones((2, 2)), -1.0)


def test_orth_defect_known_value():
    # two unit vectors at 60 degrees: Gram off-diagonal 1/2, spectral norm of [[0, .5], [.5, 0]]
    q = np.array([[1.0, 0.5], [0.0, np.sqrt(3) / 2]])
    assert orth_defect(q) == pytest.approx(0.5, abs=1e-15)
    assert orth_defect(np.zeros((3, 0))) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 30), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_qr_thin_orthonormal_property(m, n, seed):
    n = min(n, m)
    x = np.random.default_rng(seed).standard_normal((m, n))
    q, r = qr_thin(x)
    assert orth_defect(q) <= 10 * m * EPS
    np.testing.assert_allclose(q @ r, x, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-14, 1.0), st.floats(1e-14, 1.0))
def test_defl_qr_rank_monotone_in_delta(seed, d1, d2):
    g = np.random.default_rng(seed)
    # graded singular values so different thresholds cut at different places
    u, _ = np.linalg.qr(g.standard_normal((25, 8)))
    v, _ = np.linalg.qr(g.standard_normal((8, 8)))
    x = (u * np.logspace(0, -14, 8)) @ v.T
    lo, hi = sorted((d1, d2))
    assert defl_qr(x, lo).s >= defl_qr(x, hi).s
