import numpy as np
import pytest

from wavemetric.errors import MatrixError, SingularMatrixError
from wavemetric.matkernel import (
    HermitianMatrix,
    SPDMatrix,
    eig_herm,
    op_norm,
    spd_inv_sqrt,
    spd_sqrt,
)


def random_hermitian(rng, k, complex_=True):
    a = rng.standard_normal((k, k))
    if complex_:
        a = a + 1j * rng.standard_normal((k, k))
    return 0.5 * (a + a.conj().T)


def random_spd(rng, k):
    a = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    return a @ a.conj().T + 0.1 * np.eye(k)


def test_hermitian_accepts_and_symmetrizes():
    h = HermitianMatrix([[2.0, 1.0], [1.0, 3.0]])
    assert h.k == 2
    assert np.array_equal(np.asarray(h), [[2.0, 1.0], [1.0, 3.0]])


def test_hermitian_rejects_nonhermitian():
    with pytest.raises(MatrixError):
        HermitianMatrix([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(MatrixError):
        HermitianMatrix([[1.0, 1j], [1j, 1.0]])


def test_hermitian_rejects_nonsquare():
    with pytest.raises(MatrixError):
        HermitianMatrix(np.zeros((2, 3)))


def test_spd_rejects_indefinite():
    with pytest.raises(MatrixError):
        SPDMatrix([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(MatrixError):
        SPDMatrix(np.zeros((3, 3)))


def test_eig_sorted_and_consistent():
    rng = np.random.default_rng(11)
    for k in range(1, 10):
        h = HermitianMatrix(random_hermitian(rng, k))
        w, u = eig_herm(h)
        assert np.all(np.diff(w) >= 0)
        recon = (u * w) @ u.conj().T
        assert np.allclose(recon, np.asarray(h), atol=1e-12)


def test_eig_unitarity():
    rng = np.random.default_rng(12)
    for k in (2, 5, 9):
        for _ in range(25):
            _, u = eig_herm(HermitianMatrix(random_hermitian(rng, k)))
            assert np.linalg.norm(u.conj().T @ u - np.eye(k)) < 1e-12


def test_op_norm_matches_numpy():
    rng = np.random.default_rng(13)
    for _ in range(40):
        a = random_hermitian(rng, 6)
        assert op_norm(HermitianMatrix(a)) == pytest.approx(
            np.linalg.norm(a, 2), rel=1e-12
        )


def test_sqrt_round_trip():
    rng = np.random.default_rng(14)
    for k in range(1, 10):
        s = random_spd(rng, k)
        r = spd_sqrt(SPDMatrix(s))
        assert np.linalg.norm(r @ r - s) / np.linalg.norm(s) < 1e-11


def test_inv_sqrt_round_trip():
    rng = np.random.default_rng(15)
    for k in (1, 3, 6, 9):
        s = random_spd(rng, k)
        r = spd_inv_sqrt(SPDMatrix(s))
        assert np.linalg.norm(r @ s @ r - np.eye(k)) < 1e-10


def test_inv_sqrt_accepts_raw_array():
    s = np.diag([4.0, 9.0])
    r = spd_inv_sqrt(s)
    assert np.allclose(r, np.diag([0.5, 1.0 / 3.0]))


def test_singular_detection():
    s = np.diag([1.0, 1e-16])
    with pytest.raises(SingularMatrixError, match="singular"):
        spd_inv_sqrt(s, where=" (weight at x=0)")
    try:
        spd_inv_sqrt(s, where=" (weight at x=0)")
    except SingularMatrixError as err:
        assert "weight at x=0" in str(err)


def test_well_conditioned_near_threshold_passes():
    s = np.diag([1.0, 1e-10])
    r = spd_inv_sqrt(s)
    assert np.isfinite(r).all()


def test_float_real_path_stays_real():
    h = HermitianMatrix(np.diag([1.0, 2.0]))
    w, u = eig_herm(h)
    assert w.dtype == np.float64
    assert not np.iscomplexobj(u)
