import math
import warnings

import numpy as np
import pytest

import wavemetric as wm
from wavemetric.errors import ValidationError
from wavemetric.systems import CURL_GENERATORS, STRAIN_GENERATORS


UNIT_BOX_3 = wm.BoxDomain((0.0,) * 3, (1.0,) * 3)


# -- domains ----------------------------------------------------------------

def test_box_contains_strict():
    dom = wm.BoxDomain((0.0, 0.0), (1.0, 2.0))
    assert dom.contains([0.5, 1.0])
    assert not dom.contains([0.0, 1.0])
    assert dom.contains([0.0, 1.0], strict=False)
    assert not dom.contains([1.5, 1.0], strict=False)


def test_box_boundary_distance():
    dom = wm.BoxDomain((0.0, 0.0), (1.0, 2.0))
    assert dom.boundary_distance([0.3, 1.0]) == pytest.approx(0.3)
    assert dom.boundary_distance([0.5, 1.9]) == pytest.approx(0.1)


def test_unbounded_sides_do_not_count_as_boundary():
    dom = wm.BoxDomain((-2.0,), (2.0,), unbounded_lower=(True,), unbounded_upper=(True,))
    assert dom.boundary_distance([0.0]) == math.inf
    assert dom.contains([100.0])


def test_excluded_ball_is_boundary():
    dom = wm.BoxDomain(
        (-2.0,) * 2, (2.0,) * 2,
        unbounded_lower=(True, True), unbounded_upper=(True, True),
        excluded_ball=((0.0, 0.0), 0.5),
    )
    assert not dom.contains([0.1, 0.1])
    assert dom.contains([1.0, 0.0])
    assert dom.boundary_distance([1.0, 0.0]) == pytest.approx(0.5)


def test_infinite_bound_requires_flag():
    with pytest.raises(ValueError, match="unbounded flag"):
        wm.BoxDomain((0.0,), (math.inf,))


# -- field evaluation -------------------------------------------------------

def test_expr_field_grid_matches_pointwise():
    fld = wm.ExprMatrixField([["exp(x)", "x*y"], ["x*y", "1 + y^2"]])
    axes = (np.linspace(0.1, 0.9, 8), np.linspace(0.2, 0.8, 9))
    grid = fld.on_grid(axes)
    assert grid.shape == (8, 9, 2, 2)
    for i in (0, 3, 7):
        for j in (0, 4, 8):
            assert np.allclose(grid[i, j], fld(np.array([axes[0][i], axes[1][j]])))


def test_const_field_identity_flag():
    assert wm.ConstMatrixField(np.eye(3)).is_identity
    assert not wm.ConstMatrixField(2 * np.eye(3)).is_identity


def test_eval_coeffs_rejects_exterior_point():
    sysm = wm.telegraph()
    with pytest.raises(ValueError, match="strictly inside"):
        wm.eval_coeffs(sysm, [1.5])


def test_symbol_combines_directions():
    sysm = wm.maxwell_isotropic(domain=UNIT_BOX_3)
    xi = np.array([0.3, -1.2, 0.5])
    s = wm.symbol(sysm, [0.5, 0.5, 0.5], xi)
    manual = sum(c * A.mat for c, A in zip(xi, sysm.A))
    assert np.allclose(np.asarray(s), manual)


# -- built-in families ------------------------------------------------------

def test_telegraph_weight_and_coupling():
    sysm = wm.telegraph(L="2", C="8")
    E, (A1,), V = wm.eval_coeffs(sysm, [0.5])
    assert np.allclose(E, np.diag([2.0, 8.0]))
    assert np.allclose(A1, [[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(V, 0.0)


def test_telegraph_rejects_nonpositive_inductance():
    with pytest.raises(ValidationError, match="positive"):
        wm.telegraph(L="x - 0.5", C="1")


def test_curl_generators_trace_identity():
    for j in range(3):
        for l in range(3):
            t = np.trace(CURL_GENERATORS[j] @ CURL_GENERATORS[l].T)
            assert t == pytest.approx(2.0 if j == l else 0.0)


def test_strain_generators_shape_and_rank():
    for a in STRAIN_GENERATORS:
        assert a.shape == (6, 3)
        assert np.linalg.matrix_rank(a) == 3


def test_maxwell_weight_blocks():
    sysm = wm.maxwell_isotropic(eps="2", mu="3", domain=UNIT_BOX_3)
    E, A, V = wm.eval_coeffs(sysm, [0.5, 0.5, 0.5])
    assert np.allclose(E, np.diag([2.0] * 3 + [3.0] * 3))
    assert len(A) == 3
    for Aj in A:
        assert np.allclose(Aj, Aj.T)


def test_maxwell_d2_reduction_uses_first_two_generators():
    dom = wm.BoxDomain((0.0, 0.0), (1.0, 1.0))
    sysm = wm.maxwell_isotropic(domain=dom)
    assert len(sysm.A) == 2
    full = wm.maxwell_isotropic(domain=UNIT_BOX_3)
    for j in range(2):
        assert np.array_equal(sysm.A[j].mat, full.A[j].mat)


def test_maxwell_rejects_indefinite_permittivity():
    with pytest.raises(ValidationError, match="positive definite"):
        wm.maxwell_anisotropic(
            eps=[[1, 0, 0], [0, -1, 0], [0, 0, 1]],
            mu=[[1, 0, 0], [0, 1, 0], [0, 0, 1]],
            domain=UNIT_BOX_3,
        )


def test_elastic_isotropic_stiffness_structure():
    sysm = wm.elastic_isotropic(rho="2", K="3", mu="1.5", domain=UNIT_BOX_3)
    C = sysm.parts["stiffness"](np.array([0.5, 0.5, 0.5]))
    lam = 3.0 - 2.0 * 1.5 / 3.0
    assert np.allclose(np.diagonal(C)[:3], lam + 2 * 1.5)
    assert np.allclose(np.diagonal(C)[3:], 1.5)
    assert C[0, 1] == pytest.approx(lam)
    E, _, _ = wm.eval_coeffs(sysm, [0.5, 0.5, 0.5])
    # velocity block carries rho * C^{-1}; displacement-rate block is identity
    assert np.allclose(E[:6, :6], 2.0 * np.linalg.inv(C))
    assert np.allclose(E[6:, 6:], np.eye(3))


def test_elastic_21_entry_round_trip():
    K, mu = 2.0, 0.7
    dg, off = K + 4 * mu / 3, K - 2 * mu / 3
    tri = [dg, off, off, 0, 0, 0,
           dg, off, 0, 0, 0,
           dg, 0, 0, 0,
           mu, 0, 0,
           mu, 0,
           mu]
    direct = wm.elastic(rho=1.3, stiffness=tri, domain=UNIT_BOX_3)
    iso = wm.elastic_isotropic(rho="1.3", K=str(K), mu=str(mu), domain=UNIT_BOX_3)
    x = np.array([0.3, 0.6, 0.9])
    assert np.allclose(direct.E(x), iso.E(x))


def test_elastic_wrong_entry_count():
    with pytest.raises(ValueError, match="21"):
        wm.elastic(rho=1.0, stiffness=[1.0] * 20)


def test_dirac_structure():
    sysm = wm.dirac_free(radius=0.1)
    assert sysm.k == 4 and sysm.d == 3
    for A in sysm.A:
        a = A(np.zeros(3))
        assert np.allclose(a, a.conj().T)
        # alphas square to the identity and anticommute
        assert np.allclose(a @ a, np.eye(4))
    a1, a2 = sysm.A[0](np.zeros(3)), sysm.A[1](np.zeros(3))
    assert np.allclose(a1 @ a2 + a2 @ a1, 0.0)
    assert sysm.domain.excluded_ball[1] == 0.1


# -- canonical transform ----------------------------------------------------

def test_canonical_telegraph_constant():
    sysm = wm.canonicalize(wm.telegraph(L="4", C="1"))
    x = np.array([0.5])
    assert np.allclose(sysm.A[0](x), [[0.0, 0.5], [0.5, 0.0]])
    assert np.allclose(sysm.V(x), 0.0)
    assert np.allclose(np.asarray(sysm.E(x)), np.eye(2))


def test_canonical_telegraph_variable():
    dom = wm.BoxDomain((0.0,), (2.0,))
    sysm = wm.canonicalize(wm.telegraph(L="exp(2*x)", C="1", domain=dom))
    x = np.array([0.7])
    r = math.exp(-0.7)
    assert np.allclose(sysm.A[0](x), [[0.0, r], [r, 0.0]], atol=1e-12)
    V = sysm.V(x)
    assert abs(V[0, 1] - (-0.5j * r)) < 1e-9
    assert abs(V[1, 0] - (0.5j * r)) < 1e-9
    assert np.allclose(V, V.conj().T)
    assert np.allclose(np.diagonal(V), 0.0, atol=1e-9)


def test_canonical_gradient_term_vanishes_for_constant_weight():
    sysm = wm.maxwell_isotropic(eps="2", mu="5", domain=UNIT_BOX_3)
    v0 = wm.zero_order_term(sysm, [0.5, 0.5, 0.5])
    assert np.allclose(v0, 0.0, atol=1e-10)


def test_canonical_idempotent():
    sysm = wm.canonicalize(wm.telegraph(L="1 + x", C="1"))
    again = wm.canonicalize(sysm)
    assert again is sysm


def test_canonical_identity_weight_short_circuit():
    sysm = wm.dirac_free()
    can = wm.canonicalize(sysm)
    assert can.canonical
    assert can.A is sysm.A


def test_analytic_gradient_matches_finite_difference():
    # E = diag(exp(2x), 1) so d/dx E^{-1/2} = diag(-exp(-x), 0)
    dom = wm.BoxDomain((0.0,), (2.0,))
    base = wm.telegraph(L="exp(2*x)", C="1", domain=dom)
    grad = wm.FuncMatrixField(
        lambda x: np.diag([-math.exp(-x[0]), 0.0]), 2
    )
    from dataclasses import replace
    analytic = replace(base, E_grad=(grad,))
    x = np.array([0.9])
    vfd = wm.canonicalize(base).V(x)
    van = wm.canonicalize(analytic).V(x)
    assert np.allclose(vfd, van, atol=1e-9)


def test_gradient_step_shrinks_near_boundary():
    dom = wm.BoxDomain((0.0,), (1.0,))
    sysm = wm.telegraph(L="1 + x", C="1", domain=dom)
    can = wm.canonicalize(sysm)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        can.V(np.array([1e-7]))
    assert any("shrunk" in str(w.message) for w in rec)


def test_canonical_grid_matches_pointwise():
    dom = wm.BoxDomain((0.0,), (2.0,))
    can = wm.canonicalize(wm.telegraph(L="exp(2*x)", C="1 + 0.5*x", domain=dom))
    g = wm.Grid(dom, (16,))
    Vg = can.V.on_grid(g.axes)
    Ag = can.A[0].on_grid(g.axes)
    for i in (0, 7, 15):
        x = np.array([g.axes[0][i]])
        assert np.allclose(Vg[i], can.V(x), atol=1e-11)
        assert np.allclose(Ag[i], can.A[0](x), atol=1e-12)


# -- validation -------------------------------------------------------------

def test_validate_passes_builtins():
    for sysm in (
        wm.telegraph(L="1 + 0.5*sin(6*x)", C="2"),
        wm.maxwell_isotropic(eps="1 + x^2", domain=UNIT_BOX_3),
        wm.elastic_isotropic(domain=UNIT_BOX_3),
        wm.dirac_free(),
    ):
        rep = wm.validate_system(sysm, samples=32)
        assert rep.ok, rep.issues
        assert rep.min_eig_E > 0


def test_validate_flags_nonhermitian_with_entry_pair():
    bad = wm.CoefficientSystem(
        domain=wm.BoxDomain((0.0,), (1.0,)),
        k=2,
        E=wm.ConstMatrixField(np.eye(2)),
        A=(wm.FuncMatrixField(lambda x: np.array([[0.0, 1.0], [0.0, 0.0]]), 2),),
        V=wm.ConstMatrixField(np.zeros((2, 2))),
    )
    rep = wm.validate_system(bad, samples=8)
    assert not rep.ok
    assert "(1, 2)" in rep.issues[0]


def test_validate_flags_indefinite_weight():
    bad = wm.CoefficientSystem(
        domain=wm.BoxDomain((0.0,), (1.0,)),
        k=2,
        E=wm.ConstMatrixField(np.diag([1.0, -1.0])),
        A=(wm.ConstMatrixField(np.zeros((2, 2))),),
        V=wm.ConstMatrixField(np.zeros((2, 2))),
    )
    rep = wm.validate_system(bad, samples=8)
    assert not rep.ok
    assert any("positive definite" in s for s in rep.issues)


def test_validate_report_prints_summary():
    rep = wm.validate_system(wm.telegraph(), samples=8)
    text = str(rep)
    assert "PASS" in text and "8 sample points" in text


def test_system_dimension_mismatch():
    with pytest.raises(ValueError, match="one first-order coefficient field per axis"):
        wm.CoefficientSystem(
            domain=wm.BoxDomain((0.0, 0.0), (1.0, 1.0)),
            k=2,
            E=wm.ConstMatrixField(np.eye(2)),
            A=(wm.ConstMatrixField(np.zeros((2, 2))),),
            V=wm.ConstMatrixField(np.zeros((2, 2))),
        )
