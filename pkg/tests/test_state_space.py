import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affine_moments import models
from affine_moments.errors import StructuralError
from affine_moments.jumps import OneSidedExponential, PointMassMixture, ZeroMeasure
from affine_moments.levy import build_family
from affine_moments.state_space import (AffineParams, Canonical, MatrixAffineParams, MatrixCone,
                                        check_complex_assumption, embed_discounting, validate,
                                        validate_canonical, validate_matrix)


def test_canonical_space_invariants():
    with pytest.raises(StructuralError):
        Canonical(0, 0)
    with pytest.raises(StructuralError):
        Canonical(-1, 2)
    sp = Canonical(1, 2)
    assert sp.I == [0] and sp.J == [1, 2]
    assert sp.contains([0.0, -3.0, 1.0]) and not sp.contains([-1e-9, 0.0, 0.0])


def test_matrix_cone_needs_two_dimensions():
    with pytest.raises(StructuralError, match="Canonical"):
        MatrixCone(1)


def test_cir_passes():
    assert validate_canonical(models.cir(1.0, 0.02, 0.2)).passed


def test_negative_drift_violates_b_in_D():
    bad = models.cir().replace(b=np.array([-0.01]))
    rep = validate_canonical(bad)
    assert not rep.passed
    assert rep.identifiers == ["b_in_D"]
    assert rep.violations[0][1] == "b ∈ D"


def test_constant_diffusion_on_variance_coordinate():
    h = models.heston()
    a = np.zeros((2, 2))
    a[0, 0] = 0.01
    rep = validate(h.replace(a=a))
    assert "a_I_zero" in rep.identifiers


def test_dimension_mismatch_is_structural():
    with pytest.raises(StructuralError):
        AffineParams.build(1, 1, b=[0.1])
    with pytest.raises(StructuralError):
        AffineParams.build(1, 0, jumps_m=ZeroMeasure(2))


def test_wishart_drift_domination():
    assert validate_matrix(models.wishart(b=1.5 * np.eye(2))).passed
    rep = validate_matrix(models.wishart(b=0.5 * np.eye(2)))
    assert rep.identifiers == ["b_dominates_alpha"]


def test_degenerate_matrix_process_passes():
    assert validate_matrix(MatrixAffineParams.build(2)).passed


def test_reversing_drift_is_inward_pointing():
    # B(u) = -u: tr(ww^T (-vv^T)) = -<v, w>^2 = 0 on orthogonal pairs
    p = MatrixAffineParams.build(2, b=np.eye(2), M=-0.5 * np.eye(2))
    rep = validate_matrix(p)
    assert rep.passed
    assert abs(rep.details["inward_margin"]) < 1e-14


def test_matrix_commutator_drift_is_always_inward():
    # tr(ww^T (M vv^T + vv^T M^T)) = 2 (w^T M v) <v, w> vanishes for any M
    M = np.array([[0.3, 1.0], [-2.0, 0.1]])
    assert validate_matrix(models.wishart(M=M)).passed


def test_trace_coupled_drift_fails():
    # B(u) = -tr(u) I gives tr(x B(u)) = -tr(x) tr(u) < 0
    B = -np.einsum("ij,kl->ijkl", np.eye(2), np.eye(2))
    rep = validate_matrix(MatrixAffineParams.build(2, alpha=np.eye(2), b=2 * np.eye(2), B=B))
    assert rep.identifiers == ["B_inward"]


def test_complex_assumption():
    assert check_complex_assumption(models.heston())
    assert not check_complex_assumption(models.wishart(alpha=np.diag([1.0, 0.0]), b=np.eye(2)))
    assert check_complex_assumption(models.wishart(alpha=np.eye(2)))
    assert check_complex_assumption(MatrixAffineParams.build(2))


def test_embed_zero_rate_gives_constant_coordinate():
    p = models.heston()
    ext = embed_discounting(p, 0.0, [0.0, 0.0])
    assert ext.space == Canonical(1, 2)
    assert ext.b[-1] == 0 and all(b[-1] == 0 for b in ext.beta)
    fam = build_family(ext)
    e = np.array([0.0, 0.0, 1.3])
    assert fam.F(e) == 0 and np.all(fam.R(e) == 0)


def test_embed_cir_short_rate():
    ext = embed_discounting(models.cir(), 0.0, [1.0])
    np.testing.assert_array_equal(ext.beta[0], [-1.0, 1.0])
    np.testing.assert_array_equal(ext.beta[1], [0.0, 0.0])
    assert validate(ext).passed


@pytest.mark.parametrize("name", models.CANONICAL)
def test_embedding_preserves_admissibility(name):
    p = models.ZOO[name]()
    ext = embed_discounting(p, 0.02, np.linspace(0.1, 0.5, p.d))
    assert validate(ext).passed
    assert not np.any(ext.alpha[-1]) and not np.any(ext.beta[-1]) and ext.mu[-1].is_zero
    assert not np.any(ext.a[-1]) and not np.any(ext.a[:, -1])


@pytest.mark.parametrize("name", models.CANONICAL)
@given(c=st.floats(1e-3, 1e3))
@settings(max_examples=20, deadline=None)
def test_scaling_keeps_admissibility(name, c):
    assert validate(models.ZOO[name]().scaled(c)).passed


@given(perm_seed=st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_atom_order_is_irrelevant(perm_seed):
    locs = np.array([[0.5, 0.1], [2.0, -1.0], [0.1, 0.3], [1.5, 2.0]])
    w = np.array([0.3, 0.1, 2.0, 0.7])
    perm = np.random.default_rng(perm_seed).permutation(4)
    for bad_shift in (0.0, -3.0):  # second pass pushes an atom out of D
        l2 = locs.copy()
        l2[0, 0] += bad_shift
        base = AffineParams.build(1, 1, alpha=[np.diag([0.1, 0.0]), np.zeros((2, 2))],
                                  b=[0.1, 0.0], beta=[[-1.0, 0.0], [0.0, 0.0]],
                                  jumps_m=PointMassMixture(l2, w))
        shuffled = base.replace(m=PointMassMixture(l2[perm], w[perm]))
        assert validate(base).passed == validate(shuffled).passed


def test_mu_on_real_coordinate_rejected():
    p = AffineParams.build(1, 1, b=[0.1, 0.0],
                           jumps_mu=[ZeroMeasure(2), OneSidedExponential(2, 0, 3.0, 1.0)])
    assert "mu_J_zero" in validate(p).identifiers
