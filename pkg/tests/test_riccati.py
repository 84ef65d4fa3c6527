import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affine_moments import models
from affine_moments.errors import DomainError, UnsupportedError
from affine_moments.levy import build_family
from affine_moments.riccati import (BlowUp, BoundaryContact, Completed, DomainExit,
                                    MinimalityCertificate, SolveOptions, comparison_check,
                                    explosion_time, solve_complex, solve_complex_batch,
                                    solve_extended, verify_semiflow)

from oracles import cir_blowup_time, cir_exponent, heston_log_cf, riccati_blowup_time

K, TH, S = 1.0, 0.02, 0.2


@pytest.fixture(scope="module")
def cir():
    return build_family(models.cir(K, TH, S))


@pytest.mark.parametrize("name", models.CANONICAL + ("wishart",))
def test_zero_is_stationary(name):
    fam = build_family(models.ZOO[name]())
    traj = solve_extended(fam, np.zeros(fam.state_shape), 3.0)
    assert isinstance(traj.status, Completed)
    assert np.all(traj.p == 0) and np.all(traj.q == 0)
    assert traj.certificate is not MinimalityCertificate.UNKNOWN


def test_initial_conditions_exact(cir):
    traj = solve_extended(cir, [-5.0], 1.0)
    assert traj.times[0] == 0 and traj.p[0] == 0 and traj.q[0][0] == -5.0
    assert np.all(np.diff(traj.times) > 0) and traj.times[-1] == 1.0


def test_levy_family_is_linear_in_time():
    fam = build_family(models.merton_levy())
    y = np.array([1.3])
    traj = solve_extended(fam, y, 4.0)
    for t in np.linspace(0, 4, 20):
        p, q = traj.at(t)
        assert np.max(np.abs(q - y)) <= 1e-10
        assert abs(p - t * fam.F(y)) <= 1e-10 * (1 + abs(t * fam.F(y)))


@pytest.mark.parametrize("y", [-5.0, -0.5, 0.3, 8.0])
def test_cir_matches_closed_form(cir, y):
    traj = solve_extended(cir, [y], 1.0)
    assert traj.certificate is MinimalityCertificate.DIFFUSION
    for t in (0.1, 0.5, 1.0):
        p, q = traj.at(t)
        p_ref, q_ref = cir_exponent(K, TH, S, y, t)
        assert q[0] == pytest.approx(q_ref, rel=1e-9)
        assert p == pytest.approx(p_ref, rel=1e-9, abs=1e-14)


def test_cir_blowup(cir):
    y = 1.2 * 2 * K / S ** 2
    t_ref = cir_blowup_time(K, S, y)
    traj = solve_extended(cir, [y], 2 * t_ref)
    assert isinstance(traj.status, BlowUp)
    assert traj.status.t_star == pytest.approx(t_ref, abs=1e-6)
    assert traj.certificate is MinimalityCertificate.UNKNOWN
    # monotonicity: slightly shorter horizon completes
    assert solve_extended(cir, [y], traj.status.t_star * (1 - 1e-3)).completed


def test_explosion_time_cir(cir):
    y = 1.2 * 2 * K / S ** 2
    v = explosion_time(cir, [y], 100.0, tol=1e-8)
    assert v.kind == "finite"
    assert v.t_plus == pytest.approx(cir_blowup_time(K, S, y), rel=1e-6)
    assert explosion_time(cir, [0.5 * y], 50.0).kind == "exceeds_horizon"


def test_explosion_time_levy_exceeds_every_horizon():
    fam = build_family(models.merton_levy())
    for t_max in (1.0, 10.0, 1000.0):
        v = explosion_time(fam, [2.0], t_max)
        assert v.kind == "exceeds_horizon" and v.t_plus == t_max


def test_explosion_time_outside_domain_is_zero():
    fam = build_family(models.pure_jump(rate=3.0))
    v = explosion_time(fam, [3.5], 10.0)
    assert v.kind == "finite" and v.t_plus == 0.0


def test_heston_third_moment_explosion():
    kappa, sigma, rho = 2.0, 0.6, 0.5
    fam = build_family(models.heston(kappa=kappa, sigma=sigma, rho=rho))
    # E S^3: q_S = 3 is frozen and q_v follows a scalar Riccati equation
    qs = 3.0
    ref = riccati_blowup_time(sigma ** 2 / 2, rho * sigma * qs - kappa, (qs * qs - qs) / 2, 0.0)
    assert math.isfinite(ref)
    v = explosion_time(fam, [0.0, qs], 100.0, tol=1e-7)
    assert v.kind == "finite"
    assert v.t_plus == pytest.approx(ref, abs=1e-4)


def test_outside_domain_raises():
    fam = build_family(models.pure_jump(rate=3.0))
    with pytest.raises(DomainError):
        solve_extended(fam, [3.5], 1.0)
    with pytest.raises(DomainError):
        solve_complex(fam, [3.0 + 1j], 1.0)


def test_boundary_start_is_flagged():
    fam = build_family(models.pure_jump(rate=3.0))
    # the boundary itself is excluded for a strict half-space
    with pytest.raises(DomainError):
        solve_extended(fam, [3.0], 1.0)


def test_open_boundary_contact():
    # pure_jump has R(y) > 0 near the boundary, so q runs into y = rate
    fam = build_family(models.pure_jump(rate=3.0))
    traj = solve_extended(fam, [2.9], 50.0)
    assert isinstance(traj.status, BoundaryContact)
    assert traj.status.ends_lifetime
    assert traj.t_end < 0.01
    v = explosion_time(fam, [2.9], 50.0, tol=1e-6)
    assert v.kind == "finite" and v.t_plus == pytest.approx(traj.status.t, abs=1e-6)


@pytest.mark.parametrize("name", models.CANONICAL)
def test_complex_real_consistency(name):
    fam = build_family(models.ZOO[name]())
    y = np.full(fam.size, 0.3)
    real = solve_extended(fam, y, 1.0)
    cplx = solve_complex(fam, y.astype(complex), 1.0)
    assert real.completed and cplx.completed
    scale = 1 + np.max(np.abs(real.q_end))
    assert np.max(np.abs(cplx.q_end - real.q_end)) <= 1e-12 * scale
    assert abs(cplx.p_end - real.p_end) <= 1e-12 * (1 + abs(real.p_end))


def test_heston_complex_matches_closed_form():
    params = models.heston()
    fam = build_family(params)
    for z in (-7.0, -1.0, 0.5, 3.0, 15.0):
        u = 1j * z
        traj = solve_complex(fam, np.array([0.0, u]), 1.5)
        v0, s0 = 0.05, 0.1
        got = traj.p_end + traj.q_end[0] * v0 + traj.q_end[1] * s0
        ref = heston_log_cf(2.0, 0.04, 0.3, -0.7, 0.0, v0, s0, u, 1.5)
        assert abs(cmath_exp(got) - cmath_exp(ref)) <= 1e-8 * abs(cmath_exp(ref))


def cmath_exp(z):
    return complex(np.exp(z))


@given(re=st.floats(-2, 1), im=st.floats(-30, 30))
@settings(max_examples=25, deadline=None)
def test_conjugate_symmetry(re, im):
    fam = build_family(models.bates())
    u = np.array([0.1 + 0.3j, re + 1j * im])
    a = solve_complex(fam, u, 1.0)
    b = solve_complex(fam, np.conj(u), 1.0)
    assert abs(b.p_end - np.conj(a.p_end)) <= 1e-9 * (1 + abs(a.p_end))
    assert np.max(np.abs(b.q_end - np.conj(a.q_end))) <= 1e-9 * (1 + np.max(np.abs(a.q_end)))


def test_complex_batch_matches_single_solves():
    fam = build_family(models.heston())
    U = np.array([[0.0, 1j * z] for z in (-3.0, 0.5, 4.0, 20.0)])
    phi, psi = solve_complex_batch(fam, U, 2.0)
    for k, u in enumerate(U):
        t = solve_complex(fam, u, 2.0)
        assert phi[k] == pytest.approx(t.p_end, rel=1e-8, abs=1e-10)
        np.testing.assert_allclose(psi[k], t.q_end, rtol=1e-8, atol=1e-10)


def test_complex_path_stays_in_open_strip():
    # the complex path may detour around the singularity that ends the real one
    fam = build_family(models.pure_jump(rate=3.0))
    traj = solve_complex(fam, np.array([2.9 + 0.1j]), 50.0)
    if traj.completed:
        assert np.all(traj.dense_q(traj.sample_nodes()).real < 3.0)
    else:
        assert isinstance(traj.status, (DomainExit, BlowUp))


def test_grid_refinement_within_error_estimate():
    fam = build_family(models.heston())
    y = np.array([0.5, 1.2])
    a = solve_extended(fam, y, 2.0, SolveOptions(rel_tol=1e-8, abs_tol=1e-10))
    b = solve_extended(fam, y, 2.0, SolveOptions(rel_tol=5e-9, abs_tol=5e-11))
    diff = max(abs(a.p_end - b.p_end), np.max(np.abs(a.q_end - b.q_end)))
    assert diff < 10 * max(a.error_estimate, 1e-15)


@pytest.mark.parametrize("name", ("cir", "vasicek", "heston", "bates", "pure_jump", "wishart"))
def test_semiflow(name):
    fam = build_family(models.ZOO[name]())
    rng = np.random.default_rng(3)
    y = np.full(fam.state_shape, 0.2)
    if name == "wishart":
        y = np.array([[0.1, 0.02], [0.02, 0.05]])
    traj = solve_extended(fam, y, 2.0)
    assert traj.completed
    assert verify_semiflow(fam, traj, rng.uniform(0, 2.0, 10)) <= 1e-8
    assert verify_semiflow(fam, traj, [0.0, 2.0]) == 0.0


def test_semiflow_requires_completed(cir):
    traj = solve_extended(cir, [1.2 * 2 * K / S ** 2], 10.0)
    with pytest.raises(UnsupportedError):
        verify_semiflow(cir, traj, [0.5])


def test_comparison_margin():
    fam = build_family(models.heston())
    assert comparison_check(fam, np.array([0.3, 0.5]), 1.0) == pytest.approx(0.0, abs=1e-12)
    assert comparison_check(fam, np.array([0.5 + 3j, 1 + 1j]), 1.0) >= -1e-9
    pj = build_family(models.pure_jump())
    assert comparison_check(pj, np.array([1.0 + 4j]), 1.0) >= -1e-9
    with pytest.raises(UnsupportedError):
        comparison_check(build_family(models.wishart()), np.zeros((2, 2)), 1.0)


def test_csv_export(cir):
    traj = solve_extended(cir, [-5.0], 1.0)
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,p,q_1"
    assert lines[-1].startswith("# ")
    body = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:-1]])
    np.testing.assert_array_equal(body[:, 0], traj.times)
    np.testing.assert_array_equal(body[:, 2], traj.q[:, 0])
    ctraj = solve_complex(cir, np.array([-1 + 2j]), 1.0)
    assert ctraj.to_csv().splitlines()[0] == "t,p_re,p_im,q_1_re,q_1_im"


def test_options_validated():
    with pytest.raises(ValueError):
        SolveOptions(rel_tol=0.0)
    with pytest.raises(ValueError):
        SolveOptions(blowup_norm_threshold=0.5)


def test_negative_horizon_rejected(cir):
    with pytest.raises(ValueError):
        solve_extended(cir, [0.1], -1.0)


def test_threshold_constant():
    assert math.isfinite(SolveOptions().blowup_norm_threshold)
