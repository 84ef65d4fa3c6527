import math

import numpy as np
import pytest

from affine_moments import models
from affine_moments.errors import DomainError
from affine_moments.pricing import (PayoffTransform, ShortRateSpec, asset_explosion_time,
                                    bond_price, discounted_exponent, european_call, european_put,
                                    fourier_price, martingale_check)
from affine_moments.riccati import solve_extended

from oracles import black_scholes_call, black_scholes_put, cir_bond, cir_exponent


def test_bond_at_maturity_is_one():
    res = bond_price(models.cir(), ShortRateSpec(0.0, (1.0,)), [0.03], 2.0, 2.0)
    assert res.value == 1.0


def test_constant_rate_bond_exact():
    r = 0.035
    for tau in (0.25, 1.0, 7.0):
        res = bond_price(models.heston(), ShortRateSpec(r, (0.0, 0.0)), [0.04, 0.0], 0.0, tau)
        assert res.value == pytest.approx(math.exp(-r * tau), rel=1e-14)


def test_constant_rate_exponent():
    phi, psi = discounted_exponent(models.vasicek(), ShortRateSpec(0.02, (0.0,)), [0.0], -1.0, 3.0)
    assert phi == pytest.approx(-0.06, rel=1e-13)
    assert psi[0] == 0.0


@pytest.mark.parametrize("tau", [0.5, 1.0, 5.0, 10.0])
def test_cir_bond_closed_form(tau):
    k, th, s, r0 = 0.5, 0.04, 0.2, 0.03
    res = bond_price(models.cir(k, th, s), ShortRateSpec(0.0, (1.0,)), [r0], 0.0, tau)
    assert res.verdict == "finite"
    assert res.value == pytest.approx(cir_bond(k, th, s, r0, tau), rel=1e-8)


def test_bond_decreasing_in_maturity():
    rng = np.random.default_rng(11)
    p = models.cir(0.5, 0.04, 0.2)
    for r0 in rng.uniform(0, 0.1, 4):
        prices = [bond_price(p, ShortRateSpec(0.01, (1.0,)), [r0], 0.0, T).value
                  for T in (0.5, 1.0, 2.0, 4.0, 8.0)]
        assert all(b < a for a, b in zip(prices, prices[1:]))


def test_zero_discount_is_plain_solve():
    p = models.heston()
    y = np.array([0.4, 0.7])
    phi, psi = discounted_exponent(p, ShortRateSpec(0.03, (0.5, 0.0)), y, 0.0, 1.5)
    plain = solve_extended(p, y, 1.5)
    assert phi == plain.p_end
    np.testing.assert_array_equal(psi, plain.q_end)


def test_no_rate_reduces_to_plain_riccati():
    phi, psi = discounted_exponent(models.cir(1.0, 0.02, 0.2), ShortRateSpec(0.0, (0.0,)),
                                   [-5.0], -1.0, 1.0)
    p, q = cir_exponent(1.0, 0.02, 0.2, -5.0, 1.0)
    assert phi == pytest.approx(p, rel=1e-9) and psi[0] == pytest.approx(q, rel=1e-9)


def test_martingale_black_scholes():
    rep = martingale_check(models.black_scholes(0.3, 0.0), [1.0], ShortRateSpec(0.0, (0.0,)))
    assert rep.sufficient and rep.failed() == []


def test_martingale_heston_with_rate():
    r = 0.02
    rep = martingale_check(models.heston(r=r), [0.0, 1.0], ShortRateSpec(r, (0.0, 0.0)))
    assert rep.sufficient and rep.failed() == []


def test_martingale_drift_mutant():
    p = models.heston()
    bad = p.replace(b=p.b + np.array([0.0, 0.01]))
    rep = martingale_check(bad, [0.0, 1.0], ShortRateSpec(0.0, (0.0, 0.0)))
    assert not rep.sufficient
    assert "F(theta)=l" in rep.failed()
    assert "stationary" in rep.failed()


def test_martingale_theta_outside_domain():
    rep = martingale_check(models.pure_jump(rate=3.0), [4.0], ShortRateSpec(0.0, (0.0,)))
    assert not rep.sufficient and "theta_in_Y" in rep.failed()


def test_asset_explosion_verdicts():
    v = asset_explosion_time(models.pure_jump(rate=3.0), [1.0], [2.5], 10.0)
    assert v.kind == "finite" and v.t_plus == 0.0
    v = asset_explosion_time(models.merton_levy(), [1.0], [1.0], 50.0)
    assert v.kind == "exceeds_horizon"
    with pytest.raises(DomainError):
        asset_explosion_time(models.pure_jump(rate=3.0), [3.5], [0.0], 10.0)


def test_black_scholes_reference_value():
    res = fourier_price(models.black_scholes(0.2), ShortRateSpec(0.0, (0.0,)),
                        european_call(1.0, [1.0]), [0.0], 0.0, 1.0)
    assert res.value == pytest.approx(black_scholes_call(1.0, 1.0, 0.2, 1.0), rel=1e-9)
    assert res.value == pytest.approx(0.0796557, abs=1e-7)


@pytest.mark.parametrize("sigma", [0.1, 0.4])
@pytest.mark.parametrize("T", [0.25, 5.0])
@pytest.mark.parametrize("k", [0.8, 1.2])
def test_black_scholes_with_rate(sigma, T, k):
    r = 0.03
    rate = ShortRateSpec(r, (0.0,))
    p = models.black_scholes(sigma, r)
    call = fourier_price(p, rate, european_call(k, [1.0]), [0.0], 0.0, T)
    put = fourier_price(p, rate, european_put(k, [1.0]), [0.0], 0.0, T)
    assert call.value == pytest.approx(black_scholes_call(1.0, k, sigma, T, r), rel=1e-8)
    assert put.value == pytest.approx(black_scholes_put(1.0, k, sigma, T, r), rel=1e-8)


@pytest.mark.parametrize("name", ["black_scholes", "heston"])
def test_put_call_parity(name):
    r = 0.02
    p = models.ZOO[name](r=r)
    theta = np.zeros(p.d)
    theta[-1] = 1.0
    x = np.zeros(p.d)
    x[0] = 0.04 if name == "heston" else 0.0
    x[-1] = math.log(1.1)
    rate = ShortRateSpec(r, tuple(np.zeros(p.d)))
    for k in (0.9, 1.0, 1.3):
        c = fourier_price(p, rate, european_call(k, theta), x, 0.0, 1.0).value
        q = fourier_price(p, rate, european_put(k, theta), x, 0.0, 1.0).value
        assert c - q == pytest.approx(1.1 - k * math.exp(-r), abs=1e-8)


def test_zero_payoff():
    payoff = PayoffTransform(np.array([1.5]), np.array([[1.0]]), lambda lam: np.zeros_like(lam, complex))
    res = fourier_price(models.black_scholes(), ShortRateSpec(0.0, (0.0,)), payoff, [0.0], 0.0, 1.0)
    assert res.value == 0.0


def test_damping_checked():
    with pytest.raises(ValueError):
        european_call(1.0, [1.0], damping=0.5)
    with pytest.raises(ValueError):
        european_put(1.0, [1.0], damping=0.5)


def test_rate_dimension_checked():
    with pytest.raises(DomainError):
        bond_price(models.heston(), ShortRateSpec(0.0, (1.0,)), [0.04, 0.0], 0.0, 1.0)
