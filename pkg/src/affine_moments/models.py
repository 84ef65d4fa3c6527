"""Built-in parameter sets used by tests, examples and the CLI.

Coordinates on mixed spaces put the nonnegative block first, so for the
stochastic-volatility models coordinate 0 is the variance and coordinate 1
the log-price.
"""
from __future__ import annotations

import math

import numpy as np

from .jumps import GaussianJumps, OneSidedExponential
from .state_space import AffineParams, MatrixAffineParams


def cir(kappa=1.0, theta=0.02, sigma=0.2) -> AffineParams:
    """``dX = kappa (theta - X) dt + sigma sqrt(X) dW``."""
    return AffineParams.build(1, 0, alpha=[[[sigma ** 2]]], b=[kappa * theta], beta=[[-kappa]])


def vasicek(kappa=0.8, theta=0.03, sigma=0.02) -> AffineParams:
    """``dX = kappa (theta - X) dt + sigma dW`` on the real line."""
    return AffineParams.build(0, 1, a=[[sigma ** 2]], b=[kappa * theta], beta=[[-kappa]])


def black_scholes(sigma=0.2, r=0.0) -> AffineParams:
    """Log-price of geometric Brownian motion under the pricing measure."""
    return AffineParams.build(0, 1, a=[[sigma ** 2]], b=[r - 0.5 * sigma ** 2])


def heston(kappa=2.0, theta=0.04, sigma=0.3, rho=-0.7, r=0.0) -> AffineParams:
    """Variance ``V`` and log-price ``log S`` with ``d<V, log S> = rho sigma V dt``."""
    alpha_v = np.array([[sigma ** 2, rho * sigma], [rho * sigma, 1.0]])
    return AffineParams.build(1, 1, alpha=[alpha_v, np.zeros((2, 2))], b=[kappa * theta, r],
                              beta=[[-kappa, -0.5], [0.0, 0.0]])


def _gaussian_log_jumps(dim, coord, intensity, mean, std):
    mu = np.zeros(dim)
    mu[coord] = mean
    cov = np.zeros((dim, dim))
    cov[coord, coord] = std ** 2
    return GaussianJumps(mu, cov, intensity)


def _compensated_drift(jumps, coord, r):
    """Drift of the log-price making ``exp(log S)`` grow at rate ``r``."""
    e = np.zeros(jumps.dim)
    e[coord] = 1.0
    return r - float(jumps.integral(e))


def bates(kappa=2.0, theta=0.04, sigma=0.3, rho=-0.7, r=0.0, jump_intensity=0.5,
          jump_mean=-0.1, jump_std=0.15) -> AffineParams:
    """Heston with Gaussian jumps of constant intensity in the log-price."""
    jumps = _gaussian_log_jumps(2, 1, jump_intensity, jump_mean, jump_std)
    h = heston(kappa, theta, sigma, rho, r)
    return h.replace(b=np.array([kappa * theta, _compensated_drift(jumps, 1, r)]), m=jumps)


def merton_levy(sigma=0.2, r=0.0, jump_intensity=0.8, jump_mean=-0.05, jump_std=0.2) -> AffineParams:
    """Exponential Levy model with Gaussian jumps (a process with ``R = 0``)."""
    jumps = _gaussian_log_jumps(1, 0, jump_intensity, jump_mean, jump_std)
    b = _compensated_drift(jumps, 0, r) - 0.5 * sigma ** 2
    return AffineParams.build(0, 1, a=[[sigma ** 2]], b=[b], jumps_m=jumps)


def pure_jump(kappa=1.0, base=0.2, rate=3.0, intensity=1.0, excitation=0.5) -> AffineParams:
    """Nonnegative jump process: mean reversion, exponential jumps of constant
    intensity and self-exciting exponential jumps of intensity ``excitation * X``."""
    m = OneSidedExponential(1, 0, rate, intensity)
    mu = OneSidedExponential(1, 0, rate, excitation)
    # truncated jump drifts are added back so that ``b`` is the compensated level
    return AffineParams.build(1, 0, b=[base + m.truncated_mean()[0]],
                              beta=[[-kappa + mu.truncated_mean()[0]]], jumps_m=m, jumps_mu=[mu])


def heston_exp_jumps(kappa=2.0, theta=0.04, sigma=0.3, rho=-0.7, r=0.0, rate=10.0,
                     excitation=1.0) -> AffineParams:
    """Heston with variance-driven exponential jumps in the variance."""
    mu = OneSidedExponential(2, 0, rate, excitation)
    h = heston(kappa, theta, sigma, rho, r)
    beta0 = np.array([-kappa + mu.truncated_mean()[0], -0.5])
    return h.replace(beta=(beta0, np.zeros(2)), mu=(mu, h.mu[1]))


def wishart(d=2, alpha=None, b=None, M=None) -> MatrixAffineParams:
    """Wishart process: ``R(u) = 2 u alpha u + M^T u + u M``, ``F(u) = tr(b u)``."""
    alpha = np.eye(d) if alpha is None else np.asarray(alpha, dtype=float)
    b = (d + 1.0) * alpha if b is None else np.asarray(b, dtype=float)
    M = -0.5 * np.eye(d) if M is None else np.asarray(M, dtype=float)
    return MatrixAffineParams.build(d, alpha=alpha, b=b, M=M)


ZOO = {
    "cir": cir,
    "vasicek": vasicek,
    "black_scholes": black_scholes,
    "heston": heston,
    "bates": bates,
    "merton_levy": merton_levy,
    "pure_jump": pure_jump,
    "heston_exp_jumps": heston_exp_jumps,
    "wishart": wishart,
}

CANONICAL = ("cir", "vasicek", "black_scholes", "heston", "bates", "merton_levy", "pure_jump",
             "heston_exp_jumps")
WITH_JUMPS = ("bates", "merton_levy", "pure_jump", "heston_exp_jumps")
