"""Levy-Khintchine functionals F and R of an affine process.

All evaluations use the moment-generating convention
``E[exp(<u, X_t>)] = exp(phi(t, u) + <psi(t, u), x>)`` on both state-space
families. Real arguments outside the effective domain evaluate to +inf.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .domain import DomainClass, DomainY
from .errors import DomainError, StructuralError
from .jumps import JumpMeasure, NumericDensity, ZeroMeasure
from .state_space import (AffineParams, Canonical, MatrixAffineParams, MatrixCone, validate)


@dataclass(frozen=True, eq=False)
class LKFunctional:
    """``y -> <y, Q y>/2 + <l, y> + int (e^{<xi,y>} - 1 - <h(xi), y>) nu(dxi)``."""

    quadratic: np.ndarray
    linear: np.ndarray
    measure: JumpMeasure

    @property
    def domain(self) -> DomainY:
        return self.measure.tail_domain()

    def __call__(self, u):
        u = np.asarray(u)
        quad = 0.5 * np.einsum("...i,ij,...j->...", u, self.quadratic, u)
        return quad + u @ self.linear + self.measure.integral(u)


def eval_real(f: LKFunctional, y) -> float:
    """Value of ``f`` at a real point; ``math.inf`` where the jump tail diverges."""
    y = np.asarray(y, dtype=float)
    val = f(y)
    return float(val) if np.ndim(val) == 0 else val


def _violated(domain: DomainY, y):
    for h in domain.half_spaces:
        s = float(h.slack(y))
        if s <= 0:
            return h.describe()
    for cb in domain.callbacks:
        if cb.classify(y) is not DomainClass.INTERIOR:
            return cb.description
    return None


def eval_complex(f: LKFunctional, u) -> complex:
    """Analytic extension of ``f`` to the strip over the interior of its domain."""
    u = np.asarray(u, dtype=complex)
    bad = _violated(f.domain, u.real)
    if bad is not None:
        raise DomainError(f"Re u is not interior to the tail domain: {bad}")
    return complex(f(u))


@dataclass(frozen=True, eq=False)
class FunctionalFamily:
    """``F``, ``R`` and the effective domain of a process.

    ``F(u)`` maps ``batch + state_shape`` to ``batch``; ``R(u)`` preserves the
    shape. For canonical models ``lk_F`` / ``lk_R`` hold the coordinate
    functionals and ``params`` the source parameter set.
    """

    F: Callable
    R: Callable
    domain: DomainY
    state_shape: tuple
    kind: str = "raw"
    has_jumps: bool = True
    params: object = None
    lk_F: Optional[LKFunctional] = None
    lk_R: tuple = ()
    label: str = ""

    @property
    def size(self):
        return int(np.prod(self.state_shape))

    @property
    def space(self):
        return getattr(self.params, "space", None)

    def inner(self, q, x):
        """``<q, x>`` (``tr(qx)`` for symmetric matrices), batched over q."""
        x = np.asarray(x)
        axes = tuple(range(-len(self.state_shape), 0))
        return np.sum(np.asarray(q) * x, axis=axes)

    def with_discount(self, l, lam, qd) -> "FunctionalFamily":
        """``F'(u) = F(u) + l qd``, ``R'(u) = R(u) + lam qd``."""
        lam = np.asarray(lam, dtype=float).reshape(self.state_shape)
        F, R = self.F, self.R

        def F2(u):
            return F(u) + l * qd

        def R2(u):
            return R(u) + lam * qd

        return FunctionalFamily(F2, R2, self.domain, self.state_shape, self.kind, self.has_jumps,
                                self.params, None, (), self.label + "+discount")


def _canonical_family(params: AffineParams) -> FunctionalFamily:
    lk_F = LKFunctional(params.a, params.b, params.m)
    lk_R = tuple(LKFunctional(al, be, mu) for al, be, mu in zip(params.alpha, params.beta, params.mu))
    domain = lk_F.domain
    for f in lk_R:
        domain = domain.intersect(f.domain)

    # stacked coefficients for a single vectorised R evaluation
    alpha = np.stack(params.alpha)  # (d, d, d): alpha[i] is the i-th matrix
    beta = np.stack(params.beta)
    jump_idx = [i for i, mu in enumerate(params.mu) if not mu.is_zero]

    def F(u):
        return lk_F(u)

    def R(u):
        u = np.asarray(u)
        out = 0.5 * np.einsum("...k,ikl,...l->...i", u, alpha, u) + u @ beta.T
        if jump_idx:
            out = out.astype(np.result_type(out, u, float), copy=True)
            for i in jump_idx:
                out[..., i] = out[..., i] + params.mu[i].integral(u)
        return out

    return FunctionalFamily(F, R, domain, (params.d,), "canonical", not params.is_diffusion,
                            params, lk_F, lk_R)


def _matrix_family(params: MatrixAffineParams) -> FunctionalFamily:
    alpha, b = params.alpha, params.b

    def F(u):
        u = np.asarray(u)
        out = np.einsum("ij,...ji->...", b, u)
        if not params.m.is_zero:
            out = out + params.m.integral(u)
        return out

    def R(u):
        u = np.asarray(u)
        out = 2.0 * u @ alpha @ u + params.apply_B_adjoint(u)
        if not params.mu.is_zero:
            out = out + params.mu.integral(u)
        return out

    return FunctionalFamily(F, R, DomainY.full(), (params.d, params.d), "matrix",
                            not params.is_diffusion, params)


def build_family(params, *, check=True) -> FunctionalFamily:
    """Wire ``F`` and ``R`` from a validated parameter set."""
    if isinstance(params, FunctionalFamily):
        return params
    if check:
        rep = validate(params)
        if not rep.passed:
            raise StructuralError("parameters fail admissibility: " + ", ".join(rep.identifiers))
    if isinstance(params, AffineParams):
        return _canonical_family(params)
    if isinstance(params, MatrixAffineParams):
        return _matrix_family(params)
    raise StructuralError(f"cannot build functionals from {type(params).__name__}")


def raw_family(F, R, domain: DomainY, state_shape, has_jumps=True, label="raw"):
    """Family on a general convex state space from user-supplied F, R and domain.

    No admissibility check is possible here; correctness is the caller's burden.
    """
    return FunctionalFamily(F, R, domain, tuple(state_shape), "raw", has_jumps, None, label=label)


def domain_classify(family: FunctionalFamily, y) -> DomainClass:
    return family.domain.classify(np.asarray(y, dtype=float))


# -- growth estimate on canonical spaces ------------------------------------------


def _growth_g(params: AffineParams, y):
    """Nonnegative convex bound function ``g`` evaluated at real points ``y``."""
    y = np.asarray(y, dtype=float)
    I, J = params.space.I, params.space.J
    norm_y = np.linalg.norm(y, axis=-1)
    g = np.zeros(y.shape[:-1])
    for i in I:
        be, al, mu = params.beta[i], params.alpha[i], params.mu[i]
        g = g + np.linalg.norm(be[I]) + np.linalg.norm(be[J])
        a_iJ = np.linalg.norm(al[i, J]) if J else 0.0
        a_JJ = np.linalg.norm(al[np.ix_(J, J)], 2) if J else 0.0
        g = g + 0.5 * (al[i, i] * np.maximum(y[..., i], 0.0) + 2.0 * a_iJ + a_JJ)
        if mu.is_zero:
            continue
        g = g + mu.tail_exp_integral(y) + mu.large_mass()
        if isinstance(mu, NumericDensity):
            A, C = mu.small_jump_moments(i, params.space.m)
            yp = np.maximum(y[..., i], 0.0)
            g = g + np.exp(2.0 * norm_y) * A + yp * np.exp(yp) * C
        else:
            small = mu.total_mass() - mu.large_mass()
            g = g + small * (np.exp(norm_y) + 2.5)
    return g


def growth_bound(family: FunctionalFamily, u):
    """``(lhs, rhs)`` of ``Re <conj(u_I), R_I(u)> <= g(Re u)(1 + |u_J|^2)(1 + |u_I|^2)``.

    Vectorised over leading axes of ``u``.
    """
    params = family.params
    if not isinstance(params, AffineParams):
        raise StructuralError("growth_bound needs a canonical family")
    u = np.asarray(u, dtype=complex)
    re = u.real
    flat = re.reshape(-1, re.shape[-1])
    outside = [p for p in flat if family.domain.classify(p) is not DomainClass.INTERIOR]
    if outside:
        raise DomainError("Re u is not interior to the effective domain")
    I, J = params.space.I, params.space.J
    R = family.R(u)
    lhs = np.real(np.sum(np.conj(u[..., I]) * R[..., I], axis=-1))
    nI = np.sum(np.abs(u[..., I]) ** 2, axis=-1)
    nJ = np.sum(np.abs(u[..., J]) ** 2, axis=-1)
    rhs = _growth_g(params, re) * (1.0 + nJ) * (1.0 + nI)
    return lhs, rhs


# -- scalar complex inequality ----------------------------------------------------

_SERIES_TERMS = 30


def _phi2(z):
    """``(e^z - 1 - z) / z`` with a power series near 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.5
    zs = np.where(small, z, 0.0)
    series = np.zeros_like(zs)
    term = zs / 2.0  # z^{k-1}/k! at k = 2
    for k in range(2, _SERIES_TERMS):
        series = series + term
        term = term * zs / (k + 1)
    zb = np.where(small, 1.0, z)
    direct = (np.expm1(zb) - zb) / zb
    return np.where(small, series, direct)


def verify_complex_inequality(z):
    """``(lhs, rhs)`` with ``lhs = int_0^1 (1-t) Re(z e^{tz}) dt`` and
    ``rhs = e^{(Re z)_+} - 1``; vectorised."""
    z = np.asarray(z, dtype=complex)
    lhs = np.real(_phi2(z))
    rhs = np.expm1(np.maximum(z.real, 0.0))
    if lhs.ndim == 0:
        return float(lhs), float(rhs)
    return lhs, rhs


def complex_inequality_quadrature(z, tol=1e-9):
    """Left-hand side of the scalar inequality by adaptive quadrature."""
    z = complex(z)
    val, err = integrate.quad(lambda t: (1 - t) * (z * np.exp(t * z)).real, 0.0, 1.0,
                              epsabs=tol, epsrel=tol, limit=200)
    return val, err
