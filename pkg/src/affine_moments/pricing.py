"""Discounted transforms, bonds, martingale tests, moment explosions and Fourier pricing.

The short rate is ``L(x) = l + <lam, x>``. Discounting enters the Riccati
system as ``F'(u) = F(u) + l q``, ``R'(u) = R(u) + lam q`` with the extra
coordinate ``q`` frozen (it has no dynamics of its own).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domain import DomainClass
from .errors import ConvergenceError, DomainError, UnsupportedError
from .levy import FunctionalFamily, build_family
from .riccati import (ExplosionVerdict, MinimalityCertificate, SolveOptions, explosion_time,
                      path_is_interior, solve_complex, solve_extended)
from .transform import char_function_batch


@dataclass(frozen=True)
class ShortRateSpec:
    l: float = 0.0
    lam: tuple = ()

    def lam_array(self, family):
        lam = np.asarray(self.lam if len(self.lam) else np.zeros(family.size), dtype=float)
        if lam.size != family.size:
            raise DomainError(f"rate lambda has {lam.size} entries, state has {family.size}")
        return lam.reshape(family.state_shape)

    def to_json(self):
        return {"l": self.l, "lambda": [float(v) for v in np.ravel(self.lam)]}


def discounted_family(params, rate: ShortRateSpec, q_disc=-1.0) -> FunctionalFamily:
    family = build_family(params)
    return family.with_discount(rate.l, rate.lam_array(family), q_disc)


def discounted_exponent(params, rate: ShortRateSpec, u, q_disc, T,
                        opts: SolveOptions = SolveOptions()):
    """Terminal ``(phi, psi)`` of the discounted system started at ``(u, q_disc)``.

    Real inputs use the extended system, complex ones the complex system.
    """
    fam = discounted_family(params, rate, q_disc)
    if np.iscomplexobj(u) or isinstance(q_disc, complex):
        traj = solve_complex(fam, u, T, opts)
    else:
        traj = solve_extended(fam, u, T, opts)
    if not traj.completed:
        raise ConvergenceError(f"discounted system ended with {traj.status.kind}",
                               achieved=traj.t_end)
    return traj.p_end, traj.q_end


@dataclass(frozen=True)
class BondPrice:
    """``verdict`` is ``"finite"``, ``"infinite"`` (the discount factor has no finite mean)
    or ``"indeterminate"``."""

    verdict: str
    value: float = math.nan
    A: float = math.nan
    B: tuple = ()
    reason: str = ""

    def to_json(self):
        out = {"verdict": self.verdict, "value": self.value, "A": self.A,
               "B": [float(v) for v in self.B]}
        if self.reason:
            out["reason"] = self.reason
        return out


def bond_price(params, rate: ShortRateSpec, x, t, T, opts: SolveOptions = SolveOptions()) -> BondPrice:
    """Zero-coupon price ``exp(-A(T-t) - <B(T-t), x>)``."""
    tau = float(T) - float(t)
    if tau < 0:
        raise ValueError("need t <= T")
    fam = discounted_family(params, rate, -1.0)
    x = np.asarray(x, dtype=float).reshape(fam.state_shape)
    if tau == 0:
        return BondPrice("finite", 1.0, 0.0, tuple(np.zeros(fam.size)))
    traj = solve_extended(fam, np.zeros(fam.state_shape), tau, opts)
    if not traj.completed:
        return BondPrice("infinite", math.inf, reason=f"discounted system ends with {traj.status.kind}")
    if traj.certificate is MinimalityCertificate.UNKNOWN:
        return BondPrice("indeterminate", reason="solution not certified minimal")
    A = -float(traj.p_end)
    B = -np.ravel(traj.q_end)
    return BondPrice("finite", math.exp(-A - float(B @ x.ravel())), A, tuple(B))


@dataclass
class MartingaleReport:
    sufficient: bool
    conditions: list = field(default_factory=list)  # dicts: id, passed, detail
    horizon: float = 1.0
    note: str = "stationarity is checked on a finite horizon only"

    def failed(self):
        return [c["id"] for c in self.conditions if not c["passed"]]

    def to_json(self):
        return {"sufficient": self.sufficient, "conditions": self.conditions,
                "horizon": self.horizon, "note": self.note}


def martingale_check(params, theta, rate: ShortRateSpec, horizon=1.0, tol=1e-10,
                     opts: SolveOptions = SolveOptions()) -> MartingaleReport:
    """Is ``exp(-int L) exp(<theta, X>)`` a martingale?"""
    family = build_family(params)
    theta = np.asarray(theta, dtype=float).reshape(family.state_shape)
    lam = rate.lam_array(family)
    dom = family.domain
    cls = dom.classify(theta)
    conds = []
    in_dom = dom.contains(theta)
    conds.append({"id": "theta_in_Y", "passed": bool(in_dom), "detail": cls.value})
    if in_dom:
        with np.errstate(all="ignore"):
            F = float(family.F(theta))
            R = np.asarray(family.R(theta), dtype=float)
    else:
        F, R = math.inf, np.full(family.state_shape, math.inf)
    f_ok = bool(np.isfinite(F) and abs(F - rate.l) <= tol * (1 + abs(rate.l)))
    conds.append({"id": "F(theta)=l", "passed": f_ok, "detail": f"F(theta)={F:.17g}, l={rate.l:.17g}"})
    r_gap = float(np.max(np.abs(R - lam))) if np.all(np.isfinite(R)) else math.inf
    r_ok = r_gap <= tol * (1 + float(np.max(np.abs(lam), initial=0.0)))
    conds.append({"id": "R(theta)=lambda", "passed": bool(r_ok), "detail": f"max |R - lambda| = {r_gap:.3g}"})

    stat_ok = False
    detail = "skipped: theta outside the effective domain"
    if in_dom:
        fam = family.with_discount(rate.l, lam, -1.0)
        traj = solve_extended(fam, theta, horizon, opts)
        if traj.completed and traj.certificate is not MinimalityCertificate.UNKNOWN:
            dp = float(np.max(np.abs(traj.p)))
            dq = float(np.max(np.abs(traj.q - theta)))
            stat_ok = dp <= tol and dq <= tol * (1 + float(np.max(np.abs(theta))))
            detail = f"max |phi| = {dp:.3g}, max |psi - theta| = {dq:.3g} on [0, {horizon:g}]"
        else:
            detail = f"solver status {traj.status.kind}, certificate {traj.certificate.value}"
    conds.append({"id": "stationary", "passed": bool(stat_ok), "detail": detail})
    sufficient = cls is DomainClass.INTERIOR and f_ok and r_ok
    return MartingaleReport(bool(sufficient), conds, float(horizon))


def asset_explosion_time(params, theta, y, t_max=100.0, tol=1e-6,
                         opts: SolveOptions = SolveOptions()) -> ExplosionVerdict:
    """Moment explosion time of ``S^y``-type moments ``E[exp(<y + theta, X_T>)]``."""
    family = build_family(params)
    theta = np.asarray(theta, dtype=float).reshape(family.state_shape)
    if not family.domain.contains(theta):
        raise DomainError("theta must lie in the effective domain")
    z = theta + np.asarray(y, dtype=float).reshape(family.state_shape)
    return explosion_time(family, z, t_max, tol, opts)


# -- Fourier pricing ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PayoffTransform:
    """Payoff ``g(<K^T, X>)`` written as ``int exp(<v + iK lam, X>) g_tilde(lam) dlam``."""

    v: np.ndarray
    K: np.ndarray  # (d, 1)
    g_tilde: Callable
    label: str = "custom"


def _damped_transform(strike, damping):
    def g(lam):
        w = damping + 1j * np.asarray(lam)
        return np.exp((1 - w) * math.log(strike)) / (2 * math.pi * w * (w - 1))

    return g


def european_call(strike, theta, damping=1.5) -> PayoffTransform:
    """``(exp(<theta, X>) - strike)^+``; needs ``damping > 1``."""
    if damping <= 1:
        raise ValueError("call damping must exceed 1")
    theta = np.asarray(theta, dtype=float)
    return PayoffTransform(damping * theta, theta.reshape(-1, 1), _damped_transform(strike, damping),
                           "call")


def european_put(strike, theta, damping=-0.5) -> PayoffTransform:
    """``(strike - exp(<theta, X>))^+``; needs ``damping < 0``."""
    if damping >= 0:
        raise ValueError("put damping must be negative")
    theta = np.asarray(theta, dtype=float)
    return PayoffTransform(damping * theta, theta.reshape(-1, 1), _damped_transform(strike, damping),
                           "put")


@dataclass(frozen=True)
class QuadOptions:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-9
    lambda0: float = 16.0
    max_lambda: float = 1e6
    max_intervals: int = 4000


@dataclass(frozen=True)
class PriceResult:
    value: float
    error_estimate: float
    diagnostics: dict

    def to_json(self):
        return {"value": self.value, "error_estimate": self.error_estimate,
                "diagnostics": self.diagnostics}


_XGK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                 0.207784955007898467600689403773245, 0.0])
_WGK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
# nodes on [-1, 1]: -x0..-x6, 0, x6..x0 ; Gauss nodes are x1, x3, x5 and 0
_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
_WK = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[7] = _WG[3]
_WG15[[13, 11, 9]] = _WG[:3]


def fourier_price(params, rate: ShortRateSpec, payoff: PayoffTransform, x, t, T,
                  quad: QuadOptions = QuadOptions(), opts: SolveOptions = SolveOptions()) -> PriceResult:
    """Price ``int E[exp(-int L) exp(<v + iK lam, X_T>)] g_tilde(lam) dlam`` by G7/K15 quadrature.

    Conjugate symmetry reduces the line integral to ``2 Re int_0^inf``.
    All nodes of one refinement sweep go through a single batched
    complex Riccati solve.
    """
    fam = discounted_family(params, rate, -1.0)
    x = np.asarray(x, dtype=float).reshape(fam.state_shape)
    K = np.asarray(payoff.K, dtype=float).reshape(fam.size, -1)
    if K.shape[1] != 1:
        raise UnsupportedError("only one-dimensional payoff transforms are supported")
    tau = float(T) - float(t)
    v = np.asarray(payoff.v, dtype=float).reshape(fam.state_shape)
    direction = K[:, 0].reshape(fam.state_shape)

    for start, name in ((np.zeros(fam.state_shape), "u=0"), (v, "u=v")):
        if fam.domain.classify(start) is not DomainClass.INTERIOR:
            raise UnsupportedError(f"{name} is not interior to the effective domain")
        tr = solve_extended(fam, start, tau, opts)
        if not tr.completed or not path_is_interior(fam, tr):
            raise UnsupportedError(f"discounted real solution from {name} does not stay interior")

    n_evals = 0

    def integrand(lams):
        nonlocal n_evals
        lams = np.asarray(lams, dtype=float)
        gt = np.asarray(payoff.g_tilde(lams), dtype=complex)
        out = np.zeros(lams.shape)
        live = gt != 0
        if np.any(live):
            U = v[None] + 1j * np.multiply.outer(lams[live], direction)
            vals, _ = char_function_batch(fam, x, U, tau, opts)
            out[live] = 2.0 * np.real(vals * gt[live])
            n_evals += int(live.sum())
        return out

    def gk(intervals):
        a = intervals[:, 0:1]
        b = intervals[:, 1:2]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid + half * _NODES[None, :]
        f = integrand(nodes.ravel()).reshape(nodes.shape)
        k15 = half[:, 0] * (f @ _WK)
        g7 = half[:, 0] * (f @ _WG15)
        return k15, np.abs(k15 - g7)

    def integrate_range(a, b, tol):
        edges = np.linspace(a, b, 9)
        ivs = np.stack([edges[:-1], edges[1:]], axis=1)
        vals, errs = gk(ivs)
        while True:
            total, err = float(vals.sum()), float(errs.sum())
            if err <= max(tol, quad.rel_tol * abs(total)):
                return total, err, len(ivs)
            if len(ivs) > quad.max_intervals:
                raise ConvergenceError("quadrature did not converge", achieved=err)
            width = ivs[:, 1] - ivs[:, 0]
            bad = errs > max(tol, quad.rel_tol * abs(total)) * width / (b - a) * 0.5
            if not np.any(bad):
                bad = errs >= errs.max()
            mids = 0.5 * (ivs[bad, 0] + ivs[bad, 1])
            new = np.concatenate([np.stack([ivs[bad, 0], mids], 1), np.stack([mids, ivs[bad, 1]], 1)])
            nv, ne = gk(new)
            ivs = np.concatenate([ivs[~bad], new])
            vals = np.concatenate([vals[~bad], nv])
            errs = np.concatenate([errs[~bad], ne])

    tol = quad.abs_tol
    lam_hi = quad.lambda0
    total, err, n_iv = integrate_range(0.0, lam_hi, 0.5 * tol)
    while True:
        piece, perr, n = integrate_range(lam_hi, 2 * lam_hi, 0.05 * tol)
        total += piece
        err += perr
        n_iv += n
        lam_hi *= 2
        if abs(piece) < 0.1 * max(tol, quad.rel_tol * abs(total)):
            break
        if lam_hi > quad.max_lambda:
            raise ConvergenceError("integrand tail does not decay within max_lambda", achieved=abs(piece))
    return PriceResult(float(total), float(err + abs(piece)),
                       {"lambda_max": lam_hi, "n_intervals": n_iv, "n_evaluations": n_evals,
                        "payoff": payoff.label, "tau": tau})
