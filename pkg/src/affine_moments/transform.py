"""The affine transform formula.

``E^x[exp(<u, X_T>)] = exp(phi(T, u) + <psi(T, u), x>)`` for real ``u``
(exponential moments) and complex ``u`` (characteristic-type values),
with verdicts tied to the solvability of the Riccati systems.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import DomainClass
from .errors import ConvergenceError, DomainError, UnsupportedError
from .levy import FunctionalFamily, build_family
from .riccati import (BlowUp, BoundaryContact, MinimalityCertificate, RiccatiTrajectory,
                      SolveOptions, _interior_rows, path_is_interior, solve_complex,
                      solve_complex_batch, solve_extended)
from .state_space import check_complex_assumption

MODULUS_SLACK = 1e-10


@dataclass(frozen=True, eq=False)
class MomentResult:
    """``verdict`` is ``"finite"``, ``"infinite"`` or ``"indeterminate"``."""

    verdict: str
    value: float = math.nan
    p: float = math.nan
    q: Optional[np.ndarray] = None
    t_plus: float = math.nan
    reason: str = ""
    certificate: MinimalityCertificate = MinimalityCertificate.UNKNOWN
    trajectory: Optional[RiccatiTrajectory] = field(default=None, repr=False)

    @property
    def is_finite(self):
        return self.verdict == "finite"

    def to_json(self):
        out = {"verdict": self.verdict, "certificate": self.certificate.value}
        if self.verdict == "finite":
            out.update(value=self.value, p=self.p, q=[float(v) for v in np.ravel(self.q)])
        elif self.verdict == "infinite":
            out["t_plus"] = self.t_plus
        if self.reason:
            out["reason"] = self.reason
        return out


@dataclass(frozen=True, eq=False)
class CFResult:
    """``kind`` is ``"value"`` or ``"unsupported"`` (``reason`` names the failed clause)."""

    kind: str
    value: complex = complex(math.nan, math.nan)
    phi: complex = complex(math.nan, math.nan)
    psi: Optional[np.ndarray] = None
    reason: str = ""
    bound: float = math.nan  # the real moment at Re u

    @property
    def ok(self):
        return self.kind == "value"

    def to_json(self):
        if not self.ok:
            return {"kind": self.kind, "reason": self.reason}
        z = complex(self.value)
        return {"kind": self.kind, "value": [z.real, z.imag], "modulus_bound": self.bound,
                "phi": [self.phi.real, self.phi.imag],
                "psi": [[complex(v).real, complex(v).imag] for v in np.ravel(self.psi)]}


def _family_and_state(params, x):
    family = build_family(params)
    x = np.asarray(x, dtype=float)
    space = family.space
    if x.shape != tuple(family.state_shape):
        raise DomainError(f"x has shape {x.shape}, expected {family.state_shape}")
    if space is not None and not space.contains(x):
        raise DomainError("x is not in the state space")
    return family, x


def _finite_result(family, traj, x):
    p = float(traj.p_end)
    q = np.asarray(traj.q_end, dtype=float)
    value = math.exp(p + float(family.inner(q, x)))
    return MomentResult("finite", value, p, q, certificate=traj.certificate, trajectory=traj)


def moment_from_trajectory(family, traj: RiccatiTrajectory, x, start_class) -> MomentResult:
    st = traj.status
    if traj.completed:
        if traj.certificate is MinimalityCertificate.UNKNOWN:
            return MomentResult("indeterminate", reason="solution not certified minimal",
                                trajectory=traj)
        return _finite_result(family, traj, x)
    if start_class is DomainClass.INTERIOR:
        if isinstance(st, BlowUp):
            return MomentResult("infinite", t_plus=st.t_star, reason="Riccati solution blows up",
                                trajectory=traj)
        if isinstance(st, BoundaryContact) and st.ends_lifetime:
            return MomentResult("infinite", t_plus=st.t,
                                reason=f"solution reaches the open boundary {st.description}",
                                trajectory=traj)
    return MomentResult("indeterminate", reason=f"solver ended with {st.kind}", trajectory=traj)


def exp_moment(params, x, y, T, opts: SolveOptions = SolveOptions()) -> MomentResult:
    """Exponential moment ``E^x[exp(<y, X_T>)]`` with a finiteness verdict."""
    family, x = _family_and_state(params, x)
    y = np.asarray(y, dtype=float).reshape(family.state_shape)
    if T == 0:
        return MomentResult("finite", math.exp(float(family.inner(y, x))), 0.0, y,
                            certificate=MinimalityCertificate.FULL_DOMAIN)
    cls = family.domain.classify(y)
    if cls is DomainClass.OUTSIDE or not family.domain.contains(y):
        return MomentResult("infinite", t_plus=0.0, reason="y outside the effective domain")
    traj = solve_extended(family, y, T, opts)
    return moment_from_trajectory(family, traj, x, cls)


def conditional_exponent(params, y, T, t, opts: SolveOptions = SolveOptions()):
    """``(p(T-t, y), q(T-t, y))``: exponent of ``E[exp(<y, X_T>) | F_t]`` in ``X_t``."""
    family = build_family(params)
    if not 0 <= t <= T:
        raise ValueError("need 0 <= t <= T")
    y = np.asarray(y, dtype=float).reshape(family.state_shape)
    full = solve_extended(family, y, T, opts)
    if not full.completed or full.certificate is MinimalityCertificate.UNKNOWN:
        raise UnsupportedError("the moment at horizon T is not certified finite")
    if t == 0:
        return float(full.p_end), full.q_end
    if t == T:
        return 0.0, y.copy()
    part = solve_extended(family, y, T - t, opts)
    return float(part.p_end), part.q_end


def _cf_hypotheses(family, params, u, T, opts):
    """Checks the clauses needed for the complex formula; returns (reason, real trajectory)."""
    if not isinstance(params, FunctionalFamily) and not check_complex_assumption(params):
        return "assumption: alpha is neither zero nor invertible", None
    if family.kind == "raw":
        return "assumption: complex formula needs a canonical or matrix state space", None
    re = np.real(u)
    if family.domain.classify(re) is not DomainClass.INTERIOR:
        return "domain: Re u is not interior to the effective domain", None
    real = solve_extended(family, re, T, opts)
    if not real.completed:
        return f"interior-path: real solution from Re u ends with {real.status.kind}", real
    if not path_is_interior(family, real):
        return "interior-path: real solution from Re u leaves the interior", real
    return None, real


def char_function(params, x, u, T, opts: SolveOptions = SolveOptions()) -> CFResult:
    """``E^x[exp(<u, X_T>)]`` for complex ``u`` via the complex Riccati system."""
    family, x = _family_and_state(params, x)
    u = np.asarray(u, dtype=complex).reshape(family.state_shape)
    reason, real = _cf_hypotheses(family, params, u, T, opts)
    if reason:
        return CFResult("unsupported", reason=reason)
    traj = solve_complex(family, u, T, opts)
    if not traj.completed:
        raise ConvergenceError(f"complex solve ended with {traj.status.kind}",
                               achieved=traj.t_end)
    phi = complex(traj.p_end)
    psi = traj.q_end
    value = np.exp(phi + complex(family.inner(psi, x)))
    bound = math.exp(float(real.p_end) + float(family.inner(real.q_end, x)))
    if abs(value) > bound * (1 + MODULUS_SLACK) + MODULUS_SLACK:
        raise ConvergenceError(f"modulus bound violated: |cf|={abs(value):.17g} > {bound:.17g}")
    return CFResult("value", complex(value), phi, psi, bound=bound)


def char_function_batch(params, x, U, T, opts: SolveOptions = SolveOptions()):
    """Values at a stack of ``u`` (shape ``(k,) + state_shape``) sharing one batched solve.

    Returns ``(values, bounds)``. Hypotheses are checked once per distinct
    ``Re u``; any failure raises UnsupportedError naming the clause.
    """
    family, x = _family_and_state(params, x)
    U = np.asarray(U, dtype=complex).reshape((-1,) + tuple(family.state_shape))
    bounds = np.empty(U.shape[0])
    re_flat = U.real.reshape(U.shape[0], -1)
    uniq, inv = np.unique(re_flat, axis=0, return_inverse=True)
    for k, r in enumerate(uniq):
        reason, real = _cf_hypotheses(family, params, r.reshape(family.state_shape), T, opts)
        if reason:
            raise UnsupportedError(reason)
        bounds[np.ravel(inv) == k] = math.exp(float(real.p_end) + float(family.inner(real.q_end, x)))
    phi, psi = solve_complex_batch(family, U, T, opts)
    vals = np.exp(phi + family.inner(psi, x))
    if np.any(np.abs(vals) > bounds * (1 + MODULUS_SLACK) + MODULUS_SLACK):
        raise ConvergenceError("modulus bound violated in batch")
    return vals, bounds
