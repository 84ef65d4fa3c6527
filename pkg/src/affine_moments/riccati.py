"""Generalized Riccati systems ``p' = F(q)``, ``q' = R(q)``.

The real (extended) and complex systems share one integration path: the
state ``(p, q)`` is flattened into a row and handed to the Dormand-Prince
solver. Leaving the effective domain shows up as non-finite stage values,
which the solver rejects; a collapsing step size is then classified as a
blow-up (large norm), a boundary contact (close to a half-space of the
domain) or a genuine convergence failure.
"""
from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .domain import DomainClass
from .errors import ConvergenceError, DomainError, UnsupportedError
from .integrator import IntegrationResult, dopri54
from .levy import FunctionalFamily, build_family
from .state_space import AffineParams

INTERP_NODES = 8
BOUNDARY_TOL = 1e-9
# a step collapse this close in time to a face is read as contact
NEAR_BOUNDARY = 1e-8


@dataclass(frozen=True)
class SolveOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    blowup_norm_threshold: float = 1e8
    min_step_factor: float = 1e-12
    dense_output: bool = True
    max_steps: int = 200_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.blowup_norm_threshold > 1:
            raise ValueError("blowup_norm_threshold must exceed 1")


class MinimalityCertificate(enum.Enum):
    DIFFUSION = "diffusion"
    FULL_DOMAIN = "full_domain"
    OPEN_DOMAIN = "open_domain"
    INTERIOR_PATH = "interior_path"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Completed:
    kind = "completed"

    def to_json(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class BlowUp:
    t_star: float
    bracket: float
    kind = "blow_up"

    def to_json(self):
        return {"kind": self.kind, "t_star": self.t_star, "bracket": self.bracket}


@dataclass(frozen=True)
class BoundaryContact:
    t: float
    description: str
    ends_lifetime: bool = False
    kind = "boundary_contact"

    def to_json(self):
        return {"kind": self.kind, "t": self.t, "boundary": self.description,
                "ends_lifetime": self.ends_lifetime}


@dataclass(frozen=True)
class DomainExit:
    t: float
    kind = "domain_exit"

    def to_json(self):
        return {"kind": self.kind, "t": self.t}


Status = Union[Completed, BlowUp, BoundaryContact, DomainExit]


@dataclass(frozen=True, eq=False)
class RiccatiTrajectory:
    """Solution samples on the accepted step grid, with dense evaluation via ``at``."""

    times: np.ndarray
    p: np.ndarray
    q: np.ndarray  # (n_times,) + state_shape
    status: Status
    certificate: MinimalityCertificate
    horizon: float
    result: Optional[IntegrationResult] = field(default=None, repr=False)
    error_estimate: float = 0.0

    @property
    def is_complex(self):
        return np.iscomplexobj(self.q)

    @property
    def completed(self):
        return isinstance(self.status, Completed)

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def p_end(self):
        return self.p[-1]

    @property
    def q_end(self):
        return self.q[-1]

    def at(self, t):
        """``(p(t), q(t))`` from the continuous extension."""
        if self.result is None or not self.result.steps:
            k = int(np.argmin(np.abs(self.times - t)))
            return self.p[k], self.q[k]
        if t < 0 or t > self.t_end * (1 + 1e-14):
            raise ValueError(f"t={t} outside the solved range [0, {self.t_end}]")
        row = self.result.dense(t)[0]
        return row[0], row[1:].reshape(self.q.shape[1:])

    def sample_nodes(self, nodes=INTERP_NODES):
        """Times at every step end plus ``nodes`` interior points per step."""
        if self.result is None or not self.result.steps:
            return self.times
        out = [0.0]
        for s in self.result.steps:
            out.extend(s.t + s.h * np.arange(1, nodes + 1) / (nodes + 1))
            out.append(s.t + s.h)
        return np.array(out)

    def dense_q(self, times):
        """``q`` at many times, one dense evaluation per step."""
        res = self.result
        if res is None or not res.steps:
            return np.array([self.at(t)[1] for t in times])
        starts = np.array([s.t for s in res.steps])
        idx = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(res.steps) - 1)
        out = np.empty((len(times),) + self.q.shape[1:], dtype=self.q.dtype)
        for k in np.unique(idx):
            sel = np.nonzero(idx == k)[0]
            s = res.steps[k]
            vals = s.at((np.asarray(times)[sel] - s.t) / s.h)[:, 0, 1:]
            out[sel] = vals.reshape((len(sel),) + self.q.shape[1:])
        return out

    def to_json(self):
        def num(z):
            z = complex(z)
            return z.real if not self.is_complex else [z.real, z.imag]

        return {
            "status": self.status.to_json(),
            "certificate": self.certificate.value,
            "horizon": self.horizon,
            "t_end": self.t_end,
            "p": num(self.p_end),
            "q": [num(v) for v in np.ravel(self.q_end)],
            "n_steps": int(len(self.times) - 1),
            "error_estimate": self.error_estimate,
        }

    def to_csv(self, fh=None):
        """Columns ``t, p, q_1..`` (``re``/``im`` pairs for complex); status as a JSON footer."""
        buf = fh if fh is not None else io.StringIO()
        qf = self.q.reshape(len(self.times), -1)
        if self.is_complex:
            cols = ["t", "p_re", "p_im"] + [f"q_{k + 1}_{part}" for k in range(qf.shape[1])
                                            for part in ("re", "im")]
        else:
            cols = ["t", "p"] + [f"q_{k + 1}" for k in range(qf.shape[1])]
        buf.write(",".join(cols) + "\n")
        for t, p, q in zip(self.times, self.p, qf):
            vals = [t]
            if self.is_complex:
                vals += [p.real, p.imag]
                for v in q:
                    vals += [v.real, v.imag]
            else:
                vals += [p] + list(q)
            buf.write(",".join(f"{float(v):.17g}" for v in vals) + "\n")
        buf.write("# " + json.dumps(self.to_json()) + "\n")
        if fh is None:
            return buf.getvalue()
        return None


ComplexTrajectory = RiccatiTrajectory


# -- helpers -----------------------------------------------------------------------


def as_family(obj) -> FunctionalFamily:
    return build_family(obj)


def _vector_field(family: FunctionalFamily):
    shape = family.state_shape

    def fun(t, Y):
        q = Y[:, 1:].reshape((Y.shape[0],) + shape)
        with np.errstate(all="ignore"):
            dp = family.F(q)
            dq = family.R(q)
        out = np.empty(Y.shape, dtype=np.result_type(Y, dp, dq))
        out[:, 0] = dp
        out[:, 1:] = np.asarray(dq).reshape(Y.shape[0], -1)
        return out

    return fun


def _certificate(family: FunctionalFamily, path_interior: Optional[bool]):
    if not family.has_jumps:
        return MinimalityCertificate.DIFFUSION
    dom = family.domain
    if dom.is_full_space:
        return MinimalityCertificate.FULL_DOMAIN
    if dom.is_open:
        return MinimalityCertificate.OPEN_DOMAIN
    if path_interior and not dom.callbacks:
        return MinimalityCertificate.INTERIOR_PATH
    return MinimalityCertificate.UNKNOWN


def _interior_rows(family, qs_real):
    """Boolean per row of ``qs_real`` (shape ``(k,) + state_shape``): strictly interior?"""
    dom = family.domain
    n = qs_real.shape[0]
    flat = qs_real.reshape(n, -1)
    ok = np.ones(n, dtype=bool)
    if dom.half_spaces:
        ok &= dom.interior_mask(flat)
    for cb in dom.callbacks:
        ok &= np.array([cb.classify(r) is DomainClass.INTERIOR for r in flat])
    return ok


def path_is_interior(family, traj: RiccatiTrajectory) -> bool:
    """Interior test at step ends plus interpolation nodes."""
    if family.domain.is_full_space:
        return True
    times = traj.sample_nodes()
    qs = np.real(traj.dense_q(times))
    return bool(np.all(_interior_rows(family, qs)))


def _blowup_estimate(family, q):
    """Remaining lifetime ``|q|^2 / <q, R(q)>`` from the current state."""
    qb = np.asarray(q)[None]
    with np.errstate(all="ignore"):
        r = np.asarray(family.R(qb))[0]
    num = float(np.sum(np.abs(q) ** 2))
    den = float(np.real(np.sum(np.conj(q) * r)))
    if not np.isfinite(den) or den <= 0:
        return 0.0
    return num / den


def _time_to_face(family, q):
    """Time for ``q`` to reach its nearest face, assuming a square-root approach.

    Near a face where the jump integral diverges like ``1/dist`` the
    solution satisfies ``dist^2 ~ 2c (t_hit - t)``, so the remaining time is
    ``dist / (2 * outward speed)``. Returns inf when moving inward.
    """
    dom = family.domain
    qr = np.real(np.asarray(q))
    h = dom.nearest_constraint(qr)
    if h is None:
        return math.inf
    with np.errstate(all="ignore"):
        r = np.real(np.asarray(family.R(np.asarray(q)[None]))[0])
    n = np.asarray(h.normal, dtype=float)
    speed = float(np.sum(n * r)) / float(np.linalg.norm(n))
    if not np.isfinite(speed) or speed <= 0:
        return math.inf
    return dom.distance_to_boundary(qr) / (2 * speed)


def _check_start(family, y_real, complex_mode):
    dom = family.domain
    cls = dom.classify(y_real)
    if complex_mode:
        if cls is not DomainClass.INTERIOR:
            raise DomainError(f"Re u is not interior to the effective domain ({dom.describe()})")
        return cls
    if cls is DomainClass.OUTSIDE or not dom.contains(y_real):
        raise DomainError(f"y lies outside the effective domain ({dom.describe()})")
    return cls


def _solve(family, y0, T, opts: SolveOptions, complex_mode: bool) -> RiccatiTrajectory:
    shape = family.state_shape
    dtype = complex if complex_mode else float
    y0 = np.asarray(y0, dtype=dtype).reshape(shape)
    start_class = _check_start(family, np.real(y0), complex_mode)
    fun = _vector_field(family)
    row = np.concatenate([[0.0], y0.ravel()]).astype(dtype)
    dom = family.domain
    threshold = opts.blowup_norm_threshold

    def monitor(step, t, Y):
        q = Y[0, 1:]
        if not dom.half_spaces and not dom.callbacks:
            return None
        qr = np.real(q)
        if complex_mode:
            if not _interior_rows(family, qr.reshape((1,) + shape))[0]:
                return DomainExit(t)
            return None
        if dom.half_spaces:
            dist = dom.distance_to_boundary(qr)
            if dist < BOUNDARY_TOL and float(np.linalg.norm(qr - np.real(y0).ravel())) > 0:
                h = dom.nearest_constraint(qr)
                return BoundaryContact(t, h.describe(), h.strict)
        for cb in dom.callbacks:
            if cb.classify(qr) is DomainClass.OUTSIDE:
                return DomainExit(t)
        return None

    res = dopri54(fun, T, row[None, :], rtol=opts.rel_tol, atol=opts.abs_tol,
                  max_step=opts.max_step, min_step=opts.min_step_factor * max(T, 1e-300),
                  monitor=monitor, max_steps=opts.max_steps, keep_steps=opts.dense_output)
    times = res.t
    Y = res.y[:, 0, :]
    p = Y[:, 0]
    q = Y[:, 1:].reshape((len(times),) + shape)
    if not complex_mode:
        p, q = p.real, q.real
    t_last = float(times[-1])
    q_last = q[-1].ravel()

    if res.status == "completed":
        status = Completed()
    elif res.status == "stopped":
        status = res.stop_info
    elif res.status == "max_steps":
        raise ConvergenceError(f"step budget exhausted at t={t_last:.6g} of {T:.6g}",
                               achieved=t_last)
    else:  # step collapse
        norm = float(np.linalg.norm(q_last))
        if norm > threshold:
            rem = _blowup_estimate(family, q[-1])
            status = BlowUp(t_last + rem, rem)
        elif dom.half_spaces and (res.nonfinite
                                  or _time_to_face(family, q[-1]) < NEAR_BOUNDARY * max(T, 1.0)):
            h = dom.nearest_constraint(np.real(q_last))
            if complex_mode:
                status = DomainExit(t_last)
            else:
                t_hit = t_last if res.nonfinite else t_last + _time_to_face(family, q[-1])
                status = BoundaryContact(t_hit, h.describe(), h.strict)
        elif res.nonfinite:
            status = DomainExit(t_last)
        else:
            raise ConvergenceError(f"step size collapsed at t={t_last:.6g} with |q|={norm:.3g}",
                                   achieved=t_last)

    traj = RiccatiTrajectory(times, p, q, status, MinimalityCertificate.UNKNOWN, float(T), res,
                             res.err_estimate)
    if isinstance(status, Completed):
        if start_class is DomainClass.BOUNDARY:
            interior = False
        elif complex_mode:
            interior = True  # monitored at every accepted step
        else:
            interior = path_is_interior(family, traj)
        cert = _certificate(family, interior)
        if complex_mode and cert is MinimalityCertificate.UNKNOWN and interior:
            cert = MinimalityCertificate.INTERIOR_PATH
    else:
        cert = MinimalityCertificate.UNKNOWN
    return RiccatiTrajectory(times, p, q, status, cert, float(T), res, res.err_estimate)


# -- public operations -------------------------------------------------------------


def solve_extended(family, y, T, opts: SolveOptions = SolveOptions()) -> RiccatiTrajectory:
    """Integrate the real system from ``q(0) = y``, ``p(0) = 0`` up to ``T``."""
    family = as_family(family)
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    return _solve(family, np.asarray(y, dtype=float), float(T), opts, complex_mode=False)


def solve_complex(family, u, T, opts: SolveOptions = SolveOptions()) -> ComplexTrajectory:
    """Integrate ``phi' = F(psi)``, ``psi' = R(psi)`` from ``psi(0) = u``."""
    family = as_family(family)
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    return _solve(family, np.asarray(u, dtype=complex), float(T), opts, complex_mode=True)


def solve_complex_batch(family, U, T, opts: SolveOptions = SolveOptions()):
    """Terminal ``(phi, psi)`` for a stack of initial values integrated together.

    ``U`` has shape ``(k,) + state_shape``. The batch shares one step-size
    sequence controlled by its worst row. Any row leaving the open strip
    raises DomainError.
    """
    family = as_family(family)
    shape = family.state_shape
    U = np.asarray(U, dtype=complex).reshape((-1,) + shape)
    k = U.shape[0]
    if not np.all(_interior_rows(family, U.real)):
        raise DomainError("Re u is not interior to the effective domain for some rows")
    rows = np.concatenate([np.zeros((k, 1), complex), U.reshape(k, -1)], axis=1)
    fun = _vector_field(family)

    def monitor(step, t, Y):
        qs = Y[:, 1:].real.reshape((k,) + shape)
        if not family.domain.is_full_space and not np.all(_interior_rows(family, qs)):
            return DomainExit(t)
        if np.max(np.abs(Y)) > opts.blowup_norm_threshold:
            return BlowUp(t, math.nan)
        return None

    res = dopri54(fun, float(T), rows, rtol=opts.rel_tol, atol=opts.abs_tol,
                  max_step=opts.max_step, min_step=opts.min_step_factor * max(T, 1e-300),
                  monitor=monitor, max_steps=opts.max_steps, keep_steps=False)
    if res.status != "completed":
        info = res.stop_info
        if isinstance(info, DomainExit) or res.nonfinite:
            raise DomainError(f"complex solution left the open strip at t={res.t[-1]:.6g}")
        raise ConvergenceError(f"batched complex solve stopped ({res.status}) at t={res.t[-1]:.6g}",
                               achieved=float(res.t[-1]))
    last = res.y[-1]
    return last[:, 0], last[:, 1:].reshape((k,) + shape)


@dataclass(frozen=True)
class ExplosionVerdict:
    """``kind`` is ``"finite"``, ``"exceeds_horizon"`` or ``"indeterminate"``."""

    kind: str
    t_plus: float
    tol: float
    certificate: MinimalityCertificate = MinimalityCertificate.UNKNOWN
    reason: str = ""

    @property
    def is_finite(self):
        return self.kind == "finite"

    def to_json(self):
        return {"verdict": self.kind, "t_plus": self.t_plus, "tol": self.tol,
                "certificate": self.certificate.value, "reason": self.reason}


def _lifetime_end(traj):
    """Time at which the solution's maximal lifetime ends, or None if it did not."""
    st = traj.status
    if isinstance(st, BlowUp):
        return st.t_star, st.bracket
    if isinstance(st, BoundaryContact) and st.ends_lifetime:
        return st.t, 0.0
    return None


def explosion_time(family, y, t_max, tol=1e-6, opts: SolveOptions = SolveOptions()) -> ExplosionVerdict:
    """Maximal lifetime ``T_+(y)`` of the real solution, searched up to ``t_max``.

    The integrator halts at the blow-up itself, so one solve to ``t_max``
    either completes or brackets ``T_+``; bisection tightens the bracket
    when the local blow-up estimate is wider than ``tol``.
    """
    family = as_family(family)
    y = np.asarray(y, dtype=float)
    dom = family.domain
    cls = dom.classify(y)
    if cls is DomainClass.OUTSIDE or not dom.contains(y):
        return ExplosionVerdict("finite", 0.0, 0.0, reason="y outside the effective domain")
    traj = solve_extended(family, y, t_max, opts)
    if traj.completed:
        return ExplosionVerdict("exceeds_horizon", float(t_max), tol, traj.certificate)
    end = _lifetime_end(traj)
    if end is None:
        return ExplosionVerdict("indeterminate", traj.t_end, tol, MinimalityCertificate.UNKNOWN,
                                reason=f"solver stopped with status {traj.status.kind}")
    t_star, width = end
    if cls is DomainClass.BOUNDARY:
        return ExplosionVerdict("indeterminate", t_star, width, MinimalityCertificate.UNKNOWN,
                                reason="y on the boundary of the effective domain")
    lo, hi = traj.t_end, max(t_star + width, traj.t_end)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        sub = solve_extended(family, y, mid, opts)
        if sub.completed:
            lo = mid
        else:
            e = _lifetime_end(sub)
            hi = min(hi, e[0] + e[1]) if e else mid
            lo = max(lo, sub.t_end)
            if e and e[1] <= tol:
                return ExplosionVerdict("finite", e[0], e[1], _certificate(family, True))
    est = min(max(t_star, lo), hi)
    return ExplosionVerdict("finite", est, max(hi - lo, width) if hi - lo > tol else hi - lo,
                            _certificate(family, True))


def verify_semiflow(family, traj: RiccatiTrajectory, split_points,
                    opts: SolveOptions = SolveOptions()) -> float:
    """Max residual of ``p(T) = p(T-t) + p(t, q(T-t))`` and ``q(T) = q(t, q(T-t))``."""
    family = as_family(family)
    if not traj.completed:
        raise UnsupportedError("semiflow check needs a completed trajectory")
    T = traj.horizon
    y = traj.q[0]
    solver = solve_complex if traj.is_complex else solve_extended
    worst = 0.0
    for t in split_points:
        t = float(t)
        if t <= 0 or t >= T:
            continue  # identities hold exactly at the ends
        first = solver(family, y, T - t, opts)
        second = solver(family, first.q_end, t, opts)
        rp = abs(traj.p_end - first.p_end - second.p_end)
        rq = float(np.max(np.abs(traj.q_end - second.q_end)))
        worst = max(worst, rp, rq)
    return worst


def comparison_check(family, u, T, opts: SolveOptions = SolveOptions()) -> float:
    """``min over t, i in I`` of ``q_i(t, Re u) - Re psi_i(t, u)``."""
    family = as_family(family)
    params = family.params
    if not isinstance(params, AffineParams):
        raise UnsupportedError("comparison check is defined on canonical state spaces")
    I = list(params.space.I)
    u = np.asarray(u, dtype=complex)
    real = solve_extended(family, u.real, T, opts)
    cplx = solve_complex(family, u, T, opts)
    if not real.completed:
        raise UnsupportedError("real solution does not reach the horizon")
    if not cplx.completed:
        raise UnsupportedError("complex solution does not reach the horizon")
    if not I:
        return 0.0
    times = np.unique(np.concatenate([real.times, cplx.times]))
    qr = real.dense_q(times)[:, I]
    qc = cplx.dense_q(times)[:, I].real
    return float(np.min(qr - qc))
