"""Explicit Runge-Kutta integrators for the Riccati systems.

``dopri54`` is the Dormand-Prince 5(4) pair with its quartic continuous
extension. It works on real or complex state arrays of shape
``(batch, n)``; the error norm is the worst per-row RMS, so a batch of
independent systems is integrated to the same accuracy as each alone.
Stages that evaluate to inf/nan (the vector field left its domain) cause
the step to be rejected and shrunk rather than aborting the solve.

``rk4_fixed`` is the classical fixed-step method, kept as an independent
oracle for the adaptive path.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# continuous extension: y(t + th h) = y + h * sum_j K_j * (P_j . [th, th^2, th^3, th^4])
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@dataclass
class Step:
    t: float
    h: float
    y: np.ndarray
    K: np.ndarray  # (7, batch, n)

    def at(self, theta):
        theta = np.asarray(theta, dtype=float)
        powers = np.stack([theta, theta ** 2, theta ** 3, theta ** 4], axis=-1)  # (..., 4)
        coef = powers @ P.T  # (..., 7)
        return self.y + self.h * np.tensordot(coef, self.K, axes=(-1, 0))


@dataclass
class IntegrationResult:
    t: np.ndarray
    y: np.ndarray  # (n_points, batch, n)
    steps: list
    status: str  # "completed" | "collapse" | "stopped" | "max_steps"
    h_last: float = 0.0
    nonfinite: bool = False
    stop_info: object = None
    n_rejected: int = 0
    err_estimate: float = 0.0  # accumulated |local error| estimate, max over components

    def dense(self, t):
        """Interpolated state at scalar time ``t`` within the integrated range."""
        if not self.steps:
            return self.y[0]
        ts = np.array([s.t for s in self.steps])
        k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(self.steps) - 1))
        s = self.steps[k]
        return s.at((t - s.t) / s.h)


def _norm(x, scale):
    r = np.abs(x) / scale
    return float(np.max(np.sqrt(np.mean(r * r, axis=-1))))


def _finite(x):
    return bool(np.all(np.isfinite(x)))


def _initial_step(fun, t0, y0, f0, rtol, atol, span):
    scale = atol + np.abs(y0) * rtol
    d0 = _norm(y0, scale)
    d1 = _norm(f0, scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    for _ in range(60):
        y1 = y0 + h0 * f0
        f1 = fun(t0 + h0, y1)
        if _finite(f1):
            break
        h0 *= 0.1
    d2 = _norm(f1 - f0, scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def dopri54(fun: Callable, t_end: float, y0, *, rtol=1e-10, atol=1e-12, max_step=np.inf,
            min_step=0.0, monitor: Optional[Callable] = None, max_steps=500_000,
            keep_steps=True) -> IntegrationResult:
    """Integrate ``y' = fun(t, y)`` from 0 to ``t_end``.

    ``monitor(step_old, t_new, y_new)`` runs after each accepted step; a
    non-None return stops the integration with status ``"stopped"``.
    Status ``"collapse"`` means the step size fell below ``min_step``.
    """
    y = np.array(y0, dtype=np.result_type(y0, float))
    if y.ndim == 1:
        y = y[None, :]
    t = 0.0
    ts, ys, steps = [t], [y.copy()], []
    if t_end <= 0:
        return IntegrationResult(np.array(ts), np.array(ys), steps, "completed")
    f = fun(t, y)
    if not _finite(f):
        return IntegrationResult(np.array(ts), np.array(ys), steps, "collapse", 0.0, True)
    h = min(_initial_step(fun, t, y, f, rtol, atol, t_end), max_step)
    K = np.empty((7,) + y.shape, dtype=np.result_type(y, f))
    rejected_last = False
    n_rej = 0
    nonfinite = False
    err_acc = 0.0
    for _ in range(max_steps):
        h = min(h, max_step, t_end - t)
        if h < min_step and t_end - t > min_step:
            return IntegrationResult(np.array(ts), np.array(ys), steps, "collapse", h, nonfinite,
                                     n_rejected=n_rej, err_estimate=err_acc)
        K[0] = f
        ok = True
        for s in range(1, 7):
            dy = sum(a * K[j] for j, a in enumerate(A[s]) if a != 0)
            K[s] = fun(t + C[s] * h, y + h * dy)
            if not _finite(K[s]):
                ok = False
                break
        if not ok:
            nonfinite = True
            n_rej += 1
            h *= 0.25
            rejected_last = True
            continue
        y_new = y + h * np.tensordot(B5, K, axes=(0, 0))
        err_vec = h * np.tensordot(E, K, axes=(0, 0))
        scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
        err = _norm(err_vec, scale)
        if not np.isfinite(err):
            nonfinite = True
            n_rej += 1
            h *= 0.25
            rejected_last = True
            continue
        if err > 1.0:
            n_rej += 1
            h *= max(MIN_FACTOR, SAFETY * err ** (-1 / 5))
            rejected_last = True
            continue
        nonfinite = False
        step = Step(t, h, y, K.copy())
        t_new = t + h if t_end - (t + h) > 1e-15 * max(1.0, t_end) else t_end
        err_acc += float(np.max(np.abs(err_vec)))
        if keep_steps:
            steps.append(step)
        y = y_new
        t = t_new
        ts.append(t)
        ys.append(y.copy())
        f = K[6]
        factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** (-1 / 5))
        if rejected_last:
            factor = min(1.0, factor)
        rejected_last = False
        h *= factor
        if monitor is not None:
            info = monitor(step, t, y)
            if info is not None:
                return IntegrationResult(np.array(ts), np.array(ys), steps, "stopped", h,
                                         stop_info=info, n_rejected=n_rej, err_estimate=err_acc)
        if t >= t_end:
            return IntegrationResult(np.array(ts), np.array(ys), steps, "completed", h,
                                     n_rejected=n_rej, err_estimate=err_acc)
    return IntegrationResult(np.array(ts), np.array(ys), steps, "max_steps", h,
                             n_rejected=n_rej, err_estimate=err_acc)


def rk4_fixed(fun: Callable, t_end: float, y0, n_steps: int, *, stop_norm=np.inf,
              norm_slice=slice(None)):
    """Classical RK4 with ``n_steps`` equal steps.

    Returns ``(t_reached, y)``; integration halts early once the norm of
    ``y[norm_slice]`` exceeds ``stop_norm`` or a stage becomes non-finite.
    """
    y = np.array(y0, dtype=np.result_type(y0, float))
    h = t_end / n_steps
    t = 0.0
    for _ in range(n_steps):
        k1 = fun(t, y)
        k2 = fun(t + h / 2, y + h / 2 * k1)
        k3 = fun(t + h / 2, y + h / 2 * k2)
        k4 = fun(t + h, y + h * k3)
        y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not _finite(y_new) or np.linalg.norm(y_new[..., norm_slice]) > stop_norm:
            return t, y
        y = y_new
        t += h
    return t, y
