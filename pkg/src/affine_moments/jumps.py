"""Jump measure specifications.

Every measure ``nu`` knows how to evaluate its compensated exponential
integral

    I(u) = int (exp(<xi, u>) - 1 - <h(xi), u>) nu(dxi),   h(xi) = xi 1{|xi| <= 1},

for real or complex ``u`` (vectorised over leading axes), the effective
domain of its exponential tail, and the moment quantities needed by the
admissibility checks, the growth estimate and the Monte Carlo sampler.

Matrix-cone measures live in :class:`MatrixPointMasses`; they are finite
variation, so no truncation is used there.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, stats

from .domain import DomainClass, DomainY, HalfSpace
from .errors import StructuralError, UnsupportedError

_QUAD_REL = 1e-10


def _is_complex(u):
    return np.iscomplexobj(u)


def _real_outside(u, domain: DomainY):
    """Boolean mask over the batch: real part of ``u`` not in the domain."""
    re = np.real(u)
    batch = re.shape[:-1]
    mask = np.zeros(batch, dtype=bool)
    if domain.is_full_space:
        return mask
    s = domain.slacks(re)
    if s is not None:
        strict = np.array([h.strict for h in domain.half_spaces])
        bad = (s < 0) | ((s == 0) & strict)
        mask |= np.any(bad, axis=-1)
    if domain.callbacks:
        flat = re.reshape(-1, re.shape[-1])
        extra = np.array([not domain.contains(p) for p in flat], dtype=bool).reshape(batch)
        mask |= extra
    return mask


class JumpMeasure:
    """Base class; subclasses override the closed-form pieces."""

    dim: int
    finite_activity = True

    @property
    def is_zero(self):
        return False

    # -- Levy-Khintchine pieces ---------------------------------------------
    def tail_domain(self) -> DomainY:
        return DomainY.full()

    def integral(self, u):
        raise NotImplementedError

    def truncated_mean(self):
        """``int h(xi) nu(dxi)`` as a vector (entries may be inf)."""
        raise NotImplementedError

    def small_abs_moment(self, coords):
        """``int_{|xi|<=1} |xi_S| nu(dxi)`` for the coordinate set S."""
        raise NotImplementedError

    def levy_integrable(self) -> bool:
        return True

    def total_mass(self) -> float:
        raise NotImplementedError

    def large_mass(self) -> float:
        """``nu(|xi| > 1)``."""
        raise NotImplementedError

    def tail_exp_integral(self, y):
        """Upper bound for ``int_{|xi|>1} exp(<xi, y>) nu(dxi)``, vectorised in y."""
        raise NotImplementedError

    def support_violation(self, m: int) -> Optional[str]:
        """Message if the support leaves R_{>=0}^m x R^n, else None."""
        return None

    def sample(self, rng, size):
        raise UnsupportedError(f"{type(self).__name__} cannot be sampled")

    def lift(self, pad: int) -> "JumpMeasure":
        raise NotImplementedError

    def to_json(self):
        raise UnsupportedError(f"{type(self).__name__} has no JSON form")

    def scaled(self, c: float) -> "JumpMeasure":
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroMeasure(JumpMeasure):
    dim: int = 1

    @property
    def is_zero(self):
        return True

    def integral(self, u):
        u = np.asarray(u)
        return np.zeros(u.shape[:-1], dtype=u.dtype if _is_complex(u) else float)

    def truncated_mean(self):
        return np.zeros(self.dim)

    def small_abs_moment(self, coords):
        return 0.0

    def total_mass(self):
        return 0.0

    def large_mass(self):
        return 0.0

    def tail_exp_integral(self, y):
        return np.zeros(np.shape(y)[:-1])

    def sample(self, rng, size):
        return np.zeros((size, self.dim))

    def lift(self, pad):
        return ZeroMeasure(self.dim + pad)

    def to_json(self):
        return {"type": "zero"}

    def scaled(self, c):
        return self


@dataclass(frozen=True, eq=False)
class PointMassMixture(JumpMeasure):
    """``sum_k w_k delta_{xi_k}`` with ``w_k > 0`` and ``xi_k != 0``."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        loc = np.atleast_2d(np.asarray(self.locations, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if loc.shape[0] != w.shape[0]:
            raise StructuralError("point masses: locations and weights differ in length")
        if np.any(w <= 0):
            raise StructuralError("point masses: weights must be positive")
        if np.any(np.all(loc == 0, axis=1)):
            raise StructuralError("point masses: an atom at the origin is not a jump")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.locations.shape[1]

    def _small(self):
        return np.linalg.norm(self.locations, axis=1) <= 1.0

    def integral(self, u):
        u = np.asarray(u)
        z = u @ self.locations.T  # batch + (k,)
        trunc = z * self._small()
        return (np.exp(z) - 1.0 - trunc) @ self.weights

    def truncated_mean(self):
        return (self.weights * self._small()) @ self.locations

    def small_abs_moment(self, coords):
        coords = list(coords)
        if not coords:
            return 0.0
        sub = np.linalg.norm(self.locations[:, coords], axis=1)
        return float(np.sum(self.weights * self._small() * sub))

    def total_mass(self):
        return float(self.weights.sum())

    def large_mass(self):
        return float(np.sum(self.weights[~self._small()]))

    def tail_exp_integral(self, y):
        big = ~self._small()
        z = np.asarray(y) @ self.locations[big].T
        return np.exp(z) @ self.weights[big]

    def support_violation(self, m):
        if m and np.any(self.locations[:, :m] < 0):
            return "an atom has a negative coordinate among the nonnegative block"
        return None

    def sample(self, rng, size):
        p = self.weights / self.weights.sum()
        idx = rng.choice(len(p), size=size, p=p)
        return self.locations[idx]

    def lift(self, pad):
        loc = np.hstack([self.locations, np.zeros((len(self.weights), pad))])
        return PointMassMixture(loc, self.weights)

    def to_json(self):
        return {
            "type": "point_mass",
            "atoms": [{"location": list(map(float, l)), "weight": float(w)}
                      for l, w in zip(self.locations, self.weights)],
        }

    def scaled(self, c):
        return PointMassMixture(self.locations, self.weights * c)


@dataclass(frozen=True)
class OneSidedExponential(JumpMeasure):
    """Positive jumps in a single coordinate, sizes Exp(rate), total mass ``intensity``.

    Density ``intensity * rate * exp(-rate * s)`` for ``s > 0`` along ``e_coordinate``.
    """

    dim: int
    coordinate: int
    rate: float
    intensity: float

    def __post_init__(self):
        if not 0 <= self.coordinate < self.dim:
            raise StructuralError("exponential jumps: coordinate index out of range")
        if self.rate <= 0 or self.intensity <= 0:
            raise StructuralError("exponential jumps: rate and intensity must be positive")

    @property
    def _m1(self):
        th = self.rate
        # int_0^1 s th e^{-th s} ds
        return -(math.expm1(-th) + th * math.exp(-th)) / th

    def tail_domain(self):
        normal = [0.0] * self.dim
        normal[self.coordinate] = 1.0
        return DomainY.from_half_spaces([HalfSpace(tuple(normal), float(self.rate), True)])

    def integral(self, u):
        u = np.asarray(u)
        w = u[..., self.coordinate]
        th, c = self.rate, self.intensity
        if _is_complex(u):
            bad = np.real(w) >= th
            ws = np.where(bad, 0.0, w)
            out = c * (ws / (th - ws)) - c * ws * self._m1
            return np.where(bad, np.nan + 0j, out)
        bad = w >= th
        ws = np.where(bad, 0.0, w)
        out = c * (ws / (th - ws)) - c * ws * self._m1
        return np.where(bad, np.inf, out)

    def truncated_mean(self):
        v = np.zeros(self.dim)
        v[self.coordinate] = self.intensity * self._m1
        return v

    def small_abs_moment(self, coords):
        return self.intensity * self._m1 if self.coordinate in set(coords) else 0.0

    def total_mass(self):
        return float(self.intensity)

    def large_mass(self):
        return float(self.intensity * math.exp(-self.rate))

    def tail_exp_integral(self, y):
        w = np.asarray(y)[..., self.coordinate]
        th, c = self.rate, self.intensity
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            out = c * th * np.exp(w - th) / (th - w)
        return np.where(w < th, out, np.inf)

    def sample(self, rng, size):
        out = np.zeros((size, self.dim))
        out[:, self.coordinate] = rng.exponential(1.0 / self.rate, size=size)
        return out

    def lift(self, pad):
        return OneSidedExponential(self.dim + pad, self.coordinate, self.rate, self.intensity)

    def to_json(self):
        return {"type": "exponential", "coordinate": self.coordinate,
                "rate": self.rate, "intensity": self.intensity}

    def scaled(self, c):
        return OneSidedExponential(self.dim, self.coordinate, self.rate, self.intensity * c)


def _gaussian_truncated_mean(mean, cov):
    """``E[xi 1{|xi| <= 1}]`` and ``P(|xi| <= 1)`` for xi ~ N(mean, cov)."""
    vals, vecs = np.linalg.eigh(cov)
    keep = vals > 1e-14 * max(1.0, float(vals.max(initial=0.0)))
    rank = int(keep.sum())
    if rank == 0:
        inside = float(np.linalg.norm(mean) <= 1.0)
        return mean * inside, inside
    L = vecs[:, keep] * np.sqrt(vals[keep])
    if rank == 1:
        # xi = mean + L z along one direction; |xi| <= 1 is an interval in z
        l = L[:, 0]
        A = l @ l
        B = 2.0 * mean @ l
        C = mean @ mean - 1.0
        disc = B * B - 4 * A * C
        if disc <= 0:
            return np.zeros_like(mean), 0.0
        r = math.sqrt(disc)
        z1, z2 = (-B - r) / (2 * A), (-B + r) / (2 * A)
        prob = stats.norm.cdf(z2) - stats.norm.cdf(z1)
        ez = stats.norm.pdf(z1) - stats.norm.pdf(z2)  # E[z 1{z1<z<z2}]
        return mean * prob + l * ez, float(prob)
    if rank == 2:
        def weight(z2, z1, k):
            z = np.array([z1, z2])
            xi = mean + L @ z
            if xi @ xi > 1.0:
                return 0.0
            dens = math.exp(-0.5 * (z @ z)) / (2 * math.pi)
            return dens * (1.0 if k < 0 else xi[k])

        lim = 9.0
        pts = []
        for k in [-1] + list(range(len(mean))):
            val, _ = integrate.nquad(weight, [[-lim, lim], [-lim, lim]], args=(k,),
                                     opts={"epsabs": 1e-12, "epsrel": 1e-9, "limit": 100})
            pts.append(val)
        return np.array(pts[1:]), float(pts[0])
    raise UnsupportedError("Gaussian jumps with more than two independent directions")


@dataclass(frozen=True, eq=False)
class GaussianJumps(JumpMeasure):
    """``intensity * N(mean, cov)``; support confined to the real-valued block."""

    mean: np.ndarray
    cov: np.ndarray
    intensity: float

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise StructuralError("Gaussian jumps: covariance shape does not match mean")
        if not np.allclose(cov, cov.T):
            raise StructuralError("Gaussian jumps: covariance must be symmetric")
        if self.intensity <= 0:
            raise StructuralError("Gaussian jumps: intensity must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        tm, p_small = _gaussian_truncated_mean(mean, cov)
        object.__setattr__(self, "_tmean", tm)
        object.__setattr__(self, "_p_small", p_small)

    @property
    def dim(self):
        return self.mean.size

    def integral(self, u):
        u = np.asarray(u)
        quad = 0.5 * np.einsum("...i,ij,...j->...", u, self.cov, u)
        return self.intensity * (np.exp(u @ self.mean + quad) - 1.0 - u @ self._tmean)

    def truncated_mean(self):
        return self.intensity * self._tmean

    def small_abs_moment(self, coords):
        # finite measure: bounded by the mass of the unit ball
        return self.intensity * self._p_small if list(coords) else 0.0

    def total_mass(self):
        return float(self.intensity)

    def large_mass(self):
        return float(self.intensity * (1.0 - self._p_small))

    def tail_exp_integral(self, y):
        y = np.asarray(y)
        quad = 0.5 * np.einsum("...i,ij,...j->...", y, self.cov, y)
        return self.intensity * np.exp(y @ self.mean + quad)

    def support_violation(self, m):
        if m and (np.any(self.mean[:m] != 0) or np.any(self.cov[:m, :] != 0)):
            return "Gaussian jumps must not move the nonnegative coordinates"
        return None

    def sample(self, rng, size):
        return rng.multivariate_normal(self.mean, self.cov, size=size, method="eigh")

    def lift(self, pad):
        mean = np.concatenate([self.mean, np.zeros(pad)])
        cov = np.zeros((self.dim + pad,) * 2)
        cov[: self.dim, : self.dim] = self.cov
        return GaussianJumps(mean, cov, self.intensity)

    def to_json(self):
        return {"type": "gaussian", "mean": self.mean.tolist(), "cov": self.cov.tolist(),
                "intensity": self.intensity}

    def scaled(self, c):
        return GaussianJumps(self.mean, self.cov, self.intensity * c)


def _decade_integral(f, s1, decades=40):
    """``int_0^{s1} f(s) ds`` by geometric panels; returns inf when it diverges at 0."""
    total = 0.0
    last = 0.0
    hi = s1
    for _ in range(decades):
        lo = hi / 10.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            last, _ = integrate.quad(f, lo, hi, epsrel=_QUAD_REL, limit=200)
        total += last
        hi = lo
        if abs(last) <= _QUAD_REL * max(abs(total), 1e-300):
            return total
    return math.inf


@dataclass(frozen=True, eq=False)
class NumericDensity(JumpMeasure):
    """Jumps ``xi = s * direction`` with ``s`` distributed by a density callback.

    ``density(s)`` is defined on ``(lower, upper)`` (endpoints may be
    infinite) and may be non-integrable at ``s = 0`` (infinite activity).
    The tail domain cannot be inferred from a callback and must be
    declared by the caller.
    """

    direction: np.ndarray
    density: Callable[[float], float]
    lower: float
    upper: float
    tail: DomainY = field(default_factory=DomainY.full)
    description: str = "numeric density"

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.direction, dtype=float))
        if not np.any(d):
            raise StructuralError("numeric density: direction must be nonzero")
        if not self.lower < self.upper:
            raise StructuralError("numeric density: empty support interval")
        object.__setattr__(self, "direction", d)

    finite_activity = False

    @property
    def dim(self):
        return self.direction.size

    @property
    def _s1(self):
        return 1.0 / float(np.linalg.norm(self.direction))

    def tail_domain(self):
        return self.tail

    def _pieces(self):
        """Integration intervals split at -s1, 0, s1, clipped to the support."""
        s1 = self._s1
        cuts = [-math.inf, -s1, 0.0, s1, math.inf]
        out = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            lo, hi = max(a, self.lower), min(b, self.upper)
            if lo < hi:
                out.append((lo, hi, abs(a) <= s1 and abs(b) <= s1))
        return out

    def _quad(self, g):
        total = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for lo, hi, _ in self._pieces():
                val, _ = integrate.quad(g, lo, hi, epsrel=_QUAD_REL, epsabs=0.0, limit=400)
                total += val
        return total

    def _integral_scalar(self, w):
        s1 = self._s1
        f = self.density

        def term(s):
            # (e^z - 1 - trunc) f(s), combined in log space once e^z alone would overflow
            z = s * w
            trunc = z if abs(s) <= s1 else 0.0
            fs = f(s)
            if fs == 0.0:
                return 0.0 * z
            if z.real > 600.0:
                return np.exp(z + math.log(fs)) - (1.0 + trunc) * fs
            return (np.expm1(z) - trunc) * fs

        if isinstance(w, complex):
            return complex(self._quad(lambda s: term(s).real), self._quad(lambda s: term(s).imag))
        return self._quad(lambda s: float(term(s)))

    def integral(self, u):
        u = np.asarray(u)
        w = u @ self.direction
        outside = _real_outside(u, self.tail)
        flat_w = np.ravel(w)
        flat_out = np.ravel(outside)
        cplx = _is_complex(u)
        res = np.empty(flat_w.shape, dtype=complex if cplx else float)
        for k, (wk, bad) in enumerate(zip(flat_w, flat_out)):
            if bad:
                res[k] = complex(np.nan, np.nan) if cplx else math.inf
            else:
                res[k] = self._integral_scalar(complex(wk) if cplx else float(wk))
        return res.reshape(np.shape(w))

    def _small_moment(self, power):
        """``int_{|s|<=s1} |s|^power f(s) ds`` with divergence detection."""
        s1 = self._s1
        total = 0.0
        f = self.density
        if self.upper > 0:
            hi = min(s1, self.upper)
            lo = max(0.0, self.lower)
            if lo > 0:
                total += integrate.quad(lambda s: s ** power * f(s), lo, hi, epsrel=_QUAD_REL)[0]
            else:
                total += _decade_integral(lambda s: s ** power * f(s), hi)
        if self.lower < 0:
            hi = min(s1, -self.lower)
            lo = max(0.0, -self.upper)
            if lo > 0:
                total += integrate.quad(lambda s: s ** power * f(-s), lo, hi, epsrel=_QUAD_REL)[0]
            else:
                total += _decade_integral(lambda s: s ** power * f(-s), hi)
        return total

    def truncated_mean(self):
        s1 = self._s1
        if math.isinf(self._small_moment(1.0)):
            signed = math.inf
        else:
            signed = self._quad_signed(lambda s: s * self.density(s), s1)
        # coordinates the jumps never move carry no mean, even when the others diverge
        with np.errstate(invalid="ignore"):
            return np.where(self.direction != 0, self.direction * signed, 0.0)

    def _quad_signed(self, g, s1):
        total = 0.0
        for lo, hi, small in self._pieces():
            if small:
                total += integrate.quad(g, lo, hi, epsrel=_QUAD_REL, limit=400)[0]
        return total

    def small_abs_moment(self, coords):
        coords = list(coords)
        sub = float(np.linalg.norm(self.direction[coords])) if coords else 0.0
        if sub == 0.0:
            return 0.0
        return sub * self._small_moment(1.0)

    def levy_integrable(self):
        if math.isinf(self._small_moment(2.0)):
            return False
        return math.isfinite(self.large_mass())

    def total_mass(self):
        if math.isinf(self._small_moment(0.0)):
            return math.inf
        return self._quad(self.density)

    def large_mass(self):
        total = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for lo, hi, small in self._pieces():
                if not small:
                    total += integrate.quad(self.density, lo, hi, epsrel=_QUAD_REL, limit=400)[0]
        return total

    def tail_exp_integral(self, y):
        y = np.asarray(y)
        w = np.ravel(y @ self.direction)
        outside = np.ravel(_real_outside(y, self.tail))
        out = np.empty(w.shape)
        for k, (wk, bad) in enumerate(zip(w, outside)):
            if bad:
                out[k] = math.inf
                continue
            total = 0.0
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                for lo, hi, small in self._pieces():
                    if not small:
                        total += integrate.quad(lambda s: math.exp(s * wk) * self.density(s),
                                                lo, hi, epsrel=_QUAD_REL, limit=400)[0]
            out[k] = total
        return out.reshape(y.shape[:-1])

    def small_jump_moments(self, i, m):
        """``(int |xi_{I-i}| + 1.5 |xi_{J+i}|^2, int xi_i^2)`` over the unit ball."""
        d = self.direction
        i_minus = [k for k in range(m) if k != i]
        j_plus = [i] + list(range(m, self.dim))
        a = float(np.linalg.norm(d[i_minus])) * self._small_moment(1.0) if i_minus else 0.0
        b = float(d[j_plus] @ d[j_plus]) * self._small_moment(2.0)
        c = float(d[i] ** 2) * self._small_moment(2.0)
        return a + 1.5 * b, c

    def support_violation(self, m):
        d = self.direction[:m]
        if not np.any(d):
            return None
        if (self.upper > 0 and np.any(d < 0)) or (self.lower < 0 and np.any(d > 0)):
            return f"{self.description}: support leaves the nonnegative block"
        return None

    def lift(self, pad):
        return NumericDensity(np.concatenate([self.direction, np.zeros(pad)]), self.density,
                              self.lower, self.upper, self.tail.lift(pad), self.description)

    def scaled(self, c):
        f = self.density
        return NumericDensity(self.direction, lambda s: c * f(s), self.lower, self.upper,
                              self.tail, self.description)


# -- matrix cone ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MatrixPointMasses:
    """Point masses on ``S_d^+ \\ {0}`` with scalar weights (constant part) or
    ``S_d^+``-valued weights (linear part)."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if loc.ndim != 3 or loc.shape[1] != loc.shape[2]:
            raise StructuralError("matrix point masses: locations must be a stack of d x d matrices")
        if w.ndim not in (1, 3) or w.shape[0] != loc.shape[0]:
            raise StructuralError("matrix point masses: need one weight (scalar or matrix) per atom")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    @property
    def d(self):
        return self.locations.shape[1]

    @property
    def matrix_valued(self):
        return self.weights.ndim == 3

    @property
    def is_zero(self):
        return self.locations.shape[0] == 0

    def exponent(self, u):
        """``tr(u xi_k) - 0`` for each atom, shape batch + (k,)."""
        return np.einsum("...ij,kji->...k", u, self.locations)

    def integral(self, u):
        """``int (exp(tr(u xi)) - 1) nu(dxi)``: scalar or matrix valued."""
        z = np.expm1(self.exponent(np.asarray(u)))
        if self.matrix_valued:
            return np.einsum("...k,kij->...ij", z, self.weights)
        return z @ self.weights

    def trace_measure_weights(self):
        if self.matrix_valued:
            return np.trace(self.weights, axis1=1, axis2=2)
        return self.weights

    def to_json(self):
        return {
            "type": "point_mass",
            "atoms": [{"location": l.tolist(), "weight": w.tolist() if np.ndim(w) else float(w)}
                      for l, w in zip(self.locations, self.weights)],
        }


def jump_from_json(doc, dim):
    kind = doc.get("type", "zero")
    if kind == "zero":
        return ZeroMeasure(dim)
    if kind == "point_mass":
        atoms = doc["atoms"]
        if not atoms:
            return ZeroMeasure(dim)
        return PointMassMixture([a["location"] for a in atoms], [a["weight"] for a in atoms])
    if kind == "exponential":
        return OneSidedExponential(dim, int(doc["coordinate"]), float(doc["rate"]), float(doc["intensity"]))
    if kind == "gaussian":
        return GaussianJumps(doc["mean"], doc["cov"], float(doc["intensity"]))
    raise StructuralError(f"unknown jump measure type {kind!r}")


def matrix_jump_from_json(doc, d, matrix_valued):
    kind = doc.get("type", "zero")
    if kind == "zero" or not doc.get("atoms"):
        shape = (0, d, d) if matrix_valued else (0,)
        return MatrixPointMasses(np.zeros((0, d, d)), np.zeros(shape))
    if kind != "point_mass":
        raise StructuralError("matrix jump measures must be point masses")
    atoms = doc["atoms"]
    return MatrixPointMasses([a["location"] for a in atoms], [a["weight"] for a in atoms])
