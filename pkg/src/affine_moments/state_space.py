"""State spaces, affine parameter sets and their admissibility checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import StructuralError
from .jumps import JumpMeasure, MatrixPointMasses, ZeroMeasure

PSD_TOL = 1e-12


@dataclass(frozen=True)
class Canonical:
    """``R_{>=0}^m x R^n``; the first ``m`` coordinates are nonnegative."""

    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0 or self.m + self.n < 1:
            raise StructuralError("canonical state space needs m, n >= 0 and m + n >= 1")

    @property
    def d(self):
        return self.m + self.n

    @property
    def I(self):
        return list(range(self.m))

    @property
    def J(self):
        return list(range(self.m, self.m + self.n))

    @property
    def state_shape(self):
        return (self.d,)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return x.shape == (self.d,) and bool(np.all(x[: self.m] >= 0))

    def interior_contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return x.shape == (self.d,) and bool(np.all(x[: self.m] > 0))

    def to_json(self):
        return {"canonical": {"m": self.m, "n": self.n}}


@dataclass(frozen=True)
class MatrixCone:
    """The cone ``S_d^+`` of positive semidefinite d x d matrices, d >= 2."""

    d: int

    def __post_init__(self):
        if self.d < 2:
            raise StructuralError("matrix cone needs d >= 2; use Canonical(m=1, n=0) for d = 1")

    @property
    def state_shape(self):
        return (self.d, self.d)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return (x.shape == (self.d, self.d) and np.allclose(x, x.T)
                and _min_eig(x) >= -PSD_TOL * max(1.0, np.abs(x).max()))

    def interior_contains(self, x) -> bool:
        return self.contains(x) and _min_eig(np.asarray(x, dtype=float)) > 0

    def to_json(self):
        return {"matrix": {"d": self.d}}


StateSpaceDescriptor = Union[Canonical, MatrixCone]


def _min_eig(x):
    return float(np.linalg.eigvalsh(0.5 * (x + x.T))[0])


def _is_psd(x):
    x = np.asarray(x, dtype=float)
    scale = max(1.0, float(np.abs(x).max(initial=0.0)))
    return np.allclose(x, x.T, atol=1e-14 * scale) and _min_eig(x) >= -PSD_TOL * scale


@dataclass(frozen=True, eq=False)
class AffineParams:
    """Parameters ``(a, alpha^i, b, beta^i, m, mu^i)`` on a canonical state space.

    ``alpha[i]`` and ``beta[i]`` are the coefficients multiplying ``x_i`` in
    the diffusion matrix and drift vector; ``mu[i]`` likewise for the jump
    kernel.
    """

    space: Canonical
    a: np.ndarray
    alpha: tuple
    b: np.ndarray
    beta: tuple
    m: JumpMeasure
    mu: tuple

    def __post_init__(self):
        d = self.space.d
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        alpha = tuple(np.asarray(x, dtype=float) for x in self.alpha)
        beta = tuple(np.asarray(x, dtype=float) for x in self.beta)
        mu = tuple(self.mu)
        if a.shape != (d, d):
            raise StructuralError(f"a must be {d}x{d}, got shape {a.shape}")
        if b.shape != (d,):
            raise StructuralError(f"b must have length {d}, got shape {b.shape}")
        if len(alpha) != d or any(x.shape != (d, d) for x in alpha):
            raise StructuralError(f"alpha must hold {d} matrices of shape {d}x{d}")
        if len(beta) != d or any(x.shape != (d,) for x in beta):
            raise StructuralError(f"beta must hold {d} vectors of length {d}")
        if len(mu) != d:
            raise StructuralError(f"mu must hold {d} jump measures")
        for meas in (self.m,) + mu:
            if meas.dim != d:
                raise StructuralError(f"jump measure of dimension {meas.dim} on a {d}-dim space")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def build(cls, m, n, a=None, alpha=None, b=None, beta=None, jumps_m=None, jumps_mu=None):
        """Convenience constructor with zero defaults for omitted parts."""
        space = Canonical(m, n)
        d = space.d
        a = np.zeros((d, d)) if a is None else a
        alpha = [np.zeros((d, d))] * d if alpha is None else alpha
        b = np.zeros(d) if b is None else b
        beta = [np.zeros(d)] * d if beta is None else beta
        jumps_m = ZeroMeasure(d) if jumps_m is None else jumps_m
        jumps_mu = [ZeroMeasure(d)] * d if jumps_mu is None else jumps_mu
        return cls(space, a, tuple(alpha), b, tuple(beta), jumps_m, tuple(jumps_mu))

    @property
    def d(self):
        return self.space.d

    @property
    def is_diffusion(self):
        return self.m.is_zero and all(x.is_zero for x in self.mu)

    @property
    def drift_matrix(self):
        """Column i is ``beta^i``, so that ``b(x) = b + drift_matrix @ x``."""
        return np.column_stack(self.beta)

    def replace(self, **changes):
        fields = dict(space=self.space, a=self.a, alpha=self.alpha, b=self.b, beta=self.beta,
                      m=self.m, mu=self.mu)
        fields.update(changes)
        return AffineParams(**fields)

    def scaled(self, c: float) -> "AffineParams":
        return AffineParams(self.space, c * self.a, tuple(c * x for x in self.alpha), c * self.b,
                            tuple(c * x for x in self.beta), self.m.scaled(c),
                            tuple(x.scaled(c) for x in self.mu))


def drift_tensor_from_matrix(M):
    """Tensor of ``B(u) = M u + u M^T``."""
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    eye = np.eye(d)
    return np.einsum("ik,jl->ijkl", M, eye) + np.einsum("ik,jl->ijkl", eye, M)


@dataclass(frozen=True, eq=False)
class MatrixAffineParams:
    """Parameters ``(alpha, b, B, m, mu)`` on ``S_d^+``.

    ``B`` is stored as a tensor with ``B(u)[i, j] = sum_kl B[i, j, k, l] u[k, l]``.
    ``m`` carries scalar weights, ``mu`` matrix-valued weights.
    """

    space: MatrixCone
    alpha: np.ndarray
    b: np.ndarray
    B: np.ndarray
    m: MatrixPointMasses
    mu: MatrixPointMasses
    drift_matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        d = self.space.d
        alpha = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.b, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if alpha.shape != (d, d) or not np.allclose(alpha, alpha.T):
            raise StructuralError(f"alpha must be a symmetric {d}x{d} matrix")
        if b.shape != (d, d) or not np.allclose(b, b.T):
            raise StructuralError(f"b must be a symmetric {d}x{d} matrix")
        if B.shape != (d,) * 4:
            raise StructuralError(f"B must be a tensor of shape {(d,) * 4}")
        if self.m.locations.shape[1:] != (d, d) or self.mu.locations.shape[1:] != (d, d):
            raise StructuralError("jump locations must be d x d matrices")
        if self.m.matrix_valued:
            raise StructuralError("the constant jump measure m takes scalar weights")
        if len(self.mu.weights) and not self.mu.matrix_valued:
            raise StructuralError("the linear jump measure mu takes matrix weights")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "B", B)

    @classmethod
    def build(cls, d, alpha=None, b=None, M=None, B=None, m=None, mu=None):
        space = MatrixCone(d)
        alpha = np.zeros((d, d)) if alpha is None else alpha
        b = np.zeros((d, d)) if b is None else b
        if B is None:
            M = np.zeros((d, d)) if M is None else np.asarray(M, dtype=float)
            B = drift_tensor_from_matrix(M)
        m = MatrixPointMasses(np.zeros((0, d, d)), np.zeros(0)) if m is None else m
        mu = MatrixPointMasses(np.zeros((0, d, d)), np.zeros((0, d, d))) if mu is None else mu
        return cls(space, alpha, b, B, m, mu, None if M is None else np.asarray(M, dtype=float))

    @property
    def d(self):
        return self.space.d

    @property
    def is_diffusion(self):
        return self.m.is_zero and self.mu.is_zero

    def apply_B(self, u):
        return np.einsum("ijkl,...kl->...ij", self.B, u)

    def apply_B_adjoint(self, y):
        """``B^T`` with respect to ``<x, y> = tr(xy)``, symmetrised."""
        out = np.einsum("ijkl,...ij->...kl", self.B, y)
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    def replace(self, **changes):
        fields = dict(space=self.space, alpha=self.alpha, b=self.b, B=self.B, m=self.m,
                      mu=self.mu, drift_matrix=self.drift_matrix)
        fields.update(changes)
        return MatrixAffineParams(**fields)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def identifiers(self):
        return [v[0] for v in self.violations]

    def add(self, ident, message):
        self.violations.append((ident, message))

    def to_json(self):
        return {
            "passed": self.passed,
            "violations": [{"id": i, "message": m} for i, m in self.violations],
            **({"details": self.details} if self.details else {}),
        }


def validate(params) -> ValidationReport:
    if isinstance(params, MatrixAffineParams):
        return validate_matrix(params)
    return validate_canonical(params)


def validate_canonical(params: AffineParams) -> ValidationReport:
    if not isinstance(params, AffineParams):
        raise StructuralError("validate_canonical expects canonical AffineParams")
    rep = ValidationReport()
    sp = params.space
    I, J = sp.I, sp.J
    scale = max(1.0, float(np.abs(params.a).max(initial=0.0)))

    if not _is_psd(params.a):
        rep.add("a_psd", "a must be symmetric positive semidefinite")
    if I and (np.any(np.abs(params.a[I, :]) > 0) or np.any(np.abs(params.a[:, I]) > 0)):
        rep.add("a_I_zero", "a_kl = 0 for all k ∈ I or l ∈ I")

    for i, al in enumerate(params.alpha):
        if i in J:
            if np.any(al != 0):
                rep.add("alpha_J_zero", f"alpha^{i + 1} = 0 required for j ∈ J")
            continue
        if not _is_psd(al):
            rep.add("alpha_psd", f"alpha^{i + 1} must be symmetric positive semidefinite")
        others = [k for k in I if k != i]
        if others and (np.any(al[others, :] != 0) or np.any(al[:, others] != 0)):
            rep.add("alpha_I_structure", f"alpha^{i + 1}_kl = 0 if k ∈ I∖{{{i + 1}}} or l ∈ I∖{{{i + 1}}}")

    if not sp.contains(params.b):
        rep.add("b_in_D", "b ∈ D")

    for i in I:
        tm = params.mu[i].truncated_mean()
        for k in I:
            if k == i:
                continue
            val = params.beta[i][k] - tm[k]
            if np.isfinite(val) and val < -PSD_TOL * scale:
                rep.add("beta_I_offdiag",
                        f"beta^{i + 1}_{k + 1} - ∫ξ_{k + 1} mu^{i + 1}(dξ) ≥ 0 (got {val:.6g})")
    for j in J:
        if I and np.any(params.beta[j][I] != 0):
            rep.add("beta_J_zero", f"beta^{j + 1}_k = 0 for k ∈ I")

    if I and not np.isfinite(params.m.small_abs_moment(I)):
        rep.add("m_small_jumps", "∫_{|ξ|≤1} |ξ_I| m(dξ) < ∞")
    for j in J:
        if not params.mu[j].is_zero:
            rep.add("mu_J_zero", f"mu^{j + 1} = 0 required for j ∈ J")
    for i in I:
        others = [k for k in I if k != i]
        if others and not np.isfinite(params.mu[i].small_abs_moment(others)):
            rep.add("mu_small_jumps", f"∫_{{|ξ|≤1}} |ξ_{{I∖{{{i + 1}}}}}| mu^{i + 1}(dξ) < ∞")

    named = [("m", params.m)] + [(f"mu^{i + 1}", x) for i, x in enumerate(params.mu)]
    for name, meas in named:
        if meas.is_zero:
            continue
        msg = meas.support_violation(sp.m)
        if msg:
            rep.add("jump_support", f"{name}: {msg}")
        if not meas.levy_integrable():
            rep.add("levy_measure", f"{name}: ∫(|ξ|² ∧ 1) dν must be finite")
    return rep


def _inward_pairs(d, n_random=100, seed=0):
    """Orthogonal rank-one boundary pairs ``(v, w)`` for the inward-pointing test."""
    eye = np.eye(d)
    pairs = []
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            pairs.append((eye[i], eye[j]))
            pairs.append(((eye[i] + eye[j]) / np.sqrt(2), (eye[i] - eye[j]) / np.sqrt(2)))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        w = rng.standard_normal(d)
        w -= (w @ v) * v
        w /= np.linalg.norm(w)
        pairs.append((v, w))
    return pairs


def inward_margin(params: MatrixAffineParams, n_random=100, seed=0) -> float:
    """Worst ``tr(x B(u))`` over rank-one pairs ``u = vv^T``, ``x = ww^T`` with ``v ⟂ w``."""
    worst = np.inf
    for v, w in _inward_pairs(params.d, n_random, seed):
        u = np.outer(v, v)
        x = np.outer(w, w)
        worst = min(worst, float(np.sum(x * params.apply_B(u))))
    return worst


def validate_matrix(params: MatrixAffineParams) -> ValidationReport:
    if not isinstance(params, MatrixAffineParams):
        raise StructuralError("validate_matrix expects MatrixAffineParams")
    rep = ValidationReport()
    d = params.d
    if not _is_psd(params.alpha):
        rep.add("alpha_psd", "alpha ∈ S_d^+")
    if not _is_psd(params.b):
        rep.add("b_psd", "b ∈ S_d^+")
    if not _is_psd(params.b - (d - 1) * params.alpha):
        rep.add("b_dominates_alpha", "b ⪰ (d−1)alpha")
    for k, loc in enumerate(params.m.locations):
        if not _is_psd(loc) or not np.any(loc):
            rep.add("m_support", f"m atom {k} must lie in S_d^+∖{{0}}")
    for k, (loc, w) in enumerate(zip(params.mu.locations, params.mu.weights)):
        if not _is_psd(loc) or not np.any(loc):
            rep.add("mu_support", f"mu atom {k} must lie in S_d^+∖{{0}}")
        if not _is_psd(w):
            rep.add("mu_psd_valued", f"mu weight {k} must lie in S_d^+")
    if np.any(params.m.weights < 0):
        rep.add("m_support", "m must be a nonnegative measure")
    scale = max(1.0, float(np.abs(params.B).max(initial=0.0)))
    margin = inward_margin(params)
    rep.details["inward_margin"] = margin
    if margin < -PSD_TOL * scale:
        rep.add("B_inward", f"B inward pointing: tr(x B(u)) ≥ 0 when tr(ux) = 0 (worst {margin:.6g})")
    return rep


def check_complex_assumption(params) -> bool:
    """Whether the complex transform applies: always on canonical spaces;
    on ``S_d^+`` iff alpha vanishes or is invertible."""
    if isinstance(params, AffineParams):
        return True
    alpha = params.alpha
    if not np.any(alpha):
        return True
    eig = np.linalg.eigvalsh(alpha)
    return bool(eig[0] > 1e-12 * max(1.0, abs(eig[-1])))


def embed_discounting(params: AffineParams, l: float, lam: Sequence[float]) -> AffineParams:
    """Parameters of ``(X, Y)`` with ``Y_t = y + int_0^t (l + <lam, X_s>) ds`` on ``D x R``."""
    if not isinstance(params, AffineParams):
        raise StructuralError("embed_discounting is defined for canonical state spaces")
    d = params.d
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (d,):
        raise StructuralError(f"lambda must have length {d}")

    def pad_mat(x):
        out = np.zeros((d + 1, d + 1))
        out[:d, :d] = x
        return out

    alpha = tuple(pad_mat(x) for x in params.alpha) + (np.zeros((d + 1, d + 1)),)
    beta = tuple(np.append(bi, lam[i]) for i, bi in enumerate(params.beta)) + (np.zeros(d + 1),)
    mu = tuple(x.lift(1) for x in params.mu) + (ZeroMeasure(d + 1),)
    return AffineParams(Canonical(params.space.m, params.space.n + 1), pad_mat(params.a), alpha,
                        np.append(params.b, l), beta, params.m.lift(1), mu)
