"""Effective domains of Levy-Khintchine functionals.

A domain is an intersection of half-spaces ``<n, y> < c`` (or ``<= c``)
and, optionally, opaque membership callbacks. The empty intersection is
the full space.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class DomainClass(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class HalfSpace:
    """The set ``{y : <normal, y> < offset}`` (``<=`` when ``strict`` is False)."""

    normal: tuple
    offset: float
    strict: bool = True

    def slack(self, y):
        n = np.asarray(self.normal, dtype=float)
        y = np.asarray(y)
        flat = y.reshape(y.shape[: y.ndim - n.ndim] + (-1,))
        return self.offset - flat @ n.ravel()

    def describe(self):
        terms = " + ".join(f"{c:g}*y[{k}]" for k, c in enumerate(np.ravel(self.normal)) if c != 0)
        return f"{terms or '0'} {'<' if self.strict else '<='} {self.offset:g}"


@dataclass(frozen=True)
class DomainCallback:
    """Membership test supplied by the user.

    ``classify`` maps a real point to a DomainClass. ``is_open`` declares
    that the set contains none of its boundary points.
    """

    classify: Callable[[np.ndarray], DomainClass]
    is_open: bool = False
    description: str = "callback"


@dataclass(frozen=True)
class DomainY:
    half_spaces: tuple = ()
    callbacks: tuple = ()

    @classmethod
    def full(cls):
        return cls()

    @classmethod
    def from_half_spaces(cls, half_spaces: Sequence[HalfSpace]):
        return cls(half_spaces=tuple(half_spaces))

    @classmethod
    def from_callback(cls, classify, is_open=False, description="callback"):
        return cls(callbacks=(DomainCallback(classify, is_open, description),))

    @property
    def is_full_space(self):
        return not self.half_spaces and not self.callbacks

    @property
    def is_open(self):
        return all(h.strict for h in self.half_spaces) and all(c.is_open for c in self.callbacks)

    @property
    def kind(self):
        if self.is_full_space:
            return "full_space"
        if self.callbacks:
            return "callback"
        return "half_space_intersection"

    def intersect(self, other: "DomainY") -> "DomainY":
        hs = list(self.half_spaces)
        for h in other.half_spaces:
            if h not in hs:
                hs.append(h)
        return DomainY(tuple(hs), self.callbacks + other.callbacks)

    def slacks(self, y):
        """Half-space slacks, shape ``batch + (k,)``; positive means strictly inside."""
        y = np.asarray(y)
        if not self.half_spaces:
            return None
        return np.stack([h.slack(y) for h in self.half_spaces], axis=-1)

    def classify(self, y) -> DomainClass:
        y = np.asarray(y, dtype=float)
        result = DomainClass.INTERIOR
        for h in self.half_spaces:
            s = float(h.slack(y))
            if s < 0:
                return DomainClass.OUTSIDE
            if s == 0:
                result = DomainClass.BOUNDARY
        for cb in self.callbacks:
            c = cb.classify(y)
            if c is DomainClass.OUTSIDE:
                return c
            if c is DomainClass.BOUNDARY:
                result = c
        return result

    def contains(self, y) -> bool:
        """Membership in the domain itself (boundary points of closed constraints count)."""
        y = np.asarray(y, dtype=float)
        for h in self.half_spaces:
            s = float(h.slack(y))
            if s < 0 or (s == 0 and h.strict):
                return False
        for cb in self.callbacks:
            c = cb.classify(y)
            if c is DomainClass.OUTSIDE or (c is DomainClass.BOUNDARY and cb.is_open):
                return False
        return True

    def interior_mask(self, y):
        """Vectorised interior test over leading batch axes (half-spaces only)."""
        s = self.slacks(y)
        if s is None:
            return None
        return np.all(s > 0, axis=-1)

    def distance_to_boundary(self, y) -> float:
        """Euclidean distance from ``y`` to the nearest half-space boundary."""
        best = np.inf
        for h in self.half_spaces:
            norm = float(np.linalg.norm(h.normal))
            if norm > 0:
                best = min(best, abs(float(h.slack(y))) / norm)
        return best

    def nearest_constraint(self, y):
        best, which = np.inf, None
        for h in self.half_spaces:
            norm = float(np.linalg.norm(h.normal))
            if norm > 0 and abs(float(h.slack(y))) / norm < best:
                best, which = abs(float(h.slack(y))) / norm, h
        return which

    def lift(self, pad: int) -> "DomainY":
        """Embed into a space with ``pad`` extra trailing coordinates."""
        if self.callbacks:
            cbs = tuple(
                DomainCallback(lambda y, f=cb.classify: f(np.asarray(y)[..., : np.asarray(y).shape[-1] - pad]),
                               cb.is_open, cb.description)
                for cb in self.callbacks
            )
        else:
            cbs = ()
        hs = tuple(HalfSpace(tuple(np.ravel(h.normal)) + (0.0,) * pad, h.offset, h.strict)
                   for h in self.half_spaces)
        return DomainY(hs, cbs)

    def describe(self):
        if self.is_full_space:
            return "R^d"
        parts = [h.describe() for h in self.half_spaces] + [c.description for c in self.callbacks]
        return " and ".join(parts)
