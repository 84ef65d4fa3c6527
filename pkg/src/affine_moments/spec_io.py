"""JSON model specifications.

A document holds a state space, the parameter blocks and optional
``rate``, ``asset`` and ``scenarios`` sections::

    {"space": {"canonical": {"m": 1, "n": 0}},
     "a": [[0]], "alpha": [[[0.04]]], "b": [0.02], "beta": [[-1.0]],
     "jumps": {"m": {"type": "zero"}, "mu": [{"type": "zero"}]},
     "rate": {"l": 0.0, "lambda": [1.0]},
     "asset": {"theta": [1.0]},
     "scenarios": {"base": {"x": [0.04], "T": 1.0}}}

Matrix models use ``{"matrix": {"d": 2}}`` with ``alpha``, ``b`` and
either a drift matrix ``M`` (``B(u) = M u + u M^T``) or a full tensor ``B``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import StructuralError
from .jumps import jump_from_json, matrix_jump_from_json
from .pricing import ShortRateSpec
from .state_space import AffineParams, Canonical, MatrixAffineParams, MatrixCone


@dataclass(frozen=True, eq=False)
class ModelSpec:
    params: object
    rate: Optional[ShortRateSpec] = None
    theta: Optional[np.ndarray] = None
    scenarios: dict = field(default_factory=dict)


def _arr(doc, key, shape, default=None):
    if key not in doc:
        if default is None:
            raise StructuralError(f"missing field {key!r}")
        return default
    val = np.asarray(doc[key], dtype=float)
    if shape is not None and val.shape != shape:
        raise StructuralError(f"{key!r} has shape {val.shape}, expected {shape}")
    return val


def parse(doc: dict) -> ModelSpec:
    if not isinstance(doc, dict) or "space" not in doc:
        raise StructuralError("model spec needs a 'space' entry")
    space = doc["space"]
    jumps = doc.get("jumps", {})
    if "canonical" in space:
        sp = Canonical(int(space["canonical"]["m"]), int(space["canonical"]["n"]))
        d = sp.d
        a = _arr(doc, "a", (d, d), np.zeros((d, d)))
        alpha = _arr(doc, "alpha", (d, d, d), np.zeros((d, d, d)))
        b = _arr(doc, "b", (d,), np.zeros(d))
        beta = _arr(doc, "beta", (d, d), np.zeros((d, d)))
        m = jump_from_json(jumps.get("m", {"type": "zero"}), d)
        mu_docs = jumps.get("mu", [{"type": "zero"}] * d)
        if len(mu_docs) != d:
            raise StructuralError(f"jumps.mu must list {d} measures")
        mu = tuple(jump_from_json(x, d) for x in mu_docs)
        params = AffineParams(sp, a, tuple(alpha), b, tuple(beta), m, mu)
    elif "matrix" in space:
        d = int(space["matrix"]["d"])
        MatrixCone(d)
        alpha = _arr(doc, "alpha", (d, d), np.zeros((d, d)))
        b = _arr(doc, "b", (d, d), np.zeros((d, d)))
        m = matrix_jump_from_json(jumps.get("m", {"type": "zero"}), d, False)
        mu = matrix_jump_from_json(jumps.get("mu", {"type": "zero"}), d, True)
        if "B" in doc:
            params = MatrixAffineParams.build(d, alpha, b, B=_arr(doc, "B", (d,) * 4), m=m, mu=mu)
        else:
            params = MatrixAffineParams.build(d, alpha, b, M=_arr(doc, "M", (d, d), np.zeros((d, d))),
                                              m=m, mu=mu)
    else:
        raise StructuralError("space must be 'canonical' or 'matrix'")
    rate = None
    if "rate" in doc:
        r = doc["rate"]
        rate = ShortRateSpec(float(r.get("l", 0.0)), tuple(float(v) for v in np.ravel(r.get("lambda", []))))
    theta = None
    if "asset" in doc:
        theta = np.asarray(doc["asset"]["theta"], dtype=float)
    scenarios = dict(doc.get("scenarios", {}))
    return ModelSpec(params, rate, theta, scenarios)


def to_json(spec: ModelSpec) -> dict:
    """Canonical serialised form: every field explicit, keys in a fixed order."""
    p = spec.params
    if isinstance(p, AffineParams):
        out = {"space": p.space.to_json(), "a": p.a.tolist(),
               "alpha": [x.tolist() for x in p.alpha], "b": p.b.tolist(),
               "beta": [x.tolist() for x in p.beta],
               "jumps": {"m": p.m.to_json(), "mu": [x.to_json() for x in p.mu]}}
    else:
        out = {"space": p.space.to_json(), "alpha": p.alpha.tolist(), "b": p.b.tolist()}
        if p.drift_matrix is not None:
            out["M"] = p.drift_matrix.tolist()
        else:
            out["B"] = p.B.tolist()
        out["jumps"] = {"m": p.m.to_json(), "mu": p.mu.to_json()}
    if spec.rate is not None:
        out["rate"] = spec.rate.to_json()
    if spec.theta is not None:
        out["asset"] = {"theta": np.asarray(spec.theta).tolist()}
    if spec.scenarios:
        out["scenarios"] = spec.scenarios
    return out


def load(path) -> ModelSpec:
    with open(path) as fh:
        return parse(json.load(fh))


def dumps(spec: ModelSpec) -> str:
    return json.dumps(to_json(spec), indent=2, sort_keys=True)
