import json
from pathlib import Path

import numpy as np
import pytest

from affine_moments import models, spec_io
from affine_moments.errors import StructuralError
from affine_moments.pricing import ShortRateSpec
from affine_moments.state_space import validate

SPECS = sorted((Path(__file__).parent.parent / "model_specs").glob("*.json"))


@pytest.mark.parametrize("path", SPECS, ids=lambda p: p.stem)
def test_files_round_trip(path):
    first = spec_io.load(path)
    text = spec_io.dumps(first)
    second = spec_io.parse(json.loads(text))
    assert spec_io.dumps(second) == text


@pytest.mark.parametrize("name", models.CANONICAL + ("wishart",))
def test_zoo_round_trip(name):
    spec = spec_io.ModelSpec(models.ZOO[name](), ShortRateSpec(0.01, ()), None, {"s": {"T": 1.0}})
    text = spec_io.dumps(spec)
    back = spec_io.parse(json.loads(text))
    assert spec_io.dumps(back) == text
    assert validate(back.params).passed == validate(spec.params).passed


def test_bad_drift_file_fails_validation():
    spec = spec_io.load(Path(__file__).parent.parent / "model_specs" / "bad_drift.json")
    assert validate(spec.params).identifiers == ["b_in_D"]


@pytest.mark.parametrize("doc", [
    {},
    {"space": {"canonical": {"m": 1, "n": 0}}, "b": [0.1, 0.2]},
    {"space": {"simplex": {}}},
    {"space": {"canonical": {"m": 1, "n": 1}}, "jumps": {"mu": [{"type": "zero"}]}},
])
def test_malformed_documents(doc):
    with pytest.raises(StructuralError):
        spec_io.parse(doc)


def test_asset_and_scenarios_kept():
    spec = spec_io.load(Path(__file__).parent.parent / "model_specs" / "heston.json")
    np.testing.assert_array_equal(spec.theta, [0.0, 1.0])
    assert spec.rate.l == 0.01
    assert spec.scenarios["base"]["strike"] == 1.0
