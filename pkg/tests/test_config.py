import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dilutedrs.config import ExperimentConfig, build_model
from dilutedrs.errors import ConfigError


def _doc(**model):
    return {"experiment": "x", "seed": 3, "model": {"family": "ksat", "p": 2, "alpha": 0.25,
                                                    "beta": 1.0, "h": 0.3, **model}}


@settings(max_examples=50, deadline=None)
@given(alpha=st.floats(0, 3), beta=st.one_of(st.floats(0.01, 50), st.just("inf")),
       seed=st.integers(0, 10**6), M=st.integers(100, 10**6))
def test_parse_serialize_parse_identity(alpha, beta, seed, M):
    doc = _doc(alpha=alpha, beta=beta)
    doc["seed"] = seed
    doc["solver"] = {"M": M}
    a = ExperimentConfig.from_dict(doc)
    b = ExperimentConfig.from_dict(json.loads(a.dumps()))
    assert a.to_dict() == b.to_dict() and a.digest() == b.digest()


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="betta"):
        ExperimentConfig.from_dict(_doc(betta=2.0))
    doc = _doc()
    doc["solver"] = {"Mm": 100}
    with pytest.raises(ConfigError, match="Mm"):
        ExperimentConfig.from_dict(doc)


def test_key_for_other_family_rejected():
    with pytest.raises(ConfigError, match="eta"):
        ExperimentConfig.from_dict(_doc(eta=1.0))


def test_bad_values_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(_doc(beta=-1.0))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"seed": 1})


def test_load_reports_file_problems(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(p)


def test_overrides():
    c = ExperimentConfig.from_dict(_doc())
    assert c.with_overrides(seed=9).seed == 9
    with pytest.raises(ConfigError):
        c.with_overrides(grid=128)


def test_build_model():
    m = build_model(ExperimentConfig.from_dict(_doc(beta="inf")).model)
    assert m.p == 2 and m.alpha == 0.25 and math.isinf(m.beta)
