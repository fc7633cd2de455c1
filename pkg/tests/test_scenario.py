import numpy as np
import pytest

from shefluct.grid import build_grid
from shefluct.harness.scenario import (
    PRESETS,
    ConfigError,
    Scenario,
    initial_datum,
    preset,
    scenario_from_document,
    validate_document,
)


def test_defaults_and_steps():
    sc = Scenario()
    assert sc.steps == 250 and sc.case == 1
    assert Scenario(conservative=True).case == 2
    with pytest.raises(ConfigError):
        Scenario(T=0.2505)


def test_document_overrides_preset():
    sc = scenario_from_document({"schema": 1, "preset": "ssep", "scenario": {"N": 32, "eps": 1e-5}})
    assert sc.N == 32 and sc.eps == 1e-5 and sc.conservative and sc.name == "ssep"


@pytest.mark.parametrize(
    "doc, where",
    [
        ({"schema": 2}, "$.schema"),
        ({}, "$"),
        ({"schema": 1, "scenario": {"N": 7}}, "$.scenario.N"),
        ({"schema": 1, "scenario": {"dt": -1}}, "$.scenario.dt"),
        ({"schema": 1, "scenario": {"bogus": 1}}, "$.scenario"),
        ({"schema": 1, "experiment": {"estimator": "max"}}, "$.experiment.estimator"),
        ({"schema": 1, "experiment": {"epsilons": [-1.0]}}, "$.experiment.epsilons[0]"),
        ({"schema": 1, "preset": "nope"}, "$.preset"),
    ],
)
def test_malformed_documents_point_at_the_error(doc, where):
    with pytest.raises(ConfigError) as info:
        scenario_from_document(doc)
    assert info.value.path == where


def test_validate_accepts_full_document():
    validate_document({
        "schema": 1,
        "scenario": {"d": 1, "N": 64, "u0": {"kind": "cosine", "mean": 1, "amplitude": 0.5}, "gamma": None},
        "experiment": {"epsilons": [0.1, 0.01], "schedule": {"kind": "power", "a": 0.25}, "p": 2},
    })


def test_initial_datum_kinds():
    g = build_grid(1, 16)
    assert np.all(initial_datum(2, g) == 2.0)
    assert np.all(initial_datum({"kind": "constant", "value": 0.5}, g) == 0.5)
    cos = initial_datum({"kind": "cosine", "mean": 1, "amplitude": 0.5, "mode": 2}, g)
    np.testing.assert_allclose(cos, 1 + 0.5 * np.cos(4 * np.pi * g.coordinates()[0]))


def test_presets():
    assert set(PRESETS) == {"dawson-watanabe", "fleming-viot", "ssep", "dean-kawasaki"}
    for sc in PRESETS.values():
        G = sc.G()
        assert G.smoothness == "window" and sc.gamma is not None
        lo, hi = G.domain
        u = sc.initial()
        assert lo < u.min() - sc.gamma and u.max() + sc.gamma < hi
    assert preset("ssep").conservative and not preset("fleming-viot").conservative
    with pytest.raises(KeyError):
        preset("voter")


def test_roundtrip():
    sc = PRESETS["dean-kawasaki"].with_(N=16)
    assert Scenario.from_dict(sc.to_dict()) == sc


def test_unknown_coefficient_is_config_error():
    with pytest.raises(ConfigError):
        Scenario(coefficient="nope").G()
