import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import DATA
from frictorq.model import (ModelParseError, ModelValidationError, fixture_path, load_fixture,
                            load_model, model_from_dict, model_to_dict, save_model, validate)


def _doc(name="pendulum2"):
    return json.loads(fixture_path(name).read_text())


def _write(tmp_path, doc, name="m.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_pendulum_fields(pendulum):
    assert pendulum.n == 2
    assert np.array_equal(pendulum.actuation.gamma, np.diag([0.01, 0.01]))
    assert pendulum.total_mass == 1.0 + 0.5 + 0.3
    assert not pendulum.floating_base


def test_planar_biped_file():
    m = load_model(DATA / "planar_biped5.json")
    assert m.nc == 2
    assert m.n == 5
    assert m.floating_base


def test_fixture_shapes(arm, biped):
    assert arm.n == 4 and arm.nc == 0
    assert arm.actuation.gamma[1, 0] != 0.0
    assert biped.n == 13 and biped.nc == 2
    for m in (arm, biped):
        assert validate(m) == []


def test_negative_viscous_rejected(tmp_path):
    doc = _doc()
    doc["actuation"]["kv"] = [[-0.1, 0.0], [0.0, 1e-4]]
    with pytest.raises(ModelValidationError) as exc:
        load_model(_write(tmp_path, doc))
    assert "viscous coefficient must be ≥ 0" in str(exc.value)


def test_singular_gamma_reported():
    doc = _doc()
    doc["actuation"]["gamma"] = [[0.01, 0.02], [0.01, 0.02]]
    assert "Gamma not invertible" in validate(model_from_dict(doc))


def test_cycle_reported():
    doc = _doc()
    doc["joints"].append({"name": "loop", "type": "revolute", "parent": "link2", "child": "link1",
                          "axis": [0, 1, 0]})
    doc["actuation"] = {k: (np.eye(3) * 0.01).tolist() if k != "epsilon" else 1e-4
                        for k in doc["actuation"]}
    doc.pop("home")
    report = validate(model_from_dict(doc))
    cyc = [r for r in report if r.startswith("kinematic cycle")]
    assert cyc and "link1" in cyc[0] and "link2" in cyc[0]


@pytest.mark.parametrize("field,value,fragment", [
    ("mass", -1.0, "mass must be > 0"),
    ("inertia", [[1, 2, 0], [0, 1, 0], [0, 0, 1]], "symmetric positive definite"),
])
def test_link_invariants(field, value, fragment):
    doc = _doc()
    doc["links"][1][field] = value
    assert any(fragment in r for r in validate(model_from_dict(doc)))


def test_actuation_invariants():
    doc = _doc()
    doc["actuation"]["im"] = [[0.0, 0.0], [0.0, 1e-5]]
    doc["actuation"]["epsilon"] = 0.0
    report = validate(model_from_dict(doc))
    assert "Im diagonal entries must be > 0" in report
    assert "epsilon must be > 0" in report


def test_contact_invariants():
    doc = _doc("biped")
    doc["contacts"][0]["mu"] = 0.0
    doc["contacts"][1]["half_extents"] = [0.1, -0.01]
    doc["contacts"][1]["f_min"] = -1.0
    report = validate(model_from_dict(doc))
    assert "contact 'l_foot': mu must be > 0" in report
    assert "contact 'r_foot': half-extents must be > 0" in report
    assert "contact 'r_foot': f_min must be >= 0" in report


def test_unknown_link():
    doc = _doc()
    doc["joints"][1]["parent"] = "ghost"
    report = validate(model_from_dict(doc))
    assert "joint 'j2': unknown link 'ghost'" in report


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ModelParseError):
        load_model(p)
    doc = _doc()
    del doc["links"]
    with pytest.raises(ModelParseError):
        load_model(_write(tmp_path, doc))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "absent.json")


def test_valid_model_empty_report(pendulum):
    assert validate(pendulum) == []


@pytest.mark.parametrize("name", ["pendulum2", "arm4", "biped"])
def test_round_trip_exact(tmp_path, name):
    m = load_fixture(name)
    p = tmp_path / "rt.json"
    save_model(m, p)
    m2 = load_model(p)
    assert model_to_dict(m2) == model_to_dict(m)


@settings(max_examples=30, deadline=None)
@given(masses=st.lists(st.floats(1e-3, 1e3, allow_nan=False), min_size=3, max_size=3),
       gains=st.lists(st.floats(1e-4, 1.0), min_size=2, max_size=2))
def test_round_trip_and_mass_property(tmp_path_factory, masses, gains):
    doc = _doc()
    for lk, m in zip(doc["links"], masses):
        lk["mass"] = m
    doc["actuation"]["gamma"] = np.diag(gains).tolist()
    model = model_from_dict(doc)
    assert model.total_mass == sum(lk.mass for lk in model.links)
    p = tmp_path_factory.mktemp("rt") / "m.json"
    save_model(model, p)
    back = load_model(p)
    assert [lk.mass for lk in back.links] == masses
    assert np.array_equal(back.actuation.gamma, model.actuation.gamma)
