import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import PHI_PROJ, haar_kraus
from qmemory import io as qio
from qmemory.channel import choi_from_kraus, pauli_form, preset
from qmemory.circuitsim import sweep
from qmemory.ellipsoid import BlochPoint, Ellipsoid, default_grid, ellipsoid_of_channel, mesh, sample_outputs
from qmemory.errors import BadInput
from qmemory.metrics import memory_report

finite = st.floats(min_value=-1, max_value=1, allow_nan=False, allow_subnormal=True)


def test_channel_spec_kraus_and_preset():
    spec = {"kind": "kraus", "ops": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]]}
    np.testing.assert_allclose(qio.channel_from_spec(spec), [np.eye(2)])
    ad = qio.channel_from_spec({"name": "amplitude_damping", "gamma": 0.3})
    np.testing.assert_allclose(ad, preset("amplitude_damping", gamma=0.3))
    dep = qio.channel_from_spec({"kind": "preset", "name": "depolarizing", "P": 0.5})
    np.testing.assert_allclose(dep, preset("depolarizing", P=0.5))
    u = qio.channel_from_spec({"name": "unitary", "matrix": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]})
    np.testing.assert_allclose(u[0], [[0, 1], [1, 0]])
    rep = qio.channel_from_spec({"name": "replacer", "state": [0, 0, -1]})
    np.testing.assert_allclose(choi_from_kraus(rep), np.kron(np.eye(2) / 2, np.diag([0.0, 1.0])), atol=1e-15)


@pytest.mark.parametrize(
    "spec",
    [
        [],
        {"kind": "other"},
        {"kind": "kraus", "ops": []},
        {"kind": "kraus", "ops": [[[1, 0], [0, 2]]]},
        {"kind": "kraus", "ops": [[[1, 0, 0], [0, 1, 0]]]},
        {"name": "depolarizing", "P": 3},
        {"name": 5},
    ],
)
def test_channel_spec_errors(spec):
    with pytest.raises(BadInput):
        qio.channel_from_spec(spec)


def test_points_round_trip(tmp_path):
    pts = sample_outputs(choi_from_kraus(preset("amplitude_damping", gamma=0.4)), default_grid())
    path = tmp_path / "p.csv"
    qio.write_points(path, pts)
    assert path.read_text().splitlines()[0] == "input_id,x,y,z"
    back = qio.read_points(path)
    assert [p.input_id for p in back] == [p.input_id for p in pts]
    assert all(np.array_equal(a.r, b.r) for a, b in zip(pts, back))
    weighted = [BlochPoint(p.r, p.input_id, 100.0) for p in pts]
    qio.write_points(path, weighted)
    assert path.read_text().splitlines()[0] == "input_id,x,y,z,weight"
    assert all(p.weight == 100.0 for p in qio.read_points(path))


@pytest.mark.parametrize(
    "text",
    ["a,b,c\n", "input_id,x,y,z\n0,1,2\n", "input_id,x,y,z\n0,a,0,0\n", "input_id,x,y,z,w\n", "input_id,x,y,z\n0,0,0,2\n"],
)
def test_points_errors(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(BadInput):
        qio.read_points(path)


def test_sweep_csv(tmp_path):
    res = sweep("amplitude_damping", [0.0, np.pi / 2, 3 * np.pi / 4])
    path = tmp_path / "s.csv"
    qio.write_sweep(path, res)
    rows = qio.read_sweep(path)
    assert list(rows[0]) == qio.SWEEP_HEADER
    assert [r["eb"] for r in rows] == ["false", "true", "false"]
    assert float(rows[1]["volume"]) == 0.0
    assert "note:gamma_decreasing" in rows[2]["flags"].split(";")
    assert float(rows[0]["theta"]) == res.rows[0].theta


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=9, max_size=9))
def test_report_round_trip_is_lossless(center, q):
    e = Ellipsoid(np.array(center), np.array(q).reshape(3, 3), np.array(center), np.array(q).reshape(3, 3), 1)
    doc = json.loads(qio.report_to_text({"ellipsoid": qio.ellipsoid_to_json(e)}))
    assert doc["ellipsoid"]["center"] == [float(v) for v in center]
    assert doc["ellipsoid"]["Q"] == [[float(v) for v in row] for row in np.array(q).reshape(3, 3)]


def test_build_report_key_order_and_candidates():
    c = choi_from_kraus(preset("depolarizing", P=0.8))
    e = ellipsoid_of_channel(pauli_form(c))
    rep = memory_report(c)
    doc = qio.build_report(e, {"mode": "analytic", "junk": 1}, [{"chirality": -1, "choi": c, "metrics": rep}], rep)
    assert list(doc) == ["schema_version", "provenance", "ellipsoid", "metrics", "candidates"]
    assert doc["schema_version"] == "1"
    assert doc["provenance"] == {"mode": "analytic"}
    assert doc["ellipsoid"]["volume"] == pytest.approx(4 * math.pi / 3 * 0.512)
    assert isinstance(doc["candidates"], list) and len(doc["candidates"]) == 1
    np.testing.assert_allclose(np.array(doc["candidates"][0]["choi"])[..., 0], c.real)
    geo = qio.build_report(e, {"mode": "fitted", "fit_residual": 0.0}, [])
    assert "metrics" not in geo and geo["candidates"] == []
    back = qio.ellipsoid_from_json(doc["ellipsoid"])
    np.testing.assert_allclose(back.Q, e.Q)
    assert back.chirality == e.chirality


def test_report_rejects_nan():
    with pytest.raises(ValueError):
        qio.report_to_text({"x": float("nan")})


def test_atomic_write_leaves_no_partial_file(tmp_path):
    path = tmp_path / "out.txt"
    path.write_text("old")

    with pytest.raises(TypeError):
        qio.atomic_write(path, 123)
    assert path.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_mesh_formats(tmp_path):
    e = ellipsoid_of_channel(pauli_form(PHI_PROJ))
    unit = Ellipsoid.from_shape(np.zeros(3), np.eye(3))
    meshes = [("ellipsoid", mesh(e, 8)), ("bloch_sphere", mesh(unit, 8))]
    obj = tmp_path / "m.obj"
    qio.write_mesh(obj, meshes)
    text = obj.read_text()
    faces = [list(map(int, ln.split()[1:])) for ln in text.splitlines() if ln.startswith("f ")]
    assert min(min(f) for f in faces) == 1 and max(max(f) for f in faces) == 116
    objs = qio.read_obj(obj)
    assert list(objs) == ["ellipsoid", "bloch_sphere"] and objs["ellipsoid"].shape == (58, 3)
    js = tmp_path / "m.json"
    qio.write_mesh(js, meshes)
    doc = json.loads(js.read_text())
    assert doc["schema_version"] == "1"
    assert len(doc["vertices"]) == 58 and min(min(f) for f in doc["faces"]) == 0
    assert doc["objects"][0]["name"] == "bloch_sphere"
