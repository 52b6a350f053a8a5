import json
import math
import subprocess
import sys

import numpy as np
import pytest

from oracles import haar_kraus
from qmemory import io as qio
from qmemory.channel import choi_from_kraus, preset
from qmemory.cli import main, parse_angle, parse_angle_list
from qmemory.ellipsoid import BlochPoint, default_grid, sample_outputs
from qmemory.errors import BadInput

BALL = 4 * math.pi / 3


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def run(*args):
    return main([str(a) for a in args])


def test_parse_angle():
    assert parse_angle("pi/2") == pytest.approx(math.pi / 2)
    assert parse_angle("3*pi/4") == pytest.approx(3 * math.pi / 4)
    assert parse_angle("0.609pi") == pytest.approx(0.609 * math.pi)
    assert parse_angle("-1.5e-1") == pytest.approx(-0.15)
    assert parse_angle_list("0,pi/4, pi") == pytest.approx([0, math.pi / 4, math.pi])
    assert parse_angle_list("0:pi:3") == pytest.approx([0, math.pi / 2, math.pi])
    assert parse_angle_list("") == []
    for bad in ["__import__('os')", "pi pi", "1/0", "e", "2**2000.0"]:
        with pytest.raises(BadInput):
            parse_angle(bad)


def test_analyze_depolarizing(tmp_path):
    spec = write_json(tmp_path / "dep.json", {"kind": "preset", "name": "depolarizing", "P": 0.8})
    out = tmp_path / "r.json"
    assert run("analyze", spec, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == "1"
    assert doc["provenance"] == {"mode": "analytic"}
    assert doc["ellipsoid"]["volume"] == pytest.approx(BALL * 0.512, abs=1e-12)
    assert doc["metrics"]["eb"] is False
    assert doc["metrics"]["memory_robustness"] == pytest.approx(0.7, abs=1e-4)
    assert len(doc["candidates"]) == 1


def test_analyze_replacer(tmp_path, capsys):
    spec = write_json(tmp_path / "rep.json", {"name": "replacer"})
    assert run("analyze", spec) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["metrics"]["eb"] is True and doc["metrics"]["memory_robustness"] == 0.0


def test_analyze_malformed(tmp_path, capsys):
    out = tmp_path / "r.json"
    for spec in [{"kind": "kraus", "ops": [[[1, 0], [0, 2]]]}, {"name": "bogus"}]:
        assert run("analyze", write_json(tmp_path / "bad.json", spec), "--out", out) == 2
        assert not out.exists()
    (tmp_path / "broken.json").write_text("{")
    assert run("analyze", tmp_path / "broken.json") == 2
    assert "error:" in capsys.readouterr().err


def test_analyze_solver_failure(tmp_path, monkeypatch):
    from qmemory import robustness
    from qmemory.errors import NoConvergence

    def boom(*a, **k):
        raise NoConvergence("cap reached", bracket=(0.1, 0.2))

    monkeypatch.setattr(robustness, "robustness_bracket", boom)
    spec = write_json(tmp_path / "id.json", {"name": "identity"})
    assert run("analyze", spec, "--out", tmp_path / "r.json") == 3
    assert not (tmp_path / "r.json").exists()


def test_fit_damping_points(tmp_path):
    pts = sample_outputs(choi_from_kraus(preset("amplitude_damping", gamma=0.4)), default_grid())
    qio.write_points(tmp_path / "p.csv", pts)
    out, obj = tmp_path / "f.json", tmp_path / "f.obj"
    assert run("fit", tmp_path / "p.csv", "--out", out, "--mesh", obj, "--resolution", 8) == 0
    doc = json.loads(out.read_text())
    assert doc["provenance"]["mode"] == "fitted"
    assert 1 <= len(doc["candidates"]) <= 2
    for cand in doc["candidates"]:
        assert cand["chirality"] in (-1, 1)
        assert "metrics" in cand
    assert doc["ellipsoid"]["volume"] == pytest.approx(BALL * (1 - 0.4) ** 2, abs=1e-6)
    assert qio.read_obj(obj)["ellipsoid"].shape == (58, 3)


def test_fit_too_few_points(tmp_path):
    pts = sample_outputs(choi_from_kraus(preset("identity")), default_grid()[:8])
    qio.write_points(tmp_path / "p.csv", pts)
    assert run("fit", tmp_path / "p.csv") == 4


def test_fit_outside_bloch_ball(tmp_path):
    # radius 1.1 passes the ingestion cap but no channel has this ellipsoid
    qio.write_points(tmp_path / "p.csv", [BlochPoint(1.1 * r) for r in default_grid()])
    out = tmp_path / "f.json"
    assert run("fit", tmp_path / "p.csv", "--out", out) == 5
    doc = json.loads(out.read_text())
    assert "metrics" not in doc and doc["candidates"] == []
    assert doc["ellipsoid"]["semiaxes"] == pytest.approx([1.1] * 3)


def test_fit_radius_above_cap(tmp_path):
    rows = ["input_id,x,y,z"] + [f"{i},{1.2 * r[0]!r},{1.2 * r[1]!r},{1.2 * r[2]!r}" for i, r in enumerate(default_grid())]
    (tmp_path / "p.csv").write_text("\n".join(rows) + "\n")
    assert run("fit", tmp_path / "p.csv") == 2


def test_simulate(tmp_path):
    out = tmp_path / "p.csv"
    assert run("simulate", "--preset", "depolarizing", "--theta", "pi/2", "--out", out) == 0
    pts = qio.read_points(out)
    assert len(pts) == 26
    np.testing.assert_allclose([np.linalg.norm(p.r) for p in pts], 0.5, atol=1e-12)
    assert run("simulate", "--preset", "amplitude_damping", "--theta", "pi/2", "--input", "pi,0", "--out", out) == 0
    np.testing.assert_allclose(qio.read_points(out)[0].r, [0, 0, 1], atol=1e-12)


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run("simulate", "--preset", "depolarizing", "--theta", "1.0", "--shots", 500, "--seed", 4, "--out", path) == 0
    assert a.read_bytes() == b.read_bytes()
    assert qio.read_points(a)[0].weight == 500


def test_simulate_bad_arguments(tmp_path):
    assert run("simulate", "--preset", "depolarizing", "--theta", "pi/", "--out", tmp_path / "p.csv") == 2
    assert run("simulate", "--preset", "depolarizing", "--theta", "1", "--input", "1") == 2
    with pytest.raises(SystemExit) as exc:
        run("simulate", "--preset", "bogus", "--theta", "1")
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run("simulate", "--preset", "depolarizing", "--theta", "1", "--shots", 0)
    assert exc.value.code == 2


def test_sweep_depolarizing(tmp_path):
    out = tmp_path / "s.csv"
    assert run("sweep", "--preset", "depolarizing", "--thetas", "0:pi:21", "--out", out) == 0
    rows = qio.read_sweep(out)
    assert len(rows) == 21
    qm = [float(r["memory_robustness"]) for r in rows]
    ps = [float(r["param"]) for r in rows]
    for p, q in zip(ps, qm):
        if p <= 1 / 3:
            assert q == 0.0
    order = np.argsort(ps)
    assert all(qm[j] >= qm[i] - 1e-4 for i, j in zip(order, order[1:]))


def test_sweep_damping_table(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert run("sweep", "--preset", "amplitude_damping", "--thetas", "0,pi/4,pi/2,3*pi/4,pi", "--out", out) == 0
    for r in qio.read_sweep(out):
        g = math.sin(float(r["theta"])) ** 2
        assert float(r["volume"]) == pytest.approx(BALL * (1 - g) ** 2, abs=1e-8)
    assert "warning:" in capsys.readouterr().err


def test_sweep_empty_and_all_failed(tmp_path, monkeypatch):
    assert run("sweep", "--preset", "depolarizing", "--thetas", "", "--out", tmp_path / "s.csv") == 2
    from qmemory import circuitsim
    from qmemory.errors import NotAnEllipsoid

    def bad_fit(*a, **k):
        raise NotAnEllipsoid("forced")

    monkeypatch.setattr(circuitsim, "fit_ellipsoid", bad_fit)
    assert run("sweep", "--preset", "depolarizing", "--thetas", "0.1,0.2", "--out", tmp_path / "s.csv") == 6
    flags = [r["flags"] for r in qio.read_sweep(tmp_path / "s.csv")]
    assert flags == ["fit_error:NotAnEllipsoid"] * 2


def test_mesh_command(tmp_path, capsys):
    ident = write_json(tmp_path / "id.json", {"name": "identity"})
    out = tmp_path / "m.obj"
    assert run("mesh", ident, "--resolution", 16, "--out", out) == 0
    np.testing.assert_allclose(np.linalg.norm(qio.read_obj(out)["ellipsoid"], axis=1), 1, atol=1e-10)
    dep = write_json(tmp_path / "dep.json", {"name": "depolarizing", "P": 0.5})
    assert run("mesh", dep, "--with-sphere", "--out", out) == 0
    objs = qio.read_obj(out)
    np.testing.assert_allclose(np.linalg.norm(objs["ellipsoid"], axis=1), 0.5, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(objs["bloch_sphere"], axis=1), 1, atol=1e-12)
    capsys.readouterr()
    full = write_json(tmp_path / "ad.json", {"name": "amplitude_damping", "gamma": 1.0})
    assert run("mesh", full, "--out", tmp_path / "p.json") == 0
    assert "degenerate" in capsys.readouterr().err
    assert run("mesh", ident, "--resolution", 4, "--out", out) == 2


def test_round_trip_analyze_mesh_fit(tmp_path):
    kraus = haar_kraus(np.random.default_rng(5), 3)
    spec = write_json(tmp_path / "c.json", {"kind": "kraus", "ops": [[[[v.real, v.imag] for v in row] for row in k] for k in kraus]})
    assert run("analyze", spec, "--out", tmp_path / "a.json") == 0
    assert run("mesh", tmp_path / "a.json", "--resolution", 8, "--out", tmp_path / "m.obj") == 0
    verts = qio.read_obj(tmp_path / "m.obj")["ellipsoid"]
    qio.write_points(tmp_path / "p.csv", [BlochPoint(v) for v in verts])
    assert run("fit", tmp_path / "p.csv", "--out", tmp_path / "f.json") == 0
    a = json.loads((tmp_path / "a.json").read_text())
    f = json.loads((tmp_path / "f.json").read_text())
    assert f["ellipsoid"]["volume"] == pytest.approx(a["ellipsoid"]["volume"], abs=1e-6)


def test_entry_point_and_no_color(tmp_path):
    spec = write_json(tmp_path / "bad.json", {"name": "bogus"})
    env = {"NO_COLOR": "1", "PATH": "/usr/bin:/bin"}
    proc = subprocess.run([sys.executable, "-m", "qmemory", "analyze", spec], capture_output=True, text=True, env=env)
    assert proc.returncode == 2
    assert proc.stderr.startswith("qmemory: error:") and "\033[" not in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "qmemory", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("analyze", "fit", "simulate", "sweep", "mesh"):
        assert cmd in proc.stdout
