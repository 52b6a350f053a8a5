"""File formats: channel specs, points CSV, sweep CSV, report JSON and meshes.

Every writer goes through :func:`atomic_write`, so a failed command never
leaves a partial file behind.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .channel import kraus_ops, preset
from .circuitsim import SweepResult
from .ellipsoid import BlochPoint, Ellipsoid, Mesh, volume, volume_bound
from .errors import BadInput, BadParam, IncompleteKraus
from .metrics import MemoryReport

SCHEMA_VERSION = "1"
POINTS_HEADER = ["input_id", "x", "y", "z"]
SWEEP_HEADER = [
    "theta",
    "param",
    "volume",
    "volume_bound",
    "negativity",
    "concurrence",
    "memory_robustness",
    "eb",
    "fit_residual",
    "flags",
]


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return repr(float(x))


# ------------------------------------------------------------------ complex


def parse_complex(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(float(v))
    raise BadInput(f"expected a number or [re, im] pair, got {v!r}")


def parse_matrix(m, shape=(2, 2)) -> np.ndarray:
    try:
        out = np.array([[parse_complex(v) for v in row] for row in m], dtype=complex)
    except TypeError:
        raise BadInput(f"expected a {shape[0]}x{shape[1]} matrix, got {m!r}") from None
    if out.shape != shape:
        raise BadInput(f"expected a {shape[0]}x{shape[1]} matrix, got shape {out.shape}")
    return out


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


# ------------------------------------------------------------ channel specs


def channel_from_spec(spec: dict) -> np.ndarray:
    """Kraus operators described by a parsed channel spec document."""
    if not isinstance(spec, dict):
        raise BadInput("channel spec must be a JSON object")
    kind = spec.get("kind", "kraus" if "ops" in spec else "preset")
    if kind == "kraus":
        ops = spec.get("ops")
        if not isinstance(ops, list) or not ops:
            raise BadInput("kraus spec needs a non-empty 'ops' list")
        try:
            return kraus_ops([parse_matrix(op) for op in ops])
        except (BadParam, IncompleteKraus) as e:
            raise BadInput(str(e)) from None
    if kind != "preset":
        raise BadInput(f"unknown spec kind {kind!r}")
    name = spec.get("name")
    if not isinstance(name, str):
        raise BadInput("preset spec needs a 'name'")
    params: dict[str, Any] = {}
    for key, value in spec.items():
        if key in ("kind", "name"):
            continue
        if key == "matrix":
            value = parse_matrix(value)
        elif key == "state":
            value = np.asarray(value, dtype=float) if np.ndim(value) == 1 else parse_matrix(value)
        params[key] = value
    try:
        return preset(name, **params)
    except (BadParam, IncompleteKraus) as e:
        raise BadInput(str(e)) from None


def load_channel_spec(path) -> np.ndarray:
    try:
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise BadInput(f"cannot read channel spec {path}: {e}") from None
    return channel_from_spec(spec)


# ------------------------------------------------------------------ points


def points_to_csv(points: Iterable[BlochPoint]) -> str:
    points = list(points)
    weighted = any(p.weight is not None for p in points)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POINTS_HEADER + (["weight"] if weighted else []))
    for i, p in enumerate(points):
        row = [p.input_id if p.input_id is not None else str(i)] + [_fmt(v) for v in p.r]
        if weighted:
            row.append("" if p.weight is None else _fmt(p.weight))
        w.writerow(row)
    return buf.getvalue()


def write_points(path, points: Iterable[BlochPoint]) -> None:
    atomic_write(path, points_to_csv(points))


def read_points(path) -> list[BlochPoint]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise BadInput(f"cannot read points file {path}: {e}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [h.strip() for h in rows[0][:4]] != POINTS_HEADER:
        raise BadInput(f"points file must start with header {','.join(POINTS_HEADER)}[,weight]")
    header = [h.strip() for h in rows[0]]
    weighted = len(header) == 5 and header[4] == "weight"
    if len(header) not in (4, 5) or (len(header) == 5 and not weighted):
        raise BadInput(f"unexpected points header {rows[0]}")
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise BadInput(f"line {n}: expected {len(header)} fields, got {len(row)}")
        try:
            r = np.array([float(v) for v in row[1:4]])
            weight = float(row[4]) if weighted and row[4].strip() else None
        except ValueError:
            raise BadInput(f"line {n}: non-numeric coordinate") from None
        out.append(BlochPoint(r, input_id=row[0], weight=weight))
    return out


# ------------------------------------------------------------------- sweep


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    return "nan" if math.isnan(x) else _fmt(x)


def sweep_to_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in result.rows:
        w.writerow(
            [
                _cell(r.theta),
                _cell(r.param),
                _cell(r.volume),
                _cell(r.volume_bound),
                _cell(r.negativity),
                _cell(r.concurrence),
                _cell(r.memory_robustness),
                _cell(r.eb),
                _cell(r.fit_residual),
                ";".join(r.flags),
            ]
        )
    return buf.getvalue()


def write_sweep(path, result: SweepResult) -> None:
    atomic_write(path, sweep_to_csv(result))


def read_sweep(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# ------------------------------------------------------------------ report


def _num(x):
    x = float(x)
    return None if math.isnan(x) else x


def ellipsoid_to_json(e: Ellipsoid) -> dict:
    return {
        "center": [float(v) for v in e.center],
        "Q": [[float(v) for v in row] for row in e.Q],
        "semiaxes": [float(v) for v in e.semiaxes],
        "axes": [[float(v) for v in row] for row in e.axes],
        "chirality": int(e.chirality),
        "volume": volume(e),
        "volume_bound": volume_bound(e),
    }


def ellipsoid_from_json(d: dict) -> Ellipsoid:
    try:
        return Ellipsoid.from_shape(d["center"], d["Q"], int(d.get("chirality", 0)))
    except (KeyError, TypeError, ValueError) as e:
        raise BadInput(f"malformed ellipsoid record: {e}") from None


def metrics_to_json(m: MemoryReport) -> dict:
    return {
        "eb": bool(m.eb),
        "negativity": _num(m.negativity),
        "concurrence": _num(m.concurrence),
        "memory_robustness": _num(m.memory_robustness),
        "volume_bound": _num(m.volume_bound),
        "lemma_gap": _num(m.lemma_gap),
    }


def build_report(
    ellipsoid: Ellipsoid,
    provenance: dict,
    candidates: list[dict],
    metrics: MemoryReport | None = None,
) -> dict:
    """Report document with a fixed key order.

    ``candidates`` items carry ``chirality``, ``choi`` and optionally ``metrics``
    (a :class:`MemoryReport`).
    """
    cands = []
    for c in candidates:
        item = {"chirality": int(c["chirality"]), "choi": matrix_to_json(c["choi"])}
        if c.get("metrics") is not None:
            item["metrics"] = metrics_to_json(c["metrics"])
        cands.append(item)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "provenance": {k: provenance[k] for k in ("mode", "seed", "shots", "fit_residual") if k in provenance},
        "ellipsoid": ellipsoid_to_json(ellipsoid),
    }
    if metrics is not None:
        doc["metrics"] = metrics_to_json(metrics)
    doc["candidates"] = cands
    return doc


def report_to_text(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_report(path, doc: dict) -> None:
    atomic_write(path, report_to_text(doc))


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise BadInput(f"cannot read {path}: {e}") from None


# -------------------------------------------------------------------- mesh


def mesh_to_obj(meshes: list[tuple[str, Mesh]]) -> str:
    lines = ["# qmemory mesh", f"# schema_version {SCHEMA_VERSION}"]
    offset = 0
    for name, m in meshes:
        lines.append(f"o {name}")
        lines.extend(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in m.vertices)
        lines.extend(f"f {a + 1 + offset} {b + 1 + offset} {c + 1 + offset}" for a, b, c in m.faces)
        offset += len(m.vertices)
    return "\n".join(lines) + "\n"


def mesh_to_json(meshes: list[tuple[str, Mesh]]) -> str:
    (name, first), rest = meshes[0], meshes[1:]
    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "vertices": first.vertices.tolist(),
        "faces": first.faces.tolist(),
    }
    if rest:
        doc["objects"] = [{"name": n, "vertices": m.vertices.tolist(), "faces": m.faces.tolist()} for n, m in rest]
    return json.dumps(doc, allow_nan=False) + "\n"


def write_mesh(path, meshes: list[tuple[str, Mesh]]) -> None:
    text = mesh_to_json(meshes) if str(path).lower().endswith(".json") else mesh_to_obj(meshes)
    atomic_write(path, text)


def read_obj(path) -> dict[str, np.ndarray]:
    """Vertices of each object in an OBJ file, keyed by object name."""
    objects: dict[str, list] = {}
    current = "default"
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "o":
                current = parts[1] if len(parts) > 1 else "default"
                objects.setdefault(current, [])
            elif parts[0] == "v":
                objects.setdefault(current, []).append([float(v) for v in parts[1:4]])
    return {k: np.array(v) for k, v in objects.items()}
