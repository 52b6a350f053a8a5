"""Command-line interface: ``qmemory {analyze,fit,simulate,sweep,mesh}``.

Exit codes: 0 success, 2 usage or input error, 3 solver failure, 4 fitting
failure, 5 reconstruction failure, 6 sweep fully failed.
"""

from __future__ import annotations

import argparse
import ast
import logging
import math
import operator
import os
import sys

import numpy as np

from . import io as qio
from .channel import choi_from_kraus, pauli_form
from .circuitsim import CIRCUITS, angles_of, simulate_points, sweep
from .ellipsoid import (
    DEGENERACY_TOL,
    ellipsoid_of_channel,
    default_grid,
    fit_ellipsoid,
    mesh,
    reconstruct_choi_candidates,
    Ellipsoid,
)
from .errors import BadInput, BadParam, BadResolution, BadShots, FitError, NoConvergence, NoValidCandidate, QMemoryError
from .metrics import memory_report

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_FIT, EXIT_RECON, EXIT_SWEEP = 0, 2, 3, 4, 5, 6

log = logging.getLogger("qmemory")

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def parse_angle(text: str) -> float:
    """Evaluate an arithmetic angle expression such as ``3*pi/4`` or ``0.609pi``."""
    src = text.strip().replace("π", "pi")
    if src.endswith("pi") and src[:-2] and src[:-2][-1] in "0123456789.":
        src = src[:-2] + "*pi"

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(text)

    try:
        value = ev(ast.parse(src, mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError):
        raise BadInput(f"cannot parse angle {text!r}") from None
    if not math.isfinite(value):
        raise BadInput(f"angle {text!r} is not finite")
    return value


def parse_angle_list(text: str) -> list[float]:
    """Comma-separated angles, or ``start:stop:count`` for an inclusive uniform grid."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise BadInput(f"grid must be start:stop:count, got {text!r}")
        try:
            count = int(parts[2])
        except ValueError:
            raise BadInput(f"grid count must be an integer, got {parts[2]!r}") from None
        if count < 1:
            raise BadInput("grid count must be >= 1")
        return list(np.linspace(parse_angle(parts[0]), parse_angle(parts[1]), count))
    return [parse_angle(p) for p in text.split(",") if p.strip()]


def _error(msg: str) -> None:
    tag = "error"
    if sys.stderr.isatty() and "NO_COLOR" not in os.environ:
        tag = "\033[31merror\033[0m"
    print(f"qmemory: {tag}: {msg}", file=sys.stderr)


def _warn(msg: str) -> None:
    tag = "warning"
    if sys.stderr.isatty() and "NO_COLOR" not in os.environ:
        tag = "\033[33mwarning\033[0m"
    print(f"qmemory: {tag}: {msg}", file=sys.stderr)


def _emit(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        qio.atomic_write(path, text)


def _preferred(cands):
    return next((c for c in cands if c.chirality == -1), cands[0])


# ------------------------------------------------------------------ commands


def cmd_analyze(args) -> int:
    choi = choi_from_kraus(qio.load_channel_spec(args.spec))
    ell = ellipsoid_of_channel(pauli_form(choi))
    rep = memory_report(choi, args.tol)
    doc = qio.build_report(
        ell, {"mode": "analytic"}, [{"chirality": ell.chirality, "choi": choi, "metrics": rep}], metrics=rep
    )
    _emit(args.out, qio.report_to_text(doc))
    return EXIT_OK


def cmd_fit(args) -> int:
    points = qio.read_points(args.points)
    mode = "least_squares" if any(p.weight is not None for p in points) else "exact"
    fit = fit_ellipsoid(points, mode=mode, degeneracy_tol=args.degeneracy_tol)
    prov = {"mode": "fitted", "fit_residual": fit.residual}
    if args.mesh:
        qio.write_mesh(args.mesh, [("ellipsoid", mesh(fit.ellipsoid, args.resolution))])
    try:
        cands = reconstruct_choi_candidates(fit.ellipsoid)
    except NoValidCandidate as e:
        _emit(args.out, qio.report_to_text(qio.build_report(fit.ellipsoid, prov, [])))
        _error(f"reconstruction failed: {e}")
        return EXIT_RECON
    items = [{"chirality": c.chirality, "choi": c.choi, "metrics": memory_report(c.choi, args.tol)} for c in cands]
    best = items[cands.index(_preferred(cands))]["metrics"]
    _emit(args.out, qio.report_to_text(qio.build_report(fit.ellipsoid, prov, items, metrics=best)))
    return EXIT_OK


def cmd_simulate(args) -> int:
    theta = parse_angle(args.theta)
    if args.input:
        parts = args.input.split(",")
        if len(parts) != 2:
            raise BadInput(f"--input must be 'theta,psi', got {args.input!r}")
        inputs = [(parse_angle(parts[0]), parse_angle(parts[1]))]
    else:
        inputs = [angles_of(r) for r in default_grid()]
    points = simulate_points(args.preset, theta, inputs, args.shots, args.seed)
    _emit(args.out, qio.points_to_csv(points))
    return EXIT_OK


def cmd_sweep(args) -> int:
    thetas = parse_angle_list(args.thetas)
    if not thetas:
        raise BadInput("--thetas is empty")
    result = sweep(args.preset, thetas, shots=args.shots, seed=args.seed, tol=args.tol, workers=args.workers)
    for note in result.notes:
        _warn(note)
    _emit(args.out, qio.sweep_to_csv(result))
    if not any(r.ok for r in result.rows):
        _error("every sweep row failed")
        return EXIT_SWEEP
    return EXIT_OK


def _ellipsoid_from_source(path) -> Ellipsoid:
    doc = qio.load_json(path)
    if isinstance(doc, dict) and "ellipsoid" in doc and "schema_version" in doc:
        return qio.ellipsoid_from_json(doc["ellipsoid"])
    return ellipsoid_of_channel(pauli_form(choi_from_kraus(qio.channel_from_spec(doc))))


def cmd_mesh(args) -> int:
    ell = _ellipsoid_from_source(args.source)
    if ell.degenerate:
        _warn(f"ellipsoid is degenerate (semiaxes {np.array2string(ell.semiaxes, precision=6)})")
    meshes = [("ellipsoid", mesh(ell, args.resolution))]
    if args.with_sphere:
        unit = Ellipsoid.from_shape(np.zeros(3), np.eye(3))
        meshes.append(("bloch_sphere", mesh(unit, args.resolution)))
    if args.out in (None, "-"):
        sys.stdout.write(qio.mesh_to_obj(meshes))
    else:
        qio.write_mesh(args.out, meshes)
    return EXIT_OK


# -------------------------------------------------------------------- parser


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmemory", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="report ellipsoid and memory metrics of a channel spec")
    a.add_argument("spec", help="channel spec JSON")
    a.add_argument("--tol", type=float, default=1e-4, help="robustness bisection tolerance (default 1e-4)")
    a.add_argument("--out", help="report JSON path (stdout if omitted)")
    a.set_defaults(func=cmd_analyze)

    f = sub.add_parser("fit", help="fit an ellipsoid to output points and reconstruct the channel")
    f.add_argument("points", help="points CSV (input_id,x,y,z[,weight])")
    f.add_argument("--degeneracy-tol", type=float, default=DEGENERACY_TOL, help="squared semiaxis below which the ellipsoid is flagged degenerate")
    f.add_argument("--tol", type=float, default=1e-4, help="robustness bisection tolerance")
    f.add_argument("--out", help="report JSON path (stdout if omitted)")
    f.add_argument("--mesh", help="also write the fitted ellipsoid mesh (.obj or .json)")
    f.add_argument("--resolution", type=int, default=32, help="mesh resolution (>= 8)")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run a circuit and write output Bloch points")
    s.add_argument("--preset", required=True, choices=CIRCUITS)
    s.add_argument("--theta", required=True, help="circuit angle, e.g. pi/2")
    s.add_argument("--input", help="single input 'theta,psi' (default: 26-point grid)")
    s.add_argument("--shots", type=_positive_int, help="shots per basis (exact if omitted)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="points CSV path (stdout if omitted)")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="simulate, fit and quantify over a list of circuit angles")
    w.add_argument("--preset", required=True, choices=CIRCUITS)
    w.add_argument("--thetas", required=True, help="comma list (0,pi/4,...) or start:stop:count")
    w.add_argument("--shots", type=_positive_int, help="shots per basis (exact if omitted)")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--tol", type=float, default=1e-4, help="robustness bisection tolerance")
    w.add_argument("--workers", type=_positive_int, default=1, help="rows computed concurrently")
    w.add_argument("--out", help="sweep CSV path (stdout if omitted)")
    w.set_defaults(func=cmd_sweep)

    m = sub.add_parser("mesh", help="triangle mesh of an ellipsoid from a report or channel spec")
    m.add_argument("source", help="report JSON or channel spec JSON")
    m.add_argument("--resolution", type=int, default=32, help="UV resolution (>= 8)")
    m.add_argument("--with-sphere", action="store_true", help="add the unit Bloch sphere as a second object")
    m.add_argument("--out", help="mesh path, .obj or .json (OBJ on stdout if omitted)")
    m.set_defaults(func=cmd_mesh)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="qmemory: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except NoConvergence as e:
        _error(f"solver did not converge: {e}")
        return EXIT_SOLVER
    except FitError as e:
        _error(f"fit failed ({type(e).__name__}): {e}")
        return EXIT_FIT
    except NoValidCandidate as e:
        _error(f"reconstruction failed: {e}")
        return EXIT_RECON
    except (BadInput, BadParam, BadResolution, BadShots, QMemoryError) as e:
        _error(str(e))
        return EXIT_USAGE
    except OSError as e:
        _error(str(e))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
