"""Density-matrix simulation of the depolarizing and amplitude-damping circuits.

Qubit 0 is the leftmost tensor factor. Registers hold at most five qubits.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import check_density
from .ellipsoid import (
    BlochPoint,
    default_grid,
    fit_ellipsoid,
    reconstruct_choi_candidates,
    volume,
    volume_bound,
)
from .errors import BadParam, BadShots, BadTargets, FitError, NoConvergence, NoValidCandidate
from .metrics import memory_report
from .numerics import PAULIS, bloch_vector, dagger, hermiticity_error

MAX_QUBITS = 5
CIRCUITS = ("depolarizing", "amplitude_damping")
BASES = ("X", "Y", "Z")

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_ARITY = {"H": 1, "X": 1, "Ry": 1, "U": 1, "CNOT": 2, "CRy": 2, "Fredkin": 3}


@dataclass(frozen=True)
class QRegister:
    n: int
    rho: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise BadParam(f"register size must be 1-{MAX_QUBITS}, got {self.n}")
        rho = np.asarray(self.rho, dtype=complex)
        dim = 2**self.n
        if rho.shape != (dim, dim):
            raise BadParam(f"expected a {dim}x{dim} density matrix, got shape {rho.shape}")
        if hermiticity_error(rho) > 1e-12:
            raise BadParam("register state is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise BadParam(f"register trace {np.trace(rho).real:.12g} != 1")
        if np.linalg.eigvalsh(rho)[0] < -1e-10:
            raise BadParam("register state is not positive semidefinite")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def zeros(cls, n: int) -> "QRegister":
        rho = np.zeros((2**n, 2**n), dtype=complex)
        rho[0, 0] = 1.0
        return cls(n, rho)

    def tensor(self, other: "QRegister") -> "QRegister":
        return QRegister(self.n + other.n, np.kron(self.rho, other.rho))

    def reduced(self, qubit: int) -> np.ndarray:
        """2x2 state of one qubit."""
        t = self.rho.reshape((2,) * (2 * self.n))
        keep = list(range(self.n))
        keep.remove(qubit)
        for q in sorted(keep, reverse=True):
            t = np.trace(t, axis1=q, axis2=q + t.ndim // 2)
        return t

    def bloch(self) -> np.ndarray:
        if self.n != 1:
            raise BadParam("Bloch vector is only defined for a single qubit")
        return bloch_vector(self.rho)


@dataclass(frozen=True)
class ShotRecord:
    basis: str
    shots: int
    plus_count: int

    @property
    def estimate(self) -> float:
        return 2.0 * self.plus_count / self.shots - 1.0


def _ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _u(theta: float, psi: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [np.exp(1j * psi) * s, np.exp(1j * psi) * c]], dtype=complex)


def _controlled(u: np.ndarray) -> np.ndarray:
    k = u.shape[0]
    out = np.eye(2 * k, dtype=complex)
    out[k:, k:] = u
    return out


def gate_matrix(gate: str, *params: float) -> np.ndarray:
    """Unitary of a named gate on its own qubits (first target most significant)."""
    if gate == "H":
        return _H
    if gate == "X":
        return _X
    if gate == "Ry":
        return _ry(*params)
    if gate == "U":
        return _u(*params)
    if gate == "CNOT":
        return _controlled(_X)
    if gate == "CRy":
        return _controlled(_ry(*params))
    if gate == "Fredkin":
        swap = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
        return _controlled(swap)
    raise BadParam(f"unknown gate {gate!r}; choose from {', '.join(_ARITY)}")


def apply_gate(reg: QRegister, gate: str, targets: Sequence[int], *params: float) -> QRegister:
    """Return ``G rho G^dag`` with ``gate`` acting on ``targets`` (controls first)."""
    targets = tuple(int(t) for t in np.atleast_1d(targets))
    if gate not in _ARITY:
        raise BadParam(f"unknown gate {gate!r}; choose from {', '.join(_ARITY)}")
    if len(targets) != _ARITY[gate]:
        raise BadTargets(f"{gate} acts on {_ARITY[gate]} qubit(s), got targets {targets}")
    if len(set(targets)) != len(targets) or any(not 0 <= t < reg.n for t in targets):
        raise BadTargets(f"targets {targets} must be distinct indices in [0, {reg.n})")
    g = gate_matrix(gate, *params)
    k, n = len(targets), reg.n
    gt = g.reshape((2,) * (2 * k))
    t = reg.rho.reshape((2,) * (2 * n))
    # rows: contract the gate's input legs with the target row axes
    t = np.tensordot(gt, t, axes=(list(range(k, 2 * k)), list(targets)))
    t = np.moveaxis(t, list(range(k)), list(targets))
    cols = [n + q for q in targets]
    t = np.tensordot(t, gt.conj(), axes=(cols, list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), cols)
    rho = t.reshape(2**n, 2**n)
    return QRegister(n, 0.5 * (rho + dagger(rho)))


def input_prep(theta: float, psi: float) -> QRegister:
    """Pure qubit with Bloch vector ``(sin t cos p, sin t sin p, cos t)``."""
    return apply_gate(QRegister.zeros(1), "U", [0], theta, psi)


def angles_of(r) -> tuple[float, float]:
    """``(theta, psi)`` of a nonzero Bloch direction."""
    x, y, z = np.asarray(r, dtype=float) / np.linalg.norm(r)
    return math.acos(max(-1.0, min(1.0, z))), math.atan2(y, x) % (2 * math.pi)


def depolarizing_param(circuit_theta: float) -> float:
    return 1.0 - math.sin(circuit_theta / 2) ** 2


def damping_param(circuit_theta: float) -> float:
    return math.sin(circuit_theta) ** 2


def run_depolarizing_circuit(inp: tuple[float, float], circuit_theta: float) -> QRegister:
    """Five-qubit circuit realizing the depolarizing channel with ``P = 1 - sin^2(theta/2)``.

    q0 carries the input, (q1, q2) a Bell pair, (q3, q4) a classical coin with
    bias ``sin^2(theta/2)`` on q3; a Fredkin gate controlled by q3 swaps q0 and
    q1, replacing the input by a maximally mixed qubit.
    """
    reg = input_prep(*inp).tensor(QRegister.zeros(4))
    reg = apply_gate(reg, "H", [1])
    reg = apply_gate(reg, "CNOT", [1, 2])
    reg = apply_gate(reg, "Ry", [3], circuit_theta)
    reg = apply_gate(reg, "CNOT", [3, 4])
    reg = apply_gate(reg, "Fredkin", [3, 0, 1])
    return QRegister(1, reg.reduced(0))


def run_amplitude_damping_circuit(inp: tuple[float, float], circuit_theta: float) -> QRegister:
    """Two-qubit circuit realizing amplitude damping with ``gamma = sin^2(theta)``.

    A controlled ``Ry(2 arcsin sqrt(gamma))`` moves amplitude from ``|1>`` of the
    input to the ancilla, and a CNOT back onto the input resets it to ``|0>``.
    """
    gamma = damping_param(circuit_theta)
    angle = 2.0 * math.asin(math.sqrt(gamma))
    reg = input_prep(*inp).tensor(QRegister.zeros(1))
    reg = apply_gate(reg, "CRy", [0, 1], angle)
    reg = apply_gate(reg, "CNOT", [1, 0])
    return QRegister(1, reg.reduced(0))


_RUNNERS = {"depolarizing": run_depolarizing_circuit, "amplitude_damping": run_amplitude_damping_circuit}


def circuit_param(circuit: str, circuit_theta: float) -> float:
    if circuit == "depolarizing":
        return depolarizing_param(circuit_theta)
    if circuit == "amplitude_damping":
        return damping_param(circuit_theta)
    raise BadParam(f"unknown circuit {circuit!r}; choose from {', '.join(CIRCUITS)}")


def run_circuit(circuit: str, inp: tuple[float, float], circuit_theta: float) -> QRegister:
    if circuit not in _RUNNERS:
        raise BadParam(f"unknown circuit {circuit!r}; choose from {', '.join(CIRCUITS)}")
    return _RUNNERS[circuit](inp, circuit_theta)


def tomography(reg: QRegister, shots: int | None = None, seed=0) -> tuple[BlochPoint, list[ShotRecord]]:
    """Pauli tomography of one qubit.

    With ``shots=None`` the exact expectations are returned and no records.
    Otherwise each basis gets an independent binomial draw of ``shots``
    outcomes from ``numpy.random.default_rng(seed)``.
    """
    if reg.n != 1:
        raise BadParam("tomography expects a single-qubit register")
    rho = check_density(reg.rho, tol=1e-10)
    exact = np.array([np.trace(rho @ s).real for s in PAULIS])
    if shots is None:
        return BlochPoint(np.clip(exact, -1.0, 1.0)), []
    if isinstance(shots, bool) or int(shots) != shots or shots < 1:
        raise BadShots(f"shots must be a positive integer, got {shots!r}")
    rng = np.random.default_rng(seed)
    records = []
    for basis, ev in zip(BASES, exact):
        p = min(1.0, max(0.0, 0.5 * (1.0 + ev)))
        records.append(ShotRecord(basis, int(shots), int(rng.binomial(int(shots), p))))
    return BlochPoint(np.array([rec.estimate for rec in records]), weight=float(shots)), records


def task_seed(seed: int, theta_index: int, input_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(theta_index), int(input_index)])


def simulate_points(
    circuit: str,
    circuit_theta: float,
    inputs: Sequence[tuple[float, float]],
    shots: int | None = None,
    seed: int = 0,
    theta_index: int = 0,
) -> list[BlochPoint]:
    """Output Bloch points of the circuit for inputs given as ``(theta, psi)`` angles."""
    out = []
    for i, inp in enumerate(inputs):
        reg = run_circuit(circuit, inp, circuit_theta)
        pt, _ = tomography(reg, shots, task_seed(seed, theta_index, i))
        out.append(BlochPoint(pt.r, input_id=str(i), weight=pt.weight))
    return out


@dataclass(frozen=True)
class SweepRow:
    theta: float
    param: float
    volume: float
    volume_bound: float
    negativity: float
    concurrence: float
    memory_robustness: float
    eb: bool | None
    fit_residual: float
    flags: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(f.startswith(("fit_error", "no_valid_candidate", "solver_error")) for f in self.flags)


@dataclass(frozen=True)
class SweepResult:
    circuit: str
    rows: list[SweepRow]
    shots: int | None
    seed: int
    notes: list[str] = field(default_factory=list)


def _sweep_row(circuit, ti, theta, inputs, shots, seed, tol, degeneracy_tol, ppt_tol) -> SweepRow:
    param = circuit_param(circuit, theta)
    nan = float("nan")
    points = simulate_points(circuit, theta, inputs, shots, seed, ti)
    try:
        fit = fit_ellipsoid(points, mode="exact" if shots is None else "least_squares", degeneracy_tol=degeneracy_tol)
    except FitError as e:
        return SweepRow(theta, param, nan, nan, nan, nan, nan, None, nan, (f"fit_error:{type(e).__name__}",))
    ell, flags = fit.ellipsoid, []
    if ell.degenerate:
        flags.append("degenerate")
    vol, bound = volume(ell), volume_bound(ell)
    try:
        cands = reconstruct_choi_candidates(ell)
    except NoValidCandidate:
        flags.append("no_valid_candidate")
        return SweepRow(theta, param, vol, bound, nan, nan, nan, None, fit.residual, tuple(flags))
    if len(cands) == 2:
        flags.append("two_candidates")
    cand = next((c for c in cands if c.chirality == -1), cands[0])
    flags.append(f"chirality:{cand.chirality:+d}")
    try:
        rep = memory_report(cand.choi, tol, ppt_tol=ppt_tol)
    except NoConvergence:
        flags.append("solver_error")
        return SweepRow(theta, param, vol, bound, nan, nan, nan, None, fit.residual, tuple(flags))
    return SweepRow(
        theta, param, vol, bound, rep.negativity, rep.concurrence, rep.memory_robustness, rep.eb, fit.residual, tuple(flags)
    )


def sweep(
    circuit: str,
    circuit_thetas: Sequence[float],
    input_grid=None,
    shots: int | None = None,
    seed: int = 0,
    *,
    tol: float = 1e-4,
    degeneracy_tol: float = 1e-6,
    ppt_tol: float | None = None,
    workers: int = 1,
) -> SweepResult:
    """Simulate, tomograph, fit and quantify the circuit at each ``circuit_theta``.

    Rows come out in ascending theta. Failures are flagged on the row, never
    dropped. ``ppt_tol`` defaults to ``1e-9`` for exact data and ``1e-3``
    with shot noise.
    """
    if circuit not in CIRCUITS:
        raise BadParam(f"unknown circuit {circuit!r}; choose from {', '.join(CIRCUITS)}")
    thetas = sorted(float(t) for t in circuit_thetas)
    if not thetas:
        raise BadParam("need at least one circuit theta")
    grid = default_grid() if input_grid is None else np.asarray(input_grid, dtype=float)
    inputs = [angles_of(r) for r in grid]
    if ppt_tol is None:
        ppt_tol = 1e-9 if shots is None else 1e-3
    args = [(circuit, i, t, inputs, shots, seed, tol, degeneracy_tol, ppt_tol) for i, t in enumerate(thetas)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda a: _sweep_row(*a), args))
    else:
        rows = [_sweep_row(*a) for a in args]

    notes = []
    if circuit == "amplitude_damping":
        gammas = [r.param for r in rows]
        drops = [i for i in range(1, len(rows)) if gammas[i] < gammas[i - 1] - 1e-15]
        for i in drops:
            rows[i] = replace(rows[i], flags=rows[i].flags + ("note:gamma_decreasing",))
        if drops:
            notes.append(
                "gamma = sin^2(theta) is not monotonic over the requested thetas; "
                "volumes follow gamma and do not decrease monotonically in theta"
            )
    return SweepResult(circuit, rows, shots, seed, notes)
