"""Entanglement and memory quantifiers of two-qubit states and Choi matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import robustness as _rob
from .channel import is_cptp, pauli_form
from .ellipsoid import ellipsoid_of_channel, volume_bound
from .errors import BadState
from .numerics import SY, dagger, eigvalsh, hermiticity_error, partial_transpose, psd_sqrt

STATE_TOL = 1e-9
CHOI_TOL = 1e-7
PPT_TOL = 1e-9
ROUNDOFF_FLOOR = 1e-14
_YY = np.kron(SY, SY)


@dataclass(frozen=True)
class MemoryReport:
    eb: bool
    negativity: float
    concurrence: float
    memory_robustness: float
    volume_bound: float
    lemma_gap: float


def _density4(rho, tol: float = STATE_TOL) -> np.ndarray:
    r = np.asarray(rho, dtype=complex)
    if r.shape != (4, 4):
        raise BadState(f"expected a 4x4 density matrix, got shape {r.shape}")
    if hermiticity_error(r) > tol:
        raise BadState("matrix is not Hermitian")
    r = 0.5 * (r + dagger(r))
    if abs(np.trace(r).real - 1.0) > tol:
        raise BadState(f"trace {np.trace(r).real:.12g} != 1")
    if eigvalsh(r)[-1] < -tol:
        raise BadState("matrix is not positive semidefinite")
    return r


def _choi(c) -> np.ndarray:
    rep = is_cptp(c, CHOI_TOL)
    if not rep.valid:
        raise BadState(
            f"not a valid Choi matrix (min eigenvalue {rep.min_eigenvalue:.3g}, "
            f"marginal error {rep.marginal_error:.3g}, trace error {rep.trace_error:.3g})"
        )
    c = np.asarray(c, dtype=complex)
    return 0.5 * (c + dagger(c))


def concurrence(rho) -> float:
    """Wootters concurrence ``max(0, l1 - l2 - l3 - l4)``.

    ``l_i`` are the descending eigenvalues of ``sqrt(sqrt(rho) rho~ sqrt(rho))``
    with ``rho~ = (sy (x) sy) rho* (sy (x) sy)``.
    """
    r = _density4(rho)
    s = psd_sqrt(r, neg_tol=1e-8)
    flipped = _YY @ r.conj() @ _YY
    w = eigvalsh(s @ flipped @ s)
    # Round-off in near-zero eigenvalues is amplified by the square root.
    lam = np.sqrt(np.where(w < ROUNDOFF_FLOOR, 0.0, w))
    return float(min(1.0, max(0.0, lam[0] - lam[1:].sum())))


def negativity(rho) -> float:
    """Sum of the magnitudes of the negative eigenvalues of the partial transpose."""
    r = _density4(rho)
    w = eigvalsh(partial_transpose(r))
    return float(np.abs(w[w < 0]).sum())


def is_eb(c, tol: float = PPT_TOL) -> bool:
    """Entanglement breaking test: the Choi matrix has a positive partial transpose."""
    return bool(eigvalsh(partial_transpose(_choi(c)))[-1] >= -tol)


def memory_robustness(c, tol: float = 1e-4, *, ppt_tol: float = PPT_TOL) -> float:
    """Smallest weight of an arbitrary channel whose mixture with ``c`` is entanglement breaking."""
    return _rob.robustness_bracket(_choi(c), tol, kind="memory", ppt_tol=ppt_tol).value


def state_robustness(rho, tol: float = 1e-4, *, ppt_tol: float = PPT_TOL) -> float:
    """Generalized entanglement robustness with PPT targets (separable targets for two qubits)."""
    return _rob.robustness_bracket(_density4(rho), tol, kind="state", ppt_tol=ppt_tol).value


def memory_report(c, tol: float = 1e-4, *, ppt_tol: float = PPT_TOL) -> MemoryReport:
    c = _choi(c)
    bound = volume_bound(ellipsoid_of_channel(pauli_form(c)))
    eb = is_eb(c, ppt_tol)
    qm = 0.0 if eb else memory_robustness(c, tol, ppt_tol=ppt_tol)
    return MemoryReport(
        eb=eb,
        negativity=negativity(c),
        concurrence=concurrence(c),
        memory_robustness=qm,
        volume_bound=bound,
        lemma_gap=bound - qm,
    )
