"""Single-qubit channel representations and conversions.

Conventions used throughout the package:

* Choi matrix ``C = (id (x) L)(|phi+><phi+|)``; the first qubit is the input
  copy, the second the channel output.
* Applying a channel from its Choi matrix: ``L(rho) = 2 Tr_in[(rho^T (x) I) C]``.
* Pauli form ``C = 1/4 [I(x)I + sum A_i s_i(x)I + sum B_j I(x)s_j + sum T_ij s_i(x)s_j]``
  with plain Pauli-trace coefficients, so ``A = 0`` is exactly the condition
  that the input marginal is maximally mixed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BadDim, BadParam, BadState, IncompleteKraus, NonzeroA
from .numerics import (
    I2,
    PAULIS,
    bloch_vector,
    dagger,
    density_from_bloch,
    eigvalsh,
    hermitian_eig,
    hermiticity_error,
    partial_trace,
)

COMPLETENESS_TOL = 1e-8
A_TOL = 1e-8
TRANSPOSE_SIGNS = np.diag([1.0, -1.0, 1.0])

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
PHI_PLUS_PROJ = np.outer(PHI_PLUS, PHI_PLUS.conj())

PRESETS = (
    "identity",
    "unitary",
    "depolarizing",
    "amplitude_damping",
    "replacer",
    "z_measure_prepare",
)


@dataclass(frozen=True)
class PauliForm:
    A: np.ndarray
    B: np.ndarray
    Theta: np.ndarray


@dataclass(frozen=True)
class AffineMap:
    """Bloch-vector action ``r -> M r + c``."""

    M: np.ndarray
    c: np.ndarray

    def __call__(self, r) -> np.ndarray:
        return self.M @ np.asarray(r, dtype=float) + self.c


@dataclass(frozen=True)
class CptpReport:
    psd: bool
    marginal_ok: bool
    trace_ok: bool
    min_eigenvalue: float
    marginal_error: float
    trace_error: float

    @property
    def valid(self) -> bool:
        return self.psd and self.marginal_ok and self.trace_ok


def kraus_ops(ops: Sequence) -> np.ndarray:
    """Stack Kraus operators as a ``(k, 2, 2)`` array and check completeness."""
    k = np.asarray(ops, dtype=complex)
    if k.ndim == 2:
        k = k[None]
    if k.ndim != 3 or k.shape[1:] != (2, 2) or not 1 <= k.shape[0] <= 4:
        raise BadParam(f"expected 1-4 Kraus operators of shape 2x2, got array of shape {k.shape}")
    dev = np.max(np.abs(np.einsum("kji,kjl->il", k.conj(), k) - I2))
    if dev > COMPLETENESS_TOL:
        raise IncompleteKraus(f"sum K^dag K deviates from identity by {dev:.3g}")
    return k


def apply_kraus(ops, rho) -> np.ndarray:
    k = np.asarray(ops, dtype=complex)
    return np.einsum("kij,jl,kml->im", k, np.asarray(rho, dtype=complex), k.conj())


def choi_from_kraus(ops) -> np.ndarray:
    """Choi matrix of the channel with the given Kraus operators."""
    k = kraus_ops(ops)
    lifted = np.einsum("ab,kij->kaibj", I2, k).reshape(-1, 4, 4)
    choi = np.einsum("kij,jl,kml->im", lifted, PHI_PLUS_PROJ, lifted.conj())
    return 0.5 * (choi + dagger(choi))


def check_density(rho, tol: float = 1e-9) -> np.ndarray:
    r = np.asarray(rho, dtype=complex)
    if r.shape != (2, 2):
        raise BadState(f"expected a 2x2 density matrix, got shape {r.shape}")
    if hermiticity_error(r) > tol:
        raise BadState("state is not Hermitian")
    r = 0.5 * (r + dagger(r))
    if abs(np.trace(r).real - 1.0) > tol:
        raise BadState(f"state trace {np.trace(r).real:.12g} != 1")
    if eigvalsh(r)[-1] < -tol:
        raise BadState("state is not positive semidefinite")
    return r


def apply_choi(choi, rho) -> np.ndarray:
    """Output state ``2 Tr_in[(rho^T (x) I) C]`` for a qubit density matrix ``rho``."""
    r = check_density(rho)
    c = np.asarray(choi, dtype=complex)
    out = 2.0 * partial_trace(np.kron(r.T, I2) @ c, keep="second")
    return 0.5 * (out + dagger(out))


def is_cptp(m, tol: float = 1e-8) -> CptpReport:
    """Diagnose whether a 4x4 matrix is the Choi matrix of a CPTP map."""
    c = np.asarray(m, dtype=complex)
    if c.shape != (4, 4):
        raise BadDim(f"expected a 4x4 matrix, got shape {c.shape}")
    herm = hermiticity_error(c) <= tol
    h = 0.5 * (c + dagger(c))
    min_eig = float(eigvalsh(h)[-1])
    marginal_err = float(np.max(np.abs(partial_trace(h, keep="first") - I2 / 2)))
    trace_err = abs(float(np.trace(c).real) - 1.0) + abs(float(np.trace(c).imag))
    return CptpReport(
        psd=herm and min_eig >= -tol,
        marginal_ok=marginal_err <= tol,
        trace_ok=trace_err <= tol,
        min_eigenvalue=min_eig,
        marginal_error=marginal_err,
        trace_error=trace_err,
    )


def pauli_form(choi) -> PauliForm:
    c = np.asarray(choi, dtype=complex)
    A = np.array([np.trace(c @ np.kron(s, I2)).real for s in PAULIS])
    B = np.array([np.trace(c @ np.kron(I2, s)).real for s in PAULIS])
    T = np.array([[np.trace(c @ np.kron(si, sj)).real for sj in PAULIS] for si in PAULIS])
    return PauliForm(A, B, T)


def choi_from_pauli(p: PauliForm) -> np.ndarray:
    out = np.kron(I2, I2).astype(complex)
    for i, si in enumerate(PAULIS):
        out = out + p.A[i] * np.kron(si, I2) + p.B[i] * np.kron(I2, si)
        for j, sj in enumerate(PAULIS):
            out = out + p.Theta[i, j] * np.kron(si, sj)
    return out / 4.0


def affine_map(p: PauliForm) -> AffineMap:
    """Bloch action of the channel: ``M = Theta^T diag(1,-1,1)``, ``c = B``."""
    norm_a = float(np.linalg.norm(p.A))
    if norm_a > A_TOL:
        raise NonzeroA(f"|A| = {norm_a:.3g}: not the Choi matrix of a trace-preserving map")
    return AffineMap(np.asarray(p.Theta, dtype=float).T @ TRANSPOSE_SIGNS, np.asarray(p.B, dtype=float).copy())


def _unit_interval(name: str, value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise BadParam(f"{name} must be a number, got {value!r}") from None
    if not 0.0 <= v <= 1.0:
        raise BadParam(f"{name} must lie in [0, 1], got {v}")
    return v


def _state_param(state) -> np.ndarray:
    s = np.asarray(state, dtype=complex)
    if s.shape == (3,):
        if np.linalg.norm(s.real) > 1 + 1e-9 or np.any(np.abs(s.imag) > 0):
            raise BadParam("replacer Bloch vector must be real with norm <= 1")
        s = density_from_bloch(s.real)
    try:
        return check_density(s)
    except BadState as e:
        raise BadParam(f"replacer state invalid: {e}") from None


def preset(name: str, **params) -> np.ndarray:
    """Kraus operators of one of the named channels.

    ``depolarizing`` takes ``P`` (weight kept on the input), ``amplitude_damping``
    takes ``gamma``, ``unitary`` takes ``matrix`` and ``replacer`` takes
    ``state`` (2x2 density matrix or Bloch vector).
    """
    if name == "identity":
        ops = [I2]
    elif name == "unitary":
        u = np.asarray(params.get("matrix"), dtype=complex)
        if u.shape != (2, 2) or np.max(np.abs(dagger(u) @ u - I2)) > 1e-9:
            raise BadParam("unitary preset needs a 2x2 unitary 'matrix'")
        ops = [u]
    elif name == "depolarizing":
        P = _unit_interval("P", params.get("P"))
        ops = [np.sqrt((1 + 3 * P) / 4) * I2] + [np.sqrt((1 - P) / 4) * s for s in PAULIS]
    elif name == "amplitude_damping":
        g = _unit_interval("gamma", params.get("gamma"))
        ops = [
            np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex),
            np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex),
        ]
    elif name == "replacer":
        spec = hermitian_eig(_state_param(params.get("state", [0.0, 0.0, 1.0])))
        ops = []
        for lam, vec in zip(spec.eigenvalues, spec.eigenvectors.T):
            if lam <= 1e-15:
                continue
            for j in range(2):
                basis = np.zeros(2, dtype=complex)
                basis[j] = 1
                ops.append(np.sqrt(lam) * np.outer(vec, basis))
    elif name == "z_measure_prepare":
        ops = [np.diag([1, 0]).astype(complex), np.diag([0, 1]).astype(complex)]
    else:
        raise BadParam(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return kraus_ops(ops)


def random_kraus(rng: np.random.Generator, n_ops: int | None = None) -> np.ndarray:
    """Kraus operators cut from a Haar-random isometry C^2 -> C^2 (x) C^k."""
    k = int(rng.integers(1, 5)) if n_ops is None else n_ops
    g = rng.normal(size=(2 * k, 2)) + 1j * rng.normal(size=(2 * k, 2))
    v, r = np.linalg.qr(g)
    v = v * (np.diag(r) / np.abs(np.diag(r)))
    return v.reshape(k, 2, 2)


def output_bloch(choi, r) -> np.ndarray:
    """Bloch vector of the output for input Bloch vector ``r`` via the Choi matrix."""
    return bloch_vector(apply_choi(choi, density_from_bloch(r)))
