"""Small dense linear algebra for qubit and two-qubit matrices.

Matrices are plain ``numpy`` arrays. The eigensolver is a cyclic complex
Jacobi iteration; dimensions never exceed 32 so its cubic-per-sweep cost is
irrelevant and it yields orthonormal eigenvectors by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadDim, NoConvergence, NonHermitian, NotPSD

HERMITIAN_TOL = 1e-9
MAX_DIM = 32

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted descending with matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(m))


def as_square(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise BadDim(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    return a


def hermiticity_error(m: np.ndarray) -> float:
    a = np.asarray(m)
    return float(np.max(np.abs(a - dagger(a)))) if a.size else 0.0


def check_hermitian(m, tol: float = HERMITIAN_TOL, name: str = "matrix") -> np.ndarray:
    """Return the Hermitian part of ``m`` after checking its asymmetry is below ``tol``."""
    a = as_square(m, name)
    err = hermiticity_error(a)
    if err > tol:
        raise NonHermitian(f"{name} is not Hermitian (max |M - M^dag| = {err:.3g} > {tol:g})")
    return 0.5 * (a + dagger(a))


def hermitian_eig(m, *, max_sweeps: int = 60) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.

    Each rotation first removes the phase of the pivot ``a[p, q]`` and then
    applies the classical real Jacobi rotation, so the accumulated transform
    stays unitary.

    Raises
    ------
    NonHermitian
        If ``max |M - M^dag| > 1e-9``.
    NoConvergence
        If the off-diagonal mass does not vanish within ``max_sweeps`` sweeps.
    """
    a = check_hermitian(m)
    n = a.shape[0]
    if n > MAX_DIM:
        raise BadDim(f"dimension {n} exceeds the supported maximum {MAX_DIM}")
    a = a.copy()
    v = np.eye(n, dtype=complex)
    scale = float(np.linalg.norm(a))
    if n == 1 or scale == 0.0:
        return Spectrum(np.real(np.diag(a)).copy(), v)

    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= eps * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= eps * eps * scale:
                    continue
                phase = apq / mag
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                g = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = dagger(g) @ a[idx, :]
                v[:, idx] = v[:, idx] @ g
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    else:
        raise NoConvergence(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")

    w = np.real(np.diag(a))
    order = np.argsort(-w, kind="stable")
    return Spectrum(w[order], v[:, order])


def eigvalsh(m) -> np.ndarray:
    """Descending eigenvalues of a Hermitian matrix."""
    return hermitian_eig(m).eigenvalues


def _spectral_apply(spec: Spectrum, values: np.ndarray) -> np.ndarray:
    v = spec.eigenvectors
    return (v * values) @ v.conj().T


def psd_sqrt(m, *, neg_tol: float = 1e-8) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix.

    Eigenvalues in ``[-neg_tol, 0)`` are treated as round-off and clipped to zero.
    """
    spec = hermitian_eig(m)
    w = spec.eigenvalues
    if w[-1] < -neg_tol:
        raise NotPSD(f"matrix has eigenvalue {w[-1]:.3g} < -{neg_tol:g}")
    return _spectral_apply(spec, np.sqrt(np.clip(w, 0.0, None)))


def nearest_psd(h) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix: clip negative eigenvalues."""
    spec = hermitian_eig(h)
    return _spectral_apply(spec, np.clip(spec.eigenvalues, 0.0, None))


def _side(subsystem) -> int:
    if subsystem in ("first", 0, "in", "input"):
        return 0
    if subsystem in ("second", 1, "out", "output"):
        return 1
    raise ValueError(f"subsystem must be 'first' or 'second', got {subsystem!r}")


def _as_two_qubit(rho) -> np.ndarray:
    a = np.asarray(rho, dtype=complex)
    if a.shape != (4, 4):
        raise BadDim(f"expected a 4x4 two-qubit matrix, got shape {a.shape}")
    return a


def partial_transpose(rho, subsystem="second") -> np.ndarray:
    """Transpose one qubit of a 4x4 operator, indices ordered (first, second)."""
    t = _as_two_qubit(rho).reshape(2, 2, 2, 2)
    if _side(subsystem) == 1:
        t = t.transpose(0, 3, 2, 1)
    else:
        t = t.transpose(2, 1, 0, 3)
    return np.ascontiguousarray(t).reshape(4, 4)


def partial_trace(rho, keep="first") -> np.ndarray:
    """Reduced 2x2 operator on the kept qubit of a 4x4 operator."""
    t = _as_two_qubit(rho).reshape(2, 2, 2, 2)
    if _side(keep) == 0:
        return np.einsum("abcb->ac", t)
    return np.einsum("abad->bd", t)


def random_density(rng: np.random.Generator, dim: int = 4, rank: int | None = None) -> np.ndarray:
    """Random density matrix from the induced (Ginibre) measure."""
    k = dim if rank is None else rank
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_unitary(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def bloch_vector(rho) -> np.ndarray:
    """Pauli expectation values of a qubit density matrix."""
    r = np.asarray(rho, dtype=complex)
    return np.array([np.trace(r @ s).real for s in PAULIS])


def density_from_bloch(r) -> np.ndarray:
    x, y, z = np.asarray(r, dtype=float)
    return 0.5 * (I2 + x * SX + y * SY + z * SZ)
