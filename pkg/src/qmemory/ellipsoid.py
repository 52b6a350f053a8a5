"""Channel ellipsoids: extraction, volume, fitting from output points, reconstruction.

The image of the Bloch ball under ``r -> M r + c`` is the ellipsoid
``{c + M u : |u| <= 1}`` with shape matrix ``Q = M M^T = Theta^T Theta``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .channel import TRANSPOSE_SIGNS, AffineMap, PauliForm, affine_map, choi_from_pauli, is_cptp, pauli_form
from .errors import (
    BadInput,
    BadResolution,
    DegenerateData,
    NonzeroA,
    NotAnEllipsoid,
    NoValidCandidate,
    TooFewPoints,
)
from .numerics import hermitian_eig

log = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-6
CANDIDATE_TOL = 1e-7
POINT_NORM_CAP = 1.15
MIN_POINTS = 9


@dataclass(frozen=True)
class Ellipsoid:
    """Ellipsoid ``{center + axes diag(semiaxes) u : |u| <= 1}``.

    ``chirality`` is ``sign(det Theta)`` when known and 0 for fitted data.
    """

    center: np.ndarray
    Q: np.ndarray
    semiaxes: np.ndarray
    axes: np.ndarray
    chirality: int = 0

    @classmethod
    def from_shape(cls, center, Q, chirality: int = 0) -> "Ellipsoid":
        q = np.asarray(Q, dtype=float)
        q = 0.5 * (q + q.T)
        spec = hermitian_eig(q)
        lam = np.clip(spec.eigenvalues, 0.0, None)
        return cls(
            center=np.asarray(center, dtype=float).copy(),
            Q=q,
            semiaxes=np.sqrt(lam),
            axes=np.real(spec.eigenvectors),
            chirality=int(chirality),
        )

    @property
    def degenerate(self) -> bool:
        return bool(np.any(self.semiaxes**2 < DEGENERACY_TOL))

    def surface(self, u) -> np.ndarray:
        """Map unit vectors ``u`` (shape ``(..., 3)``) onto the surface."""
        u = np.asarray(u, dtype=float)
        return self.center + (u * self.semiaxes) @ self.axes.T


@dataclass(frozen=True)
class BlochPoint:
    """Output Bloch vector, optionally tagged with its input and a weight."""

    r: np.ndarray
    input_id: str | None = None
    weight: float | None = None

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.shape != (3,) or not np.all(np.isfinite(r)):
            raise BadInput(f"Bloch point must be a finite 3-vector, got {self.r!r}")
        if np.linalg.norm(r) > POINT_NORM_CAP:
            raise BadInput(f"Bloch point norm {np.linalg.norm(r):.4f} exceeds {POINT_NORM_CAP}")
        if self.weight is not None and not self.weight > 0:
            raise BadInput(f"weight must be positive, got {self.weight}")
        object.__setattr__(self, "r", r)


class FitResult(NamedTuple):
    ellipsoid: Ellipsoid
    residual: float


@dataclass(frozen=True)
class Candidate:
    choi: np.ndarray
    chirality: int
    theta: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray


def ellipsoid_of_channel(p: PauliForm) -> Ellipsoid:
    """Channel ellipsoid: center ``B``, ``Q = Theta^T Theta``, chirality ``sign(det Theta)``."""
    norm_a = float(np.linalg.norm(p.A))
    if norm_a > 1e-8:
        raise NonzeroA(f"|A| = {norm_a:.3g}: not the Choi matrix of a trace-preserving map")
    theta = np.asarray(p.Theta, dtype=float)
    return Ellipsoid.from_shape(p.B, theta.T @ theta, int(np.sign(np.linalg.det(theta))))


def volume(e: Ellipsoid) -> float:
    return 4.0 * np.pi / 3.0 * float(abs(np.prod(e.semiaxes)))


def volume_bound(e: Ellipsoid) -> float:
    """``(3 V / 4 pi)^(1/4)``, an upper bound on the memory robustness."""
    return float(abs(np.prod(e.semiaxes))) ** 0.25


def default_grid() -> np.ndarray:
    """26 pure-state inputs: Pauli eigenstates, cube-edge midpoints and cube corners."""
    pts = []
    for i in range(3):
        for s in (1.0, -1.0):
            v = np.zeros(3)
            v[i] = s
            pts.append(v)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        for si in (1.0, -1.0):
            for sj in (1.0, -1.0):
                v = np.zeros(3)
                v[i], v[j] = si, sj
                pts.append(v / np.sqrt(2.0))
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            for sz in (1.0, -1.0):
                pts.append(np.array([sx, sy, sz]) / np.sqrt(3.0))
    return np.array(pts)


def sample_outputs(choi, inputs) -> list[BlochPoint]:
    """Exact output Bloch vectors of the channel for the given input Bloch vectors."""
    amap: AffineMap = affine_map(pauli_form(choi))
    r_in = np.atleast_2d(np.asarray(inputs, dtype=float))
    if r_in.shape[1] != 3:
        raise BadInput(f"inputs must be 3-vectors, got array of shape {r_in.shape}")
    norms = np.linalg.norm(r_in, axis=1)
    if np.any(norms > 1.0 + 1e-12):
        raise BadInput(f"input Bloch vector of norm {norms.max():.6g} lies outside the Bloch ball")
    return [BlochPoint(amap(r), input_id=str(i)) for i, r in enumerate(r_in)]


def _as_points(points) -> tuple[np.ndarray, np.ndarray]:
    if len(points) and isinstance(points[0], BlochPoint):
        r = np.array([p.r for p in points])
        w = np.array([1.0 if p.weight is None else p.weight for p in points])
    else:
        r = np.atleast_2d(np.asarray(points, dtype=float))
        w = np.ones(len(r))
    return r, w


def _enclosing_ellipsoid(x: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000):
    """Minimum-volume enclosing ellipsoid of points in R^k (Khachiyan's iteration).

    Returns ``(center, shape)`` with ``(y - center)^T shape^-1 (y - center) <= 1``.
    """
    n, k = x.shape
    if k == 1:
        lo, hi = float(x.min()), float(x.max())
        return np.array([0.5 * (lo + hi)]), np.array([[(0.5 * (hi - lo)) ** 2]])
    lifted = np.hstack([x, np.ones((n, 1))]).T
    u = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        v = lifted @ (u[:, None] * lifted.T)
        m = np.einsum("ij,ji->i", lifted.T, np.linalg.solve(v, lifted))
        j = int(np.argmax(m))
        step = (m[j] - k - 1.0) / ((k + 1.0) * (m[j] - 1.0))
        new_u = (1.0 - step) * u
        new_u[j] += step
        done = np.linalg.norm(new_u - u) < tol
        u = new_u
        if done:
            break
    c = x.T @ u
    shape = k * ((x.T * u) @ x - np.outer(c, c))
    return c, shape


def _fit_flat(r: np.ndarray, mean: np.ndarray, basis: np.ndarray) -> Ellipsoid:
    """Ellipsoid of data spanning fewer than three dimensions."""
    k = basis.shape[1]
    if k == 0:
        return Ellipsoid.from_shape(mean, np.zeros((3, 3)))
    coords = (r - mean) @ basis
    c, shape = _enclosing_ellipsoid(coords)
    return Ellipsoid.from_shape(mean + basis @ c, basis @ shape @ basis.T)


def fit_ellipsoid(points: Sequence, *, mode: str = "exact", degeneracy_tol: float = DEGENERACY_TOL) -> FitResult:
    """Fit an ellipsoid to output Bloch points.

    Parameters
    ----------
    points : sequence of BlochPoint or (n, 3) array
    mode : {"exact", "least_squares"}
        ``exact`` fits unweighted data that should lie on the surface;
        ``least_squares`` weights each point by its ``weight``.
    degeneracy_tol : float
        Eigenvalues of ``Q`` below this are treated as zero, and data whose
        RMS spread along some direction is below ``sqrt(degeneracy_tol)`` is
        treated as flat.

    Returns
    -------
    FitResult
        ``(ellipsoid, residual)`` with ``residual`` the RMS algebraic distance
        of the trace-normalized quadric ``r^T S r + 2 b^T r + d``.

    Notes
    -----
    The quadric fit needs points on the surface. Flat data (a point, segment
    or planar region) cannot be fitted that way, so it falls back to the
    minimum-volume enclosing ellipsoid within its affine hull.
    """
    if mode not in ("exact", "least_squares"):
        raise BadInput(f"mode must be 'exact' or 'least_squares', got {mode!r}")
    r, w = _as_points(points)
    if len(r) < MIN_POINTS:
        raise TooFewPoints(f"need at least {MIN_POINTS} points, got {len(r)}")
    if mode == "exact":
        w = np.ones(len(r))

    mean = np.average(r, axis=0, weights=w)
    _, sv, vt = np.linalg.svd(r - mean, full_matrices=False)
    spread = sv / np.sqrt(len(r))
    keep = spread > np.sqrt(degeneracy_tol)
    if not np.all(keep):
        e = _fit_flat(r, mean, vt[keep].T)
        return FitResult(e, 0.0)

    x, y, z = r.T
    design = np.column_stack(
        [x * x - z * z, y * y - z * z, 2 * x * y, 2 * x * z, 2 * y * z, 2 * x, 2 * y, 2 * z, np.ones_like(x)]
    )
    rhs = -z * z
    sw = np.sqrt(w / w.mean())
    a = design * sw[:, None]
    dsv = np.linalg.svd(a, compute_uv=False)
    if dsv[-1] <= 1e-10 * dsv[0]:
        raise DegenerateData("design matrix is rank deficient; the points do not determine a quadric")
    coef = np.linalg.lstsq(a, rhs * sw, rcond=None)[0]
    sxx, syy, sxy, sxz, syz, bx, by, bz, d = coef
    S = np.array([[sxx, sxy, sxz], [sxy, syy, syz], [sxz, syz, 1.0 - sxx - syy]])
    b = np.array([bx, by, bz])
    alg = np.einsum("ni,ij,nj->n", r, S, r) + 2.0 * r @ b + d
    residual = float(np.sqrt(np.average(alg**2, weights=w)))

    s_eig, s_vec = np.linalg.eigh(S)
    if s_eig[0] <= 0.0:
        raise NotAnEllipsoid(f"fitted quadric is not an ellipsoid (eigenvalues of S: {s_eig})")
    center = -np.linalg.solve(S, b)
    k = float(center @ S @ center - d)
    if k <= 0.0:
        raise NotAnEllipsoid("fitted quadric encloses no volume")
    lam = k / s_eig
    lam[lam < degeneracy_tol] = 0.0
    Q = (s_vec * lam) @ s_vec.T
    if mode == "exact" and residual > 1e-6:
        log.warning("exact-mode fit has algebraic residual %.3g; data may be noisy", residual)
    return FitResult(Ellipsoid.from_shape(center, Q), residual)


def reconstruct_choi_candidates(e: Ellipsoid, tol: float = CANDIDATE_TOL) -> list[Candidate]:
    """Choi matrices consistent with the ellipsoid, one per admissible chirality.

    Uses ``Theta = +-diag(1,-1,1) sqrt(Q)``, i.e. the Bloch action
    ``M = -+sqrt(Q)``. The ellipsoid fixes the channel only up to a rotation of
    the input Bloch sphere, so candidates match a source channel up to a
    unitary applied before it.
    """
    q = np.asarray(e.Q, dtype=float)
    w, v = np.linalg.eigh(0.5 * (q + q.T))
    if w[0] < -tol:
        raise NoValidCandidate(f"shape matrix has negative eigenvalue {w[0]:.3g}")
    sqrt_q = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    theta_plus = TRANSPOSE_SIGNS @ sqrt_q
    out: list[Candidate] = []
    for chirality, theta in ((-1, theta_plus), (1, -theta_plus)):
        choi = choi_from_pauli(PauliForm(np.zeros(3), np.asarray(e.center, dtype=float), theta))
        if not is_cptp(choi, tol).valid:
            continue
        if out and np.max(np.abs(out[0].choi - choi)) < 1e-12:
            continue
        out.append(Candidate(choi, chirality, theta))
    if not out:
        raise NoValidCandidate("no completely positive channel has this ellipsoid")
    return out


def mesh(e: Ellipsoid, resolution: int = 32) -> Mesh:
    """UV-sphere triangle mesh of the ellipsoid surface.

    ``resolution`` longitudes and ``resolution - 1`` latitude rings plus two
    poles, so there are ``resolution * (resolution - 1) + 2`` vertices.
    Faces are 0-indexed.
    """
    if isinstance(resolution, bool) or not isinstance(resolution, (int, np.integer)) or resolution < 8:
        raise BadResolution(f"resolution must be an integer >= 8, got {resolution!r}")
    n = int(resolution)
    polar = np.pi * np.arange(1, n) / n
    azim = 2.0 * np.pi * np.arange(n) / n
    st, ct = np.sin(polar)[:, None], np.cos(polar)[:, None]
    ring = np.stack([st * np.cos(azim), st * np.sin(azim), np.broadcast_to(ct, (n - 1, n))], axis=-1).reshape(-1, 3)
    unit = np.vstack([[0.0, 0.0, 1.0], ring, [0.0, 0.0, -1.0]])

    faces = []
    south = len(unit) - 1
    for j in range(n):
        jn = (j + 1) % n
        faces.append((0, 1 + j, 1 + jn))
        for i in range(n - 2):
            a, b = 1 + i * n + j, 1 + i * n + jn
            c, d = a + n, b + n
            faces.append((a, c, b))
            faces.append((b, c, d))
        last = 1 + (n - 2) * n
        faces.append((last + j, south, last + jn))
    return Mesh(e.surface(unit), np.array(faces, dtype=np.int64))
