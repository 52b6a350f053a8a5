"""Robustness of two-qubit Choi matrices and states by bisection on the mixing weight.

For a fixed weight ``t`` the question "is there an admissible noise ``X`` such
that ``rho + t X`` has a positive partial transpose" is a convex feasibility
problem over three sets:

* ``S1``: positive semidefinite 4x4 matrices,
* ``S2``: the affine set of admissible noise (unit trace and, for channels,
  input marginal ``I/2``),
* ``S3``: ``{X : (rho + t X)^Gamma >= 0}``.

It is decided with Dykstra's cyclic projections (two sets in the state case,
where PSD and unit trace combine into one exact projection). Every iterate
can be turned into an exact channel (or state) and priced: ``f(s) =
lmin((rho + s X)^Gamma)`` is concave in ``s``, so a few Newton steps plus
mixing in ``4 |f|`` of ``I/4`` give a certified upper bound. Lower bounds come
from dual witnesses ``B >= 0``: for every admissible ``X``

    Tr[B (rho + t X)^Gamma] >= 0  ==>  t >= -Tr[B rho^Gamma] / lmax(B^Gamma + H (x) I)

for any traceless Hermitian ``H`` (channel case) or ``H = 0`` (state case).

The bisection bracket is seeded by an optimized witness and by the noise that
complementary slackness with that witness suggests; projection checks then
shrink whatever gap remains. A residual that stalls above ``1e-6`` is the
uncertified fallback for a lower update.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import minimize

from .errors import BadParam, NoConvergence
from .numerics import PAULIS, check_hermitian, partial_transpose

log = logging.getLogger(__name__)

FEASIBLE_RESIDUAL = 1e-8
STALL_FLOOR = 1e-6
STALL_WINDOW = 500
STALL_GAIN = 1e-3
ITERATION_CAP = 50_000
CHUNK = 250
CHECK_EVERY = 10

_CHANNEL, _STATE = 0, 1


class Verdict(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    STALLED = "stalled"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class Feasibility:
    verdict: Verdict
    t: float
    upper: float
    lower: float
    iterations: int
    residual: float
    point: np.ndarray | None = None


@dataclass(frozen=True)
class RobustnessResult:
    """Bisection outcome; ``value`` is the bracket midpoint.

    ``upper`` is always backed by an explicit admissible noise matrix.
    ``lower_certified`` is False when some lower update relied on a stalled
    residual instead of a dual witness.
    """

    value: float
    lower: float
    upper: float
    lower_certified: bool
    checks: int
    iterations: int


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True)
def _pt(x):
    y = np.empty_like(x)
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    y[2 * a + b, 2 * c + d] = x[2 * a + d, 2 * c + b]
    return y


@numba.njit(cache=True)
def _herm(x):
    return 0.5 * (x + x.conj().T)


@numba.njit(cache=True)
def _psd(x):
    w, v = np.linalg.eigh(_herm(x))
    for i in range(4):
        if w[i] < 0.0:
            w[i] = 0.0
    return (v * w) @ v.conj().T


@numba.njit(cache=True)
def _density(x):
    """Projection onto density matrices: eigenvalues projected onto the simplex."""
    w, v = np.linalg.eigh(_herm(x))
    u = w[::-1]
    css = 0.0
    shift = 0.0
    for k in range(4):
        css += u[k]
        cand = (css - 1.0) / (k + 1)
        if u[k] - cand > 0.0:
            shift = cand
    for i in range(4):
        w[i] = max(w[i] - shift, 0.0)
    return (v * w) @ v.conj().T


@numba.njit(cache=True)
def _affine(x, mode):
    y = x.copy()
    if mode == _CHANNEL:
        for a in range(2):
            for c in range(2):
                m = x[2 * a, 2 * c] + x[2 * a + 1, 2 * c + 1]
                if a == c:
                    m -= 0.5
                y[2 * a, 2 * c] -= 0.5 * m
                y[2 * a + 1, 2 * c + 1] -= 0.5 * m
    else:
        tr = 0.0 + 0.0j
        for i in range(4):
            tr += x[i, i]
        for i in range(4):
            y[i, i] += 0.25 * (1.0 - tr)
    return y


@numba.njit(cache=True)
def _ppt_set(x, rho, t):
    return (_pt(_psd(_pt(rho + t * x))) - rho) / t


@numba.njit(cache=True)
def _repair(x, mode):
    """Nearest-ish exactly admissible noise: affine fix, then mix with I/4."""
    y = _herm(_affine(_herm(x), mode))
    lam = np.linalg.eigvalsh(y)[0]
    if lam < 0.0:
        s = -lam / (0.25 - lam)
        y = (1.0 - s) * y
        for i in range(4):
            y[i, i] += 0.25 * s
    return y


@numba.njit(cache=True)
def _lmin_along(rho_pt, x_pt, s):
    w, v = np.linalg.eigh(_herm(rho_pt + s * x_pt))
    return w[0], v[:, 0]


@numba.njit(cache=True)
def _certify(rho, t, xr):
    """Certified upper bound from an admissible noise ``xr`` tried at weight ``t``.

    ``f(s) = lmin((rho + s xr)^Gamma)`` is concave, so Newton steps from a
    point with ``f < 0`` approach the root from below; whatever violation is
    left is removed by mixing in ``I/4`` at weight ``4 |f|``.
    """
    rp = _pt(rho)
    xp = _pt(xr)
    f, v = _lmin_along(rp, xp, t)
    best = t + 4.0 * max(0.0, -f)
    if f >= 0.0:
        lo, hi = 0.0, t
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if _lmin_along(rp, xp, mid)[0] >= 0.0:
                hi = mid
            else:
                lo = mid
        return hi
    s = t
    for _ in range(6):
        d = np.real(np.vdot(v, xp @ v))
        if d <= 0.0:
            break
        s = s - f / d
        f, v = _lmin_along(rp, xp, s)
        best = min(best, s + 4.0 * max(0.0, -f))
        if f >= 0.0:
            break
    return best


@numba.njit(cache=True)
def _dykstra_chunk(rho, t, mode, x, p1, p3, n_iter, slack, stall):
    """Advance Dykstra's iteration in place.

    Returns (code, iterations, residual, upper); code 1 feasible, 2 stalled,
    0 still running; ``upper`` is the best certified bound seen. ``stall`` holds (best residual, iterations since best).
    """
    residual = np.inf
    upper = np.inf
    for it in range(1, n_iter + 1):
        if mode == _STATE:
            y = _density(x + p1)
            p1[:, :] = x + p1 - y
            x[:, :] = y
        else:
            y = _psd(x + p1)
            p1[:, :] = x + p1 - y
            x[:, :] = _affine(y, mode)
        z = x + p3
        y = _ppt_set(z, rho, t)
        p3[:, :] = z - y
        x[:, :] = y
        if it % CHECK_EVERY == 0:
            d_psd = np.linalg.norm(x - _psd(x))
            d_aff = np.linalg.norm(x - _affine(x, mode))
            residual = max(d_psd, d_aff)
            upper = _certify(rho, t, _repair(x, mode))
            if residual < FEASIBLE_RESIDUAL or upper <= t + slack:
                return 1, it, residual, upper
            if residual < stall[0] * (1.0 - STALL_GAIN):
                stall[0] = residual
                stall[1] = 0.0
            else:
                stall[1] += CHECK_EVERY
                if stall[1] >= STALL_WINDOW and residual > STALL_FLOOR:
                    return 2, it, residual, upper
    return 0, n_iter, residual, upper


# ---------------------------------------------------------- dual witness


def _lmax(h: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(h)[-1])


def witness_bound(rho_pt: np.ndarray, b: np.ndarray, channel: bool) -> float:
    """Lower bound on the robustness from a witness ``B >= 0``.

    A 1-D ``b`` is read as the vector of the rank-one witness ``|b><b|``.
    """
    b = np.asarray(b, dtype=complex)
    if b.ndim == 1:
        b = np.outer(b, b.conj())
    num = -float(np.real(np.trace(b @ rho_pt)))
    if num <= 0.0:
        return 0.0
    bg = partial_transpose(b)
    if not channel:
        return num / _lmax(bg)
    lifts = [np.kron(s, np.eye(2)) for s in PAULIS]

    def f(h):
        return _lmax(bg + h[0] * lifts[0] + h[1] * lifts[1] + h[2] * lifts[2])

    res = minimize(f, np.zeros(3), method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 800})
    return num / min(f(res.x), f(np.zeros(3)))


@dataclass(frozen=True)
class Witness:
    bound: float
    b: np.ndarray
    h: np.ndarray


def _lifts() -> list[np.ndarray]:
    return [np.kron(s, np.eye(2)) for s in PAULIS]


def dual_witness(rho_pt: np.ndarray, channel: bool) -> Witness:
    """Locally optimized witness ``B = G G^dag`` (and ``H`` for channels).

    Starts from the most negative eigenvector of ``rho^Gamma`` and improves
    ``(G, H)`` with BFGS. Any point the optimizer returns is a valid witness,
    so the bound holds regardless of convergence.
    """
    w, v = np.linalg.eigh(rho_pt)
    lifts = _lifts()
    n_h = 3 if channel else 0

    def unpack(z):
        g = (z[:16] + 1j * z[16:32]).reshape(4, 4)
        return g @ g.conj().T, z[32:]

    def ratio(z):
        b, h = unpack(z)
        wit = partial_transpose(b) + sum(hk * lk for hk, lk in zip(h, lifts))
        return float(np.real(np.trace(b @ rho_pt))) / _lmax(wit)

    def ratio_grad(z):
        # d Tr(B R) = 2 Re Tr(dG^dag R G); d lmax(W) = u^dag dW u with u the top eigenvector
        g = (z[:16] + 1j * z[16:32]).reshape(4, 4)
        h = z[32:]
        b = g @ g.conj().T
        wit = partial_transpose(b) + sum(hk * lk for hk, lk in zip(h, lifts))
        ww, vw = np.linalg.eigh(wit)
        lam, u = ww[-1], vw[:, -1]
        proj = np.outer(u, u.conj())
        num = float(np.real(np.trace(b @ rho_pt)))
        dn = 2.0 * (rho_pt @ g)
        dl = 2.0 * (partial_transpose(proj) @ g)
        grad_g = (dn * lam - num * dl) / lam**2
        grad_h = [-num * float(np.real(np.trace(lk @ proj))) / lam**2 for lk in lifts[:n_h]]
        return np.concatenate([grad_g.real.ravel(), grad_g.imag.ravel(), grad_h])

    g0 = np.zeros((4, 4), dtype=complex)
    g0[:, 0] = v[:, 0]
    z0 = np.concatenate([g0.real.ravel() + 1e-3, g0.imag.ravel(), np.zeros(n_h)])
    z = minimize(ratio, z0, jac=ratio_grad, method="BFGS").x
    b, h = unpack(z)
    bound = -ratio(z)
    rank_one = witness_bound(rho_pt, v[:, 0], channel)
    if rank_one > bound:
        return Witness(rank_one, np.outer(v[:, 0], v[:, 0].conj()), np.zeros(n_h))
    return Witness(max(bound, 0.0), b, h)


def dual_bound(rho_pt: np.ndarray, channel: bool) -> float:
    """Certified lower bound on the robustness from :func:`dual_witness`."""
    return dual_witness(rho_pt, channel).bound


def _herm_basis(k: int) -> list[np.ndarray]:
    basis = []
    for i in range(k):
        for j in range(i, k):
            e = np.zeros((k, k), dtype=complex)
            if i == j:
                e[i, i] = 1.0
                basis.append(e)
            else:
                e[i, j] = e[j, i] = 1.0
                basis.append(e)
                f = np.zeros((k, k), dtype=complex)
                f[i, j], f[j, i] = 1j, -1j
                basis.append(f)
    return basis


def recover_noise(rho: np.ndarray, wit: Witness, t: float, channel: bool) -> np.ndarray:
    """Admissible noise suggested by complementary slackness with ``wit``.

    The optimal noise lives in the top eigenspace of the witness operator and
    makes ``(rho + t X)^Gamma`` annihilate the range of ``B``; both conditions
    are linear in ``X`` and are solved in the least-squares sense.
    """
    lifts = _lifts()
    op = partial_transpose(wit.b) + sum(hk * lk for hk, lk in zip(wit.h, lifts))
    w, v = np.linalg.eigh(op)
    top = v[:, w >= w[-1] - 1e-3 * max(abs(w[-1]), 1e-12)]
    wb, vb = np.linalg.eigh(wit.b)
    gs = vb[:, wb > 1e-4 * wb[-1]]
    rho_pt = partial_transpose(rho)
    cols, basis = [], [top @ e @ top.conj().T for e in _herm_basis(top.shape[1])]
    for xb in basis:
        xp = partial_transpose(xb)
        row = [t * (xp @ gs).ravel()]
        if channel:
            m = xb.reshape(2, 2, 2, 2).trace(axis1=1, axis2=3)
            row.append(m.ravel())
        else:
            row.append(np.array([np.trace(xb)]))
        cols.append(np.concatenate(row))
    rhs = [-(rho_pt @ gs).ravel()]
    rhs.append((np.eye(2) / 2).ravel() if channel else np.array([1.0]))
    a = np.array(cols).T
    y = np.concatenate(rhs)
    a_re = np.vstack([a.real, a.imag])
    coef0 = np.linalg.lstsq(a_re, np.concatenate([y.real, y.imag]), rcond=None)[0]
    _, sv, vt = np.linalg.svd(a_re)
    null = vt[np.sum(sv > 1e-10 * sv[0]) :]
    basis = np.array(basis)
    mode = _CHANNEL if channel else _STATE

    def build(c):
        x = np.tensordot(coef0 + c @ null, basis, axes=1)
        ws, vs = np.linalg.eigh(0.5 * (x + x.conj().T))
        x = (vs * np.clip(ws, 0.0, None)) @ vs.conj().T
        return _repair(np.ascontiguousarray(x, dtype=np.complex128), mode)

    if len(null) == 0:
        return build(np.zeros(0))
    opts = {"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400 * len(null)}
    res = minimize(lambda c: _certify(rho, t, build(c)), np.zeros(len(null)), method="Nelder-Mead", options=opts)
    return build(res.x)


def _witness_from(rho, rho_pt, t, x, p3, channel) -> float:
    """Best of the rank-one witness at the iterate and the one carried by Dykstra's increment."""
    w, v = np.linalg.eigh(partial_transpose(rho + t * x))
    best = witness_bound(rho_pt, v[:, 0], channel)
    if p3 is not None:
        # The increment of the PPT projection lies in its normal cone, -t B^Gamma with B >= 0.
        wb, vb = np.linalg.eigh(partial_transpose(-0.5 * (p3 + p3.conj().T)))
        if wb[-1] > 0:
            b = (vb * np.clip(wb, 0.0, None)) @ vb.conj().T
            best = max(best, witness_bound(rho_pt, b / wb[-1], channel))
    return best


# ------------------------------------------------------------ feasibility


def _prepare(rho) -> np.ndarray:
    r = check_hermitian(rho, name="two-qubit operator")
    if r.shape != (4, 4):
        raise BadParam(f"expected a 4x4 matrix, got shape {r.shape}")
    return np.ascontiguousarray(r, dtype=np.complex128)


def check_feasible(
    rho,
    t: float,
    *,
    kind: str = "memory",
    slack: float = 0.0,
    cap: int = ITERATION_CAP,
    start: np.ndarray | None = None,
) -> Feasibility:
    """Decide whether weight ``t`` of admissible noise makes ``rho`` PPT.

    ``slack`` lets the check stop as soon as an admissible point certifies
    feasibility at ``t + slack`` or better. ``start`` warm-starts the
    iteration (defaults to ``I/4``).
    """
    if t <= 0:
        raise BadParam("feasibility is only defined for t > 0")
    mode = _CHANNEL if kind == "memory" else _STATE
    channel = mode == _CHANNEL
    r = _prepare(rho)
    r_pt = partial_transpose(r)
    if start is None:
        x = np.eye(4, dtype=np.complex128) / 4
    else:
        x = np.array(start, dtype=np.complex128)
    p1 = np.zeros((4, 4), dtype=np.complex128)
    p3 = np.zeros((4, 4), dtype=np.complex128)
    stall = np.array([np.inf, 0.0])
    done = 0
    next_witness = CHUNK
    residual = np.inf
    upper = np.inf
    while done < cap:
        n = min(CHUNK, cap - done)
        code, it, residual, upper = _dykstra_chunk(r, float(t), mode, x, p1, p3, n, float(slack), stall)
        done += it
        if code == 1:
            return Feasibility(Verdict.FEASIBLE, t, upper, 0.0, done, residual, _repair(x, mode))
        if code == 2 or done >= next_witness:
            next_witness *= 2
            lb = _witness_from(r, r_pt, t, _repair(x, mode), p3, channel)
            if lb > t:
                return Feasibility(Verdict.INFEASIBLE, t, np.inf, lb, done, residual, None)
        if code == 2:
            return Feasibility(Verdict.STALLED, t, np.inf, t, done, residual, None)
    xr = _repair(x, mode)
    lb = _witness_from(r, r_pt, t, xr, p3, channel)
    return Feasibility(Verdict.UNDECIDED, t, upper, lb, done, residual, xr)


def _bisect(rho, tol: float, kind: str, ppt_tol: float, max_checks: int) -> RobustnessResult:
    if not 1e-6 <= tol <= 1e-2:
        raise BadParam(f"tol must lie in [1e-6, 1e-2], got {tol}")
    r = _prepare(rho)
    r_pt = partial_transpose(r)
    w, v = np.linalg.eigh(r_pt)
    nu = -float(w[0])
    if nu <= ppt_tol:
        return RobustnessResult(0.0, 0.0, 0.0, True, 0, 0)

    channel = kind == "memory"
    # Mixing in weight 4*nu of I/4 (an entanglement-breaking channel) always works.
    hi = 4.0 * nu
    wit = dual_witness(r_pt, channel)
    lo = min(wit.bound, hi)
    certified = True
    checks = 0
    iterations = 0
    warm = None
    if lo > 0:
        guess = recover_noise(r, wit, lo, channel)
        hi = min(hi, _certify(r, lo, guess))
        warm = guess
    while hi - lo > tol:
        if checks >= max_checks:
            raise NoConvergence(f"bisection exceeded {max_checks} feasibility checks", bracket=(lo, hi))
        mid = 0.5 * (lo + hi)
        res = check_feasible(r, mid, kind=kind, slack=0.25 * (hi - lo), start=warm)
        checks += 1
        iterations += res.iterations
        if res.verdict is Verdict.FEASIBLE:
            hi = min(hi, res.upper)
            warm = res.point
        elif res.verdict is Verdict.INFEASIBLE:
            lo = max(lo, res.lower)
        elif res.verdict is Verdict.STALLED:
            lo = mid
            certified = False
        else:
            progressed = False
            if res.upper < hi:
                hi, progressed = res.upper, True
            if res.lower > lo:
                lo, progressed = min(res.lower, hi), True
            if not progressed:
                log.warning("feasibility at t=%.6g undecided after %d iterations", mid, res.iterations)
                lo = mid
                certified = False
        log.debug("bisection t=%.6g %s bracket=[%.8g, %.8g]", mid, res.verdict.value, lo, hi)
    return RobustnessResult(0.5 * (lo + hi), lo, hi, certified, checks, iterations)


def robustness_bracket(
    rho, tol: float = 1e-4, *, kind: str = "memory", ppt_tol: float = 1e-9, max_checks: int = 200
) -> RobustnessResult:
    """Full bisection result for ``kind`` in {"memory", "state"}."""
    if kind not in ("memory", "state"):
        raise BadParam(f"kind must be 'memory' or 'state', got {kind!r}")
    return _bisect(rho, tol, kind, ppt_tol, max_checks)


def memory_robustness(choi, tol: float = 1e-4, *, ppt_tol: float = 1e-9) -> float:
    """Smallest weight of an arbitrary channel that makes the mixture entanglement breaking."""
    return robustness_bracket(choi, tol, kind="memory", ppt_tol=ppt_tol).value


def state_robustness(rho, tol: float = 1e-4, *, ppt_tol: float = 1e-9) -> float:
    """Generalized robustness with PPT targets and arbitrary two-qubit noise."""
    return robustness_bracket(rho, tol, kind="state", ppt_tol=ppt_tol).value
