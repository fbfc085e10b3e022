"""Ellipsoid primitives: minimum-volume enclosing ellipsoids, log-volumes,
Cholesky whitening and eigenvalue (VFI) checks.

Ellipsoids are stored in "shape" form, ``{x : (x - c)^T P^{-1} (x - c) <= 1}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np
from scipy.special import gammaln

log = logging.getLogger(__name__)

DEFAULT_MVEE_TOL = 1e-7

# Hull pre-filtering only pays off in low dimension with many points.
_HULL_MAX_DIM = 3
_HULL_MIN_POINTS = 64


class DegenerateCloud(ValueError):
    """Points do not affinely span the ambient space."""


class NotPositiveDefinite(ValueError):
    """Matrix is not symmetric positive definite."""


@dataclass(frozen=True)
class Ellipsoid:
    center: np.ndarray
    shape: np.ndarray
    # Optional square factor F with shape = F F^T, kept by the MVEE solver so
    # that thin ellipsoids can be queried without refactoring ``shape``.
    factor: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        c = np.array(self.center, dtype=float)
        p = np.array(self.shape, dtype=float)
        if p.shape != (c.size, c.size):
            raise ValueError(f"shape {p.shape} does not match center of size {c.size}")
        c.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", p)
        if self.factor is not None:
            f = np.array(self.factor, dtype=float)
            f.setflags(write=False)
            object.__setattr__(self, "factor", f)

    def _factor(self) -> np.ndarray:
        return self.factor if self.factor is not None else whitening_factor(self.shape)

    @property
    def dim(self) -> int:
        return self.center.size

    def containment(self, points) -> np.ndarray:
        """Quadratic form ``(x-c)^T P^{-1} (x-c)`` for each row of ``points``."""
        d = np.atleast_2d(points) - self.center
        z = np.linalg.solve(self._factor(), d.T)
        return np.sum(z * z, axis=0)

    def log_det(self) -> float:
        if self.factor is not None:
            return 2.0 * float(np.linalg.slogdet(self.factor)[1])
        return _logdet_spd(self.shape)

    def log_volume(self) -> float:
        return log_volume(self)


class VfiBounds(NamedTuple):
    eps_min: float
    lambda_max: float

    def validate(self):
        if not 0 < self.eps_min < self.lambda_max:
            raise ValueError(f"need 0 < eps_min < lambda_max, got {self}")
        return self


class VfiCheck(NamedTuple):
    status: str  # "ok" | "below_floor" | "above_ceiling"
    value: float | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def log_unit_ball_volume(n: int) -> float:
    """log c_n with c_n = pi^(n/2) / Gamma(n/2 + 1)."""
    return 0.5 * n * np.log(np.pi) - gammaln(0.5 * n + 1.0)


def _logdet_spd(m: np.ndarray) -> float:
    L = whitening_factor(m)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def log_volume(e: Ellipsoid) -> float:
    return float(log_unit_ball_volume(e.dim)) + 0.5 * e.log_det()


def whitening_factor(m) -> np.ndarray:
    """Lower-triangular ``L`` with ``m = L L^T``.

    Raises NotPositiveDefinite for asymmetric or non-PD input.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotPositiveDefinite(f"expected a square matrix, got shape {m.shape}")
    scale = np.max(np.abs(m)) if m.size else 0.0
    if not np.all(np.isfinite(m)) or np.max(np.abs(m - m.T), initial=0.0) > 1e-12 * max(scale, 1e-300):
        raise NotPositiveDefinite("matrix is not symmetric")
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def check_vfi(e: Ellipsoid, bounds: VfiBounds) -> VfiCheck:
    lam = np.linalg.eigvalsh(e.shape)
    if lam[0] < bounds.eps_min:
        return VfiCheck("below_floor", float(lam[0]))
    if lam[-1] > bounds.lambda_max:
        return VfiCheck("above_ceiling", float(lam[-1]))
    return VfiCheck("ok")


def enforce_vfi_floor(shape: np.ndarray, eps_min: float) -> np.ndarray:
    """Inflate ``shape`` isotropically until its smallest eigenvalue is ``eps_min``."""
    shape = 0.5 * (shape + shape.T)
    lam_min = np.linalg.eigvalsh(shape)[0]
    if lam_min >= eps_min:
        return shape
    return shape + (eps_min - lam_min) * np.eye(shape.shape[0])


def enforce_vfi_ceiling(shape: np.ndarray, lambda_max: float) -> np.ndarray:
    """Clip eigenvalues above ``lambda_max``; eigenvectors are kept."""
    shape = 0.5 * (shape + shape.T)
    w, V = np.linalg.eigh(shape)
    if w[-1] <= lambda_max:
        return shape
    m = (V * np.minimum(w, lambda_max)) @ V.T
    return 0.5 * (m + m.T)


# ---------------------------------------------------------------- MVEE core


@numba.njit(cache=True)
def _wolfe_atwood(Q, u, tol, max_iter, refresh):
    # Khachiyan coordinate ascent with Todd-Yildirim drop steps on the
    # lifted points Q (d x M).  Returns (u, iterations, converged).
    d, M = Q.shape
    QT = np.ascontiguousarray(Q.T)
    dd = float(d)
    X = (Q * u) @ QT
    Xinv = np.ascontiguousarray(np.linalg.inv(X))
    W = Xinv @ Q
    g = np.sum(Q * W, axis=0)
    it = 0
    converged = False
    while it < max_iter:
        j = 0
        gmax = -1.0
        k = -1
        gmin = np.inf
        for i in range(M):
            if g[i] > gmax:
                gmax = g[i]
                j = i
            if u[i] > 0.0 and g[i] < gmin:
                gmin = g[i]
                k = i
        kp = gmax / dd - 1.0
        km = 1.0 - gmin / dd
        if kp <= tol and km <= tol:
            converged = True
            break
        drop = False
        if kp >= km:
            idx = j
            lam = (gmax - dd) / (dd * (gmax - 1.0))
        else:
            idx = k
            floor = -u[k] / (1.0 - u[k])
            # g >= 1 in exact arithmetic; a point at the weighted mean can
            # round below it, which would flip the sign of the step.
            if gmin - 1.0 > 1e-12:
                lam = (gmin - dd) / (dd * (gmin - 1.0))
            else:
                lam = floor
            if lam <= floor:
                lam = floor
                drop = True
        u *= 1.0 - lam
        u[idx] += lam
        if drop:
            u[idx] = 0.0
        it += 1
        if it % refresh == 0:
            X = (Q * u) @ QT
            Xinv = np.ascontiguousarray(np.linalg.inv(X))
            W = Xinv @ Q
            g = np.sum(Q * W, axis=0)
            continue
        w = Xinv @ QT[idx]
        gi = g[idx]
        denom = (1.0 - lam) + lam * gi
        coef = lam / denom
        Xinv = (Xinv - coef * np.outer(w, w)) / (1.0 - lam)
        a = QT @ w
        g = (g - coef * a * a) / (1.0 - lam)
    return u, it, converged


@numba.njit(cache=True)
def _dual_state(Q, QT, u):
    X = (Q * u) @ QT
    Xinv = np.ascontiguousarray(np.linalg.inv(X))
    g = np.sum(Q * (Xinv @ Q), axis=0)
    sign, ld = np.linalg.slogdet(X)
    return Xinv, g, ld


@numba.njit(cache=True)
def _barrier_objective(Q, QT, u, mu):
    X = (Q * u) @ QT
    sign, ld = np.linalg.slogdet(X)
    if sign <= 0:
        return -np.inf
    return ld + mu * np.sum(np.log(u))


@numba.njit(cache=True)
def _barrier_newton(Q, u, tol, max_iter):
    # Path-following Newton ascent on log det X(u) + mu * sum(log u) over the
    # simplex.  All weights stay positive, so the method does not care
    # whether the optimal weights are unique (symmetric point sets).  At the
    # centre of the path max_i g_i < d + M mu, which gives the stopping rule.
    d, M = Q.shape
    QT = np.ascontiguousarray(Q.T)
    dd = float(d)
    u = 0.5 * u / u.sum() + 0.5 / M
    Xinv, g, f0 = _dual_state(Q, QT, u)
    mu = max(g.max() / dd - 1.0, 1e-4) * dd / M
    mu_final = 0.5 * tol * dd / M
    ones = np.ones(M)
    it = 0
    while it < max_iter:
        for _ in range(60):
            it += 1
            Xinv, g, f0 = _dual_state(Q, QT, u)
            G = QT @ Xinv @ Q
            A = G * G
            for i in range(M):
                A[i, i] += mu / (u[i] * u[i])
            gr = g + mu / u
            a = np.linalg.solve(A, gr)
            b = np.linalg.solve(A, ones)
            nu = a.sum() / b.sum()
            delta = a - nu * b
            dec = delta @ gr
            if dec < 1e-20:
                break
            t = 1.0
            for i in range(M):
                if delta[i] < 0.0:
                    t = min(t, -0.99 * u[i] / delta[i])
            if dec < 1e-10 and t == 1.0:
                # Quadratic region: the objective change is below rounding,
                # so a line search would only stall.
                trial = u + delta
            else:
                phi0 = _barrier_objective(Q, QT, u, mu)
                for _ in range(50):
                    trial = u + t * delta
                    if _barrier_objective(Q, QT, trial, mu) >= phi0 + 0.25 * t * dec:
                        break
                    t *= 0.5
            u = trial / trial.sum()
        if mu <= mu_final:
            Xinv, g, f0 = _dual_state(Q, QT, u)
            return u, it, g.max() / dd - 1.0 <= tol
        mu = max(0.1 * mu, mu_final)
    return u, it, False


def _screen(Q, u):
    """Harman-Pronzato test: points that cannot carry optimal weight."""
    d = Q.shape[0]
    QT = np.ascontiguousarray(Q.T)
    _, g, _ = _dual_state(Q, QT, u)
    # eps is kept away from zero: at an exact optimum the bound equals d and
    # rounding would otherwise discard genuine support points.
    eps = max(g.max() / d - 1.0, 1e-8)
    h = d * (1.0 + 0.5 * eps - 0.5 * np.sqrt(eps * (4.0 + eps - 4.0 / d)))
    return g >= h * (1.0 - 1e-12)


def _solve_dual(Q, u, tol, max_iter):
    coarse = max(tol, 1e-3)
    u, it, ok = _wolfe_atwood(Q, u, coarse, max_iter, 64)
    if coarse == tol:
        return u, it, ok
    keep = np.flatnonzero(_screen(Q, u))
    if keep.size < Q.shape[0]:
        keep = np.arange(Q.shape[1])
    Qk = np.ascontiguousarray(Q[:, keep])
    try:
        uk, it2, ok2 = _barrier_newton(Qk, u[keep].copy(), tol, 500)
    except np.linalg.LinAlgError:
        uk, it2, ok2 = u[keep], 0, False
    if ok2:
        out = np.zeros_like(u)
        out[keep] = uk
        return out, it + it2, True
    # fall back to plain ascent
    u3, it3, ok3 = _wolfe_atwood(Q, u, tol, max_iter, 64)
    return u3, it + it2 + it3, ok3


# Relative singular-value cutoff for "spans R^n".
_RANK_RTOL = 1e-10


def _affine_rank(points: np.ndarray) -> int:
    centered = points - points.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > _RANK_RTOL * s[0]))


def _check_spanning(points: np.ndarray):
    M, n = points.shape
    if M < n + 1:
        raise DegenerateCloud(f"{M} points cannot span R^{n}")
    r = _affine_rank(points)
    if r < n:
        raise DegenerateCloud(f"points span an affine subspace of dimension {r} < {n}")


def _hull_indices(points: np.ndarray) -> np.ndarray:
    from scipy.spatial import ConvexHull, QhullError

    if points.shape[1] == 1:
        return np.unique([np.argmin(points[:, 0]), np.argmax(points[:, 0])])
    try:
        return np.sort(ConvexHull(points).vertices)
    except QhullError:
        return np.arange(points.shape[0])


def mvee_weights(points, tolerance: float = DEFAULT_MVEE_TOL, weights0=None, max_iter: int = 200_000):
    """Solve the MVEE problem and return ``(Ellipsoid, weights)``.

    ``weights`` are the dual (barycentric) weights, one per input point; points
    with zero weight are not on the optimal boundary.  ``weights0`` warm-starts
    the ascent.
    """
    P = np.ascontiguousarray(points, dtype=float)
    if P.ndim != 2:
        raise ValueError("points must be a 2-D array (M x n)")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    _check_spanning(P)
    M, n = P.shape

    keep = None
    if n <= _HULL_MAX_DIM and M >= _HULL_MIN_POINTS and weights0 is None:
        keep = _hull_indices(P)
        Pw = P[keep]
    else:
        Pw = P
    m = Pw.shape[0]

    # The problem is affine invariant: solve it for whitened points, which
    # keeps the lifted moment matrix well conditioned for elongated clouds.
    mean = Pw.mean(axis=0)
    _, sv, vt = np.linalg.svd(Pw - mean, full_matrices=False)
    A = vt.T * sv
    Z = (Pw - mean) @ (vt.T / sv)

    if weights0 is None:
        u = np.full(m, 1.0 / m)
    else:
        u0 = np.asarray(weights0, dtype=float)
        u = 0.5 * u0 / u0.sum() + 0.5 / m
    Q = np.vstack([Z.T, np.ones(m)])
    # Internal tolerance is tightened so that after the final rescale every
    # point is inside 1 + tol and every support point is above 1 - tol.
    inner = 0.45 * tolerance * n / (n + 1)
    u, iters, ok = _solve_dual(np.ascontiguousarray(Q), u.copy(), inner, max_iter)
    if not ok:
        log.warning("MVEE did not converge in %d iterations (M=%d, n=%d)", iters, m, n)

    cz = Z.T @ u
    cov = (Z.T * u) @ Z - np.outer(cz, cz)
    shape_z = n * 0.5 * (cov + cov.T)
    d = Z - cz
    scale = float(np.max(np.einsum("ij,ij->i", d, np.linalg.solve(shape_z, d.T).T)))
    F = A @ np.linalg.cholesky(shape_z * scale)
    shape = F @ F.T
    e = Ellipsoid(mean + A @ cz, 0.5 * (shape + shape.T), F)

    if keep is not None:
        full = np.zeros(M)
        full[keep] = u
        u = full
    return e, u


def mvee(points, tolerance: float = DEFAULT_MVEE_TOL) -> Ellipsoid:
    """Minimum-volume enclosing ellipsoid of the rows of ``points``.

    Every point satisfies containment <= 1 + tolerance, and at least n + 1
    points sit on the boundary to within the same tolerance.
    """
    return mvee_weights(points, tolerance)[0]


def log_det_mvee(points, tolerance: float = DEFAULT_MVEE_TOL) -> float:
    """``log det`` of the MVEE shape matrix (the regime statistic)."""
    return mvee(points, tolerance).log_det()


def enclosing_shape(points, tolerance: float = DEFAULT_MVEE_TOL):
    """MVEE inside the affine hull of ``points``, embedded as a PSD matrix.

    Unlike :func:`mvee` this never raises on rank deficiency: a cloud spanning
    an r-dimensional affine subspace yields a rank-r shape.  Returns
    ``(center, shape)``.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    M, n = P.shape
    mean = P.mean(axis=0)
    centered = P - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return mean, np.zeros((n, n))
    r = int(np.sum(s > _RANK_RTOL * s[0]))
    if r == n:
        e = mvee(P, tolerance)
        return e.center, np.array(e.shape)
    basis = vt[:r].T  # n x r
    coords = centered @ basis
    if r == 1:
        lo, hi = coords[:, 0].min(), coords[:, 0].max()
        c_sub = np.array([0.5 * (lo + hi)])
        s_sub = np.array([[(0.5 * (hi - lo)) ** 2]])
    else:
        e = mvee(coords, tolerance)
        c_sub, s_sub = e.center, np.array(e.shape)
    return mean + basis @ c_sub, basis @ s_sub @ basis.T
