"""Innovation geometry and possibilistic information content."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from .geometry import DEFAULT_MVEE_TOL, Ellipsoid, enclosing_shape, mvee, whitening_factor
from .possibility import SupportCloud

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InnovationContext:
    predicted_measurements: np.ndarray
    innovation_shape: np.ndarray
    whitening: np.ndarray
    used_fallback: bool = False


class EvidenceScores(NamedTuple):
    q: np.ndarray
    comp: np.ndarray
    surprisal: float
    info: float


def innovation_shape(predicted_measurements, sensor_imprecision, tolerance: float = DEFAULT_MVEE_TOL) -> InnovationContext:
    """``Pi_e = Pi_h + Pi_y`` with Pi_h the MVEE of the predicted measurements.

    A predicted cloud that does not span the measurement space contributes
    its lower-rank enclosing shape (zero when all predictions coincide).
    """
    H = np.asarray(predicted_measurements, dtype=float)
    if H.ndim == 1:
        H = H[:, None]
    Py = np.atleast_2d(np.asarray(sensor_imprecision, dtype=float))
    whitening_factor(Py)
    _, Ph = enclosing_shape(H, tolerance)
    fallback = not np.any(Ph)
    if fallback:
        log.info("predicted measurements coincide; innovation shape falls back to sensor imprecision")
    Pe = Ph + Py
    Pe = 0.5 * (Pe + Pe.T)
    return InnovationContext(H, Pe, whitening_factor(Pe), fallback)


def whitened_q(ctx: InnovationContext, y):
    """Whitened squared innovations and compatibilities for measurement ``y``."""
    resid = np.atleast_1d(np.asarray(y, dtype=float))[None, :] - ctx.predicted_measurements
    z = solve_triangular(ctx.whitening, resid.T, lower=True)
    q = np.sum(z * z, axis=0)
    return q, np.exp(-0.5 * q)


def choquet_surprisal(q, prior_poss) -> float:
    """Choquet integral of q/2 under the prior possibility measure (sup-min form)."""
    q = np.asarray(q, dtype=float)
    prior_poss = np.asarray(prior_poss, dtype=float)
    if q.shape != prior_poss.shape:
        raise ValueError("q and prior possibility lengths differ")
    return float(np.max(np.minimum(0.5 * q, prior_poss)))


def info_content(surprisal: float) -> float:
    if surprisal < 0:
        raise ValueError("surprisal must be non-negative")
    return float(-np.expm1(-surprisal))


def score(ctx: InnovationContext, y, prior_poss) -> EvidenceScores:
    q, comp = whitened_q(ctx, y)
    s = choquet_surprisal(q, prior_poss)
    return EvidenceScores(q, comp, s, info_content(s))


def pcrb_floor(h_pre: float, info: float, n: int) -> float:
    """Lowest post-update entropy any admissible update may reach."""
    if info < 0.0:
        raise ValueError("information content must lie in [0, 1)")
    if info >= 1.0:
        return -np.inf
    return h_pre + 0.5 * n * np.log1p(-info)


class IsotropyResult(NamedTuple):
    holds: bool
    ratio: float
    innovation_var: float
    state_var: float


def sample_in_ellipsoid(e: Ellipsoid, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples inside ``e`` by rejection from the bounding cube."""
    n = e.dim
    L = whitening_factor(e.shape)
    out = []
    have = 0
    while have < count:
        u = rng.uniform(-1.0, 1.0, size=(max(64, 4 * count), n))
        u = u[np.sum(u * u, axis=1) <= 1.0]
        out.append(u)
        have += u.shape[0]
    u = np.concatenate(out)[:count]
    return e.center + u @ L.T


def isotropy_check(
    cloud: SupportCloud,
    ctx: InnovationContext,
    measurement_model: Callable[[np.ndarray], np.ndarray],
    core_shape: Ellipsoid,
    samples: int = 1000,
    seed: int = 0,
    y=None,
    support: Ellipsoid | None = None,
) -> IsotropyResult:
    """Monte-Carlo test of the innovation-state variance condition.

    Samples uniformly inside the support MVEE and compares the variance of
    whitened squared innovations against that of core-whitened squared
    state deviations.  ``measurement_model`` maps an (K, n) array of states
    to (K, m) predicted measurements.  ``y`` defaults to the prediction at
    the sample mean.
    """
    if samples < 100:
        raise ValueError("isotropy_check needs at least 100 samples")
    support = support if support is not None else mvee(cloud.points)
    rng = np.random.default_rng(seed)
    x = sample_in_ellipsoid(support, samples, rng)
    xbar = x.mean(axis=0)
    hx = np.asarray(measurement_model(x), dtype=float).reshape(samples, -1)
    if y is None:
        y = np.ravel(measurement_model(xbar[None, :]))
    zi = solve_triangular(ctx.whitening, (np.ravel(y)[None, :] - hx).T, lower=True)
    innov = np.sum(zi * zi, axis=0)
    zs = solve_triangular(whitening_factor(core_shape.shape), (x - xbar).T, lower=True)
    state = np.sum(zs * zs, axis=0)
    vi, vs = float(np.var(innov)), float(np.var(state))
    ratio = vi / vs if vs > 0 else np.inf
    return IsotropyResult(ratio <= 1.0, ratio, vi, vs)
