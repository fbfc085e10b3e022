"""Possibilistic entropy over alpha-cut volumes, and the Hoelder mean family.

The integrand ``log V_alpha`` is a non-increasing, left-continuous step
function of alpha: it only changes just above each distinct possibility
value.  Sampled profiles are therefore integrated with the matching step
rule, each level standing for the interval ``(previous level, level]``.
That rule is exact whenever the level grid contains every distinct
possibility value, which is how :func:`h_pi_exact` is built.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .geometry import (
    DEFAULT_MVEE_TOL,
    DegenerateCloud,
    log_unit_ball_volume,
    log_volume,
    mvee,
    mvee_weights,
    whitening_factor,
)
from .possibility import SupportCloud

DEFAULT_LEVELS = 64
DEGENERATE_LOG_VOLUME = -30.0
EULER_GAMMA = 0.57721566490153286061


class AllDegenerate(ValueError):
    """No alpha-cut has enough points for a full-rank MVEE (H_pi -> -inf)."""


@dataclass(frozen=True)
class CutVolumeProfile:
    levels: np.ndarray
    log_volumes: np.ndarray
    degenerate_mask: np.ndarray
    floor: float = DEGENERATE_LOG_VOLUME

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        if lv.ndim != 1 or lv.size == 0 or np.any(np.diff(lv) <= 0) or lv[0] <= 0 or lv[-1] > 1:
            raise ValueError("levels must be strictly ascending in (0, 1]")
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "log_volumes", np.asarray(self.log_volumes, dtype=float))
        object.__setattr__(self, "degenerate_mask", np.asarray(self.degenerate_mask, dtype=bool))

    @classmethod
    def from_values(cls, levels, log_volumes, floor: float = DEGENERATE_LOG_VOLUME):
        """Profile from known volumes; ``-inf`` / ``nan`` entries count as degenerate."""
        lv = np.asarray(log_volumes, dtype=float)
        mask = ~np.isfinite(lv)
        return cls(levels, np.where(mask, floor, lv), mask, floor)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.levels, prepend=0.0)

    @property
    def values(self) -> np.ndarray:
        """Integrand with degenerate levels at the floor value."""
        return np.where(self.degenerate_mask, self.floor, self.log_volumes)

    def _require_some(self):
        if np.all(self.degenerate_mask):
            raise AllDegenerate("every alpha level is degenerate")


def uniform_levels(n_levels: int = DEFAULT_LEVELS) -> np.ndarray:
    if n_levels < 8:
        raise ValueError("need at least 8 alpha levels")
    return np.arange(1, n_levels + 1) / n_levels


def cut_volume_profile(
    cloud: SupportCloud,
    n_levels: int = DEFAULT_LEVELS,
    levels=None,
    tolerance: float = DEFAULT_MVEE_TOL,
    floor: float = DEGENERATE_LOG_VOLUME,
    min_points: int | None = None,
) -> CutVolumeProfile:
    """MVEE log-volume of every alpha-cut on a level grid.

    Cuts with fewer than ``min_points`` (default 2n + 1) members, or that do
    not span R^n, are flagged degenerate.
    """
    lv = uniform_levels(n_levels) if levels is None else np.asarray(levels, dtype=float)
    n = cloud.dim
    need = 2 * n + 1 if min_points is None else min_points
    log_cn = float(log_unit_ball_volume(n))
    out = np.full(lv.size, floor)
    degenerate = np.ones(lv.size, dtype=bool)

    # Walk from the widest cut inwards.  Dropping points that carry no MVEE
    # weight leaves the ellipsoid unchanged.
    prev_mask = None
    prev_logdet = None
    prev_w = None
    for j in range(lv.size):
        mask = cloud.poss >= lv[j]
        count = int(mask.sum())
        if count < need:
            continue
        if prev_mask is not None and not np.any(prev_w[~mask[prev_mask]]):
            out[j] = prev_logdet
            degenerate[j] = False
            w = prev_w[mask[prev_mask]]
        else:
            pts = cloud.points[mask]
            warm = None
            if prev_mask is not None and not (n <= 3 and count >= 64):
                w0 = prev_w[mask[prev_mask]]
                warm = w0 if w0.sum() > 0 else None
            try:
                e, w = mvee_weights(pts, tolerance, weights0=warm)
            except DegenerateCloud:
                prev_mask = None
                continue
            out[j] = log_cn + 0.5 * e.log_det()
            degenerate[j] = False
        prev_mask, prev_logdet, prev_w = mask, out[j], w
    return CutVolumeProfile(lv, out, degenerate, floor)


def h_pi(profile: CutVolumeProfile) -> float:
    """Integral of ``log V_alpha`` over (0, 1]."""
    profile._require_some()
    return float(np.dot(profile.widths, profile.values))


def h_pi_or_floor(profile: CutVolumeProfile) -> float:
    """:func:`h_pi`, reporting the floor value when every cut is degenerate."""
    try:
        return h_pi(profile)
    except AllDegenerate:
        return float(profile.floor)


def holder_mean(profile: CutVolumeProfile, p: float) -> float:
    """``log M_p`` of the cut-volume family; p = 0 is :func:`h_pi`."""
    profile._require_some()
    vals = profile.values
    if p == 0:
        return h_pi(profile)
    if p == np.inf:
        return float(vals.max())
    if p == -np.inf:
        return float(vals.min())
    w = profile.widths
    return float(logsumexp(p * vals, b=w) / p)


@dataclass(frozen=True)
class EntropyDecomposition:
    support_entropy: float
    gradient_entropy: float
    total: float


def decompose(profile: CutVolumeProfile) -> EntropyDecomposition:
    if profile.degenerate_mask[0]:
        raise AllDegenerate("outermost alpha level is degenerate")
    total = h_pi(profile)
    support = float(profile.log_volumes[0])
    return EntropyDecomposition(support, total - support, total)


def entropy(cloud: SupportCloud, n_levels: int = DEFAULT_LEVELS, **kw) -> float:
    return h_pi(cut_volume_profile(cloud, n_levels, **kw))


def h_pi_exact(
    cloud: SupportCloud,
    tolerance: float = DEFAULT_MVEE_TOL,
    floor: float = DEGENERATE_LOG_VOLUME,
    min_points: int | None = None,
) -> float:
    """Piecewise-exact H_pi: one MVEE per distinct possibility value."""
    n = cloud.dim
    need = 2 * n + 1 if min_points is None else min_points
    total = 0.0
    lo = 0.0
    any_ok = False
    for v in np.unique(cloud.poss):
        members = cloud.points[cloud.poss >= v]
        value = floor
        if members.shape[0] >= need:
            try:
                value = log_volume(mvee(members, tolerance))
                any_ok = True
            except DegenerateCloud:
                pass
        total += (v - lo) * value
        lo = v
    if not any_ok:
        raise AllDegenerate("every alpha level is degenerate")
    return float(total)


def gaussian_h_pi(cov) -> float:
    """H_pi of Gaussian confidence-ellipsoid cuts: closed form."""
    L = whitening_factor(cov)
    n = L.shape[0]
    half_logdet = float(np.sum(np.log(np.diag(L))))
    return half_logdet + 0.5 * n * (np.log(2.0) - EULER_GAMMA) + float(log_unit_ball_volume(n))
