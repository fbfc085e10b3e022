"""Smolyak support templates and cloud regeneration."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import DEFAULT_MVEE_TOL, DegenerateCloud, enclosing_shape, enforce_vfi_ceiling, enforce_vfi_floor, mvee, whitening_factor
from .possibility import POSSIBILITY_FLOOR, SupportCloud, gaussian_kernel, kernel_extend, normalize

log = logging.getLogger(__name__)

# Nested symmetric 1-D abscissae with 1, 3, 5 points (Clenshaw-Curtis spacing).
_RULE_1D = {
    1: np.array([0.0]),
    2: np.array([-1.0, 0.0, 1.0]),
    3: np.array([-1.0, -np.sqrt(0.5), 0.0, np.sqrt(0.5), 1.0]),
}
SUPPORTED_LEVELS = (2, 3)


class UnsupportedLevel(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    dim: int
    level: int = 3
    rule: str = "clenshaw-curtis-nested"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("grid dimension must be positive")
        if self.level not in SUPPORTED_LEVELS:
            raise UnsupportedLevel(f"level {self.level} not in {SUPPORTED_LEVELS}")
        if self.rule != "clenshaw-curtis-nested":
            raise ValueError(f"unknown 1-D rule {self.rule!r}")


@lru_cache(maxsize=32)
def _nodes(n: int, level: int) -> np.ndarray:
    seen = {}
    # Multi-indices with every entry >= 1 and |i| <= n + level - 1.  Only
    # entries above 1 matter, so enumerate which axes are raised and by how much.
    budget = level - 1
    for k in range(0, min(budget, n) + 1):
        for axes in itertools.combinations(range(n), k):
            for raise_by in itertools.product(range(1, budget + 1), repeat=k):
                if sum(raise_by) > budget:
                    continue
                factors = [_RULE_1D[1]] * n
                for a, r in zip(axes, raise_by):
                    factors[a] = _RULE_1D[1 + r]
                for node in itertools.product(*factors):
                    key = tuple(np.round(node, 15) + 0.0)
                    seen.setdefault(key, node)
    out = np.array(sorted(seen), dtype=float)
    out.setflags(write=False)
    return out


def generate_nodes(spec: GridSpec) -> np.ndarray:
    """Sparse-grid nodes on [-1, 1]^n, lexicographically sorted."""
    return _nodes(spec.dim, spec.level)


def unit_template(spec: GridSpec) -> np.ndarray:
    """Grid nodes scaled so the farthest node lies on the unit sphere.

    The node set is invariant under axis sign flips and permutations, so its
    MVEE is this unit ball and regenerated clouds keep the survivor shape.
    """
    nodes = generate_nodes(spec)
    return nodes / np.max(np.linalg.norm(nodes, axis=1))


def survivor_shape(
    points, eps_min: float | None = None, tolerance: float = DEFAULT_MVEE_TOL, lambda_max: float | None = None
):
    """(center, shape) of the survivor MVEE with the eigenvalue bounds applied.

    Survivors that do not span R^n get their lower-rank enclosing shape
    inflated to the floor; without a floor that case raises DegenerateCloud.
    """
    try:
        e = mvee(points, tolerance)
        center, shape = e.center, np.array(e.shape)
    except DegenerateCloud:
        if eps_min is None:
            raise
        log.warning("degenerate survivors; inflating to the eigenvalue floor")
        center, shape = enclosing_shape(points, tolerance)
    if eps_min is not None:
        shape = enforce_vfi_floor(shape, eps_min)
    if lambda_max is not None:
        shape = enforce_vfi_ceiling(shape, lambda_max)
    return center, shape


def regenerate(
    survivors: SupportCloud,
    spec: GridSpec,
    sigma: float,
    eps_min: float | None = None,
    tolerance: float = DEFAULT_MVEE_TOL,
    bandwidth: float = 1.0,
    lambda_max: float | None = None,
) -> SupportCloud:
    """Fresh support on the grid template, dilated by ``sigma``.

    New possibilities come from max-min kernel extension of the survivors
    with a Gaussian kernel whose scale is ``bandwidth`` times the dilated
    survivor shape.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if spec.dim != survivors.dim:
        raise ValueError(f"grid dimension {spec.dim} != cloud dimension {survivors.dim}")
    center, shape = survivor_shape(survivors.points, eps_min, tolerance, lambda_max)
    L = sigma * whitening_factor(shape)
    pts = center + unit_template(spec) @ L.T
    poss = kernel_extend(survivors, pts, gaussian_kernel(bandwidth * L))
    poss = normalize(np.maximum(poss, POSSIBILITY_FLOOR))
    return SupportCloud(pts, poss, survivors.epoch)


@dataclass(frozen=True)
class SigmaLaw:
    """``sigma' = clamp(sigma * (contract + gain * min(S, s_cap)), lo, hi)``."""

    contract: float = 0.9703
    gain: float = 0.05
    s_cap: float = 10.0
    sigma_min: float = 0.05
    sigma_max: float = 2.0

    def __post_init__(self):
        if not 0 < self.sigma_min < self.sigma_max:
            raise ValueError("need 0 < sigma_min < sigma_max")
        if self.contract <= 0 or self.gain < 0 or self.s_cap <= 0:
            raise ValueError("sigma law constants out of range")

    def update(self, sigma: float, surprisal: float) -> float:
        f = self.contract + self.gain * min(surprisal, self.s_cap)
        return float(np.clip(sigma * f, self.sigma_min, self.sigma_max))
