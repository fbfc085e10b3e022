"""Finite-support possibility distributions and their basic algebra."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .geometry import whitening_factor

POSSIBILITY_FLOOR = 1e-12


class AllZero(ArithmeticError):
    """Every hypothesis lost all possibility: total evidential conflict."""


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SupportCloud:
    """M support points in R^n with their possibility values."""

    points: np.ndarray
    poss: np.ndarray
    epoch: float = 0.0

    def __post_init__(self):
        pts = _frozen(np.atleast_2d(self.points))
        poss = _frozen(np.ravel(self.poss))
        if pts.shape[0] != poss.size:
            raise ValueError(f"{pts.shape[0]} points but {poss.size} possibility values")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "poss", poss)

    @classmethod
    def uniform(cls, points, epoch: float = 0.0) -> "SupportCloud":
        points = np.atleast_2d(points)
        return cls(points, np.ones(points.shape[0]), epoch)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def is_normalized(self) -> bool:
        return bool(self.poss.size) and self.poss.max() == 1.0 and self.poss.min() > 0.0

    def subset(self, idx) -> "SupportCloud":
        idx = np.asarray(idx)
        return replace(self, points=self.points[idx], poss=self.poss[idx])

    def with_poss(self, poss) -> "SupportCloud":
        return replace(self, poss=poss)


@dataclass(frozen=True)
class AlphaCut:
    level: float
    member_indices: np.ndarray

    def __len__(self):
        return self.member_indices.size


def alpha_cut(cloud: SupportCloud, level: float) -> AlphaCut:
    if not 0.0 < level <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {level}")
    return AlphaCut(float(level), _frozen(np.flatnonzero(cloud.poss >= level), dtype=np.intp))


def normalize(poss) -> np.ndarray:
    """Max-normalize; raises AllZero when nothing is left to normalize by."""
    poss = np.asarray(poss, dtype=float)
    top = poss.max() if poss.size else 0.0
    if not top > 0.0 or not np.isfinite(top):
        raise AllZero("maximum possibility is zero")
    return poss / top


def conjunctive_min(prior, comp) -> np.ndarray:
    """Unnormalized conjunctive update ``min(prior, comp)``."""
    prior = np.asarray(prior, dtype=float)
    comp = np.asarray(comp, dtype=float)
    if prior.shape != comp.shape:
        raise ValueError("prior and compatibility lengths differ")
    return np.minimum(prior, comp)


def conjunctive_update(cloud: SupportCloud, comp) -> SupportCloud:
    return cloud.with_poss(normalize(conjunctive_min(cloud.poss, comp)))


def gaussian_kernel(L) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Proximity kernel ``exp(-0.5 ||L^{-1}(x - x')||^2)``; returns a K x J matrix."""
    L = np.asarray(L, dtype=float)

    def kappa(new_points, old_points):
        new_points = np.atleast_2d(new_points)
        old_points = np.atleast_2d(old_points)
        zn = np.linalg.solve(L, new_points.T).T
        zo = np.linalg.solve(L, old_points.T).T
        d2 = np.sum(zn**2, 1)[:, None] + np.sum(zo**2, 1)[None, :] - 2.0 * zn @ zo.T
        return np.exp(-0.5 * np.maximum(d2, 0.0))

    return kappa


def kernel_for_shape(shape, bandwidth: float = 1.0):
    return gaussian_kernel(bandwidth * whitening_factor(shape))


def kernel_extend(survivors: SupportCloud, new_points, kernel) -> np.ndarray:
    """Max-min extension ``max_j min(pi_j, kappa(new, chi_j))``.

    ``kernel`` is either a callable returning the K x J proximity matrix, or
    the matrix itself.
    """
    if survivors.size == 0:
        raise ValueError("no survivors to extend from")
    K = kernel(new_points, survivors.points) if callable(kernel) else np.asarray(kernel, dtype=float)
    K = np.atleast_2d(K)
    return np.max(np.minimum(K, survivors.poss[None, :]), axis=1)


def anchor(cloud: SupportCloud) -> int:
    """Index of the maximal possibility, smallest index on ties."""
    return int(np.argmax(cloud.poss))
