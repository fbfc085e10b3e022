"""Survivor budget, minimum-innovation selection and the comparator checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .entropy import DEFAULT_LEVELS, AllDegenerate, cut_volume_profile, h_pi
from .geometry import DEFAULT_MVEE_TOL, DegenerateCloud, log_det_mvee
from .possibility import SupportCloud, conjunctive_min, normalize

CLAIM_TOLERANCE = 1e-9
DEFAULT_DRAWS = 50


class NoNonSurvivor(ValueError):
    """Every point survived, so there is nothing to swap in."""


def coverage_controller(info: float, M: int, n: int) -> int:
    """Survivor count ``floor((1 - I) M)`` clamped to ``[2n + 1, M]``."""
    if not 0.0 <= info < 1.0:
        raise ValueError(f"information content must lie in [0, 1), got {info}")
    raw = int(np.floor((1.0 - info) * M))
    return int(min(max(raw, 2 * n + 1), M))


def select_min_q(q, n_target: int) -> np.ndarray:
    """Sorted indices of the ``n_target`` smallest q (ties go to the lower index)."""
    q = np.asarray(q, dtype=float)
    if not 0 < n_target <= q.size:
        raise ValueError(f"n_target={n_target} outside 1..{q.size}")
    return np.sort(np.argsort(q, kind="stable")[:n_target])


@dataclass(frozen=True)
class SelectionResult:
    survivors: np.ndarray
    assigned_poss: np.ndarray
    prune_count: int
    raw_poss: np.ndarray


def assign_possibility(selection, comp, prior_poss) -> SelectionResult:
    """Min-rule possibility on the survivors, then max-normalized."""
    idx = np.asarray(selection, dtype=np.intp)
    comp = np.asarray(comp, dtype=float)
    prior_poss = np.asarray(prior_poss, dtype=float)
    raw = conjunctive_min(prior_poss[idx], comp[idx])
    return SelectionResult(idx, normalize(raw), comp.size - idx.size, raw)


def _claim_values(cloud: SupportCloud, idx, comp, n_levels, tolerance):
    """(log det of survivor MVEE, H_pi of survivors under assigned possibility)."""
    sub = cloud.points[idx]
    try:
        ld = log_det_mvee(sub, tolerance)
    except DegenerateCloud:
        ld = -np.inf
    try:
        res = assign_possibility(idx, comp, cloud.poss)
        prof = cut_volume_profile(SupportCloud(sub, res.assigned_poss), n_levels, tolerance=tolerance)
        h = h_pi(prof)
    except (AllDegenerate, ArithmeticError):
        h = -np.inf
    return ld, h


def weighted_draw(log_weights, count: int, rng: np.random.Generator) -> np.ndarray:
    """Weighted sampling without replacement via Gumbel top-k keys."""
    keys = np.asarray(log_weights, dtype=float) + rng.gumbel(size=len(log_weights))
    return np.sort(np.argsort(-keys, kind="stable")[:count])


class RandomBest(NamedTuple):
    log_det: float
    h_pi: float
    subsets: list


def comparator_random(
    q,
    cloud: SupportCloud,
    n_target: int,
    draws: int = DEFAULT_DRAWS,
    seed: int = 0,
    n_levels: int = DEFAULT_LEVELS,
    tolerance: float = DEFAULT_MVEE_TOL,
) -> RandomBest:
    """Best log-det and best H_pi over evidence-weighted random survivor sets.

    Draw ``d`` uses the ``d``-th child of ``SeedSequence(seed)``, so results do
    not depend on evaluation order.
    """
    if draws < 1:
        raise ValueError("need at least one draw")
    q = np.asarray(q, dtype=float)
    comp = np.exp(-0.5 * q)
    best_ld, best_h = np.inf, np.inf
    subsets = []
    for child in np.random.SeedSequence(seed).spawn(draws):
        idx = weighted_draw(-0.5 * q, n_target, np.random.default_rng(child))
        ld, h = _claim_values(cloud, idx, comp, n_levels, tolerance)
        best_ld, best_h = min(best_ld, ld), min(best_h, h)
        subsets.append(idx)
    return RandomBest(best_ld, best_h, subsets)


def comparator_swap(q, selection) -> np.ndarray:
    """Replace the worst survivor by the best non-survivor."""
    q = np.asarray(q, dtype=float)
    sel = np.asarray(selection, dtype=np.intp)
    out = np.ones(q.size, dtype=bool)
    out[sel] = False
    rest = np.flatnonzero(out)
    if rest.size == 0:
        raise NoNonSurvivor("all points survived")
    worst = sel[np.argmax(q[sel])]
    best = rest[np.argmin(q[rest])]
    return np.sort(np.append(sel[sel != worst], best))


class ClaimGap(NamedTuple):
    passed: bool
    gap: float


def _gap(alt: float, espf: float, tol: float) -> ClaimGap:
    if np.isneginf(alt) and np.isneginf(espf):
        g = 0.0
    else:
        g = float(alt - espf)
    return ClaimGap(bool(g >= -tol), g)


@dataclass(frozen=True)
class ComparatorReport:
    claim_a_vs_random: ClaimGap
    claim_a_vs_swap: ClaimGap | None
    claim_b_vs_random: ClaimGap
    claim_b_vs_swap: ClaimGap | None
    espf_log_det: float
    espf_h_pi: float

    def all_passed(self) -> bool:
        gaps = (self.claim_a_vs_random, self.claim_a_vs_swap, self.claim_b_vs_random, self.claim_b_vs_swap)
        return all(g.passed for g in gaps if g is not None)


def evaluate_claims(
    cloud: SupportCloud,
    q,
    n_target: int,
    seed: int = 0,
    draws: int = DEFAULT_DRAWS,
    n_levels: int = DEFAULT_LEVELS,
    tolerance: float = DEFAULT_MVEE_TOL,
    claim_tolerance: float = CLAIM_TOLERANCE,
) -> ComparatorReport:
    """Min-q survivors against random and swap alternatives.

    Gaps are ``alternative - espf``; positive means the min-q set is smaller.
    Swap entries are ``None`` when every point survives.
    """
    q = np.asarray(q, dtype=float)
    comp = np.exp(-0.5 * q)
    sel = select_min_q(q, n_target)
    ld, h = _claim_values(cloud, sel, comp, n_levels, tolerance)
    rnd = comparator_random(q, cloud, n_target, draws, seed, n_levels, tolerance)
    a_swap = b_swap = None
    if n_target < q.size:
        sw_ld, sw_h = _claim_values(cloud, comparator_swap(q, sel), comp, n_levels, tolerance)
        a_swap, b_swap = _gap(sw_ld, ld, claim_tolerance), _gap(sw_h, h, claim_tolerance)
    return ComparatorReport(
        _gap(rnd.log_det, ld, claim_tolerance),
        a_swap,
        _gap(rnd.h_pi, h, claim_tolerance),
        b_swap,
        ld,
        h,
    )
