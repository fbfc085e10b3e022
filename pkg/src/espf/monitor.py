"""Per-step width diagnostics and regime classification.

``necessity``, ``epistemic_width`` and ``holder_exponent`` are
implementation-defined surrogates; outputs flag them via SURROGATE_FIELDS.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .entropy import AllDegenerate, CutVolumeProfile, holder_mean, h_pi
from .possibility import SupportCloud

CONTRACTION = "contraction"
DIFFUSION = "diffusion"
DEFAULT_PCRB_SLACK = 0.05
SURROGATE_FIELDS = ("necessity", "w_ep", "alpha_c")


class InsufficientLevels(ValueError):
    pass


def regime_flag(log_det: float) -> str:
    if not np.isfinite(log_det):
        raise ValueError("log det must be finite")
    return CONTRACTION if log_det < 0.0 else DIFFUSION


def necessity(cloud: SupportCloud) -> float:
    """Necessity of the anchor singleton: one minus the runner-up possibility."""
    if cloud.size < 2:
        raise ValueError("necessity needs at least two hypotheses")
    top2 = np.partition(cloud.poss, -2)[-2:]
    return float(1.0 - top2[0])


def epistemic_width(h: float, reference: float, n: int) -> float:
    """``exp((H - reference) / n)``: geometric-mean axis ratio to the reference."""
    if not np.isfinite(h):
        return 0.0
    return float(np.exp((h - reference) / n))


def holder_exponent(profile: CutVolumeProfile) -> float:
    """Least-squares slope of log V_alpha against log(1 / alpha)."""
    ok = ~profile.degenerate_mask
    if ok.sum() < 2:
        raise InsufficientLevels("need two non-degenerate alpha levels")
    x = -np.log(profile.levels[ok])
    y = profile.log_volumes[ok]
    if np.ptp(x) == 0.0:
        raise InsufficientLevels("levels coincide")
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class HolderCheck:
    lower: float
    middle: float
    upper: float

    def ordered(self, tol: float = 1e-9) -> bool:
        return self.lower <= self.middle + tol and self.middle <= self.upper + tol


def holder_check(profile: CutVolumeProfile) -> HolderCheck:
    """Extremes and geometric mean of the cut volumes; all at the floor if every cut is degenerate."""
    try:
        return HolderCheck(holder_mean(profile, -np.inf), h_pi(profile), holder_mean(profile, np.inf))
    except AllDegenerate:
        f = float(profile.floor)
        return HolderCheck(f, f, f)


@dataclass(frozen=True)
class EwmRecord:
    step: int
    t: float  # days
    station: str
    log_det_mvee: float
    regime: str
    h_pi: float
    h_pi_pre: float
    w_ep: float
    prune_count: int
    sigma_k: float
    necessity: float
    surprisal: float
    info: float
    alpha_c: float
    n_target: int
    pcrb_floor: float
    pcrb_satisfied: bool
    holder_min: float
    holder_max: float
    anchor_error: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def assemble_record(
    step: int,
    t: float,
    station: str,
    log_det: float,
    h_pre: float,
    profile_post: CutVolumeProfile,
    cloud_post: SupportCloud,
    prune_count: int,
    sigma: float,
    surprisal: float,
    info: float,
    n_target: int,
    pcrb_floor: float,
    reference: float,
    slack: float = DEFAULT_PCRB_SLACK,
    anchor_error: float = float("nan"),
) -> EwmRecord:
    hc = holder_check(profile_post)
    h = hc.middle
    try:
        ac = holder_exponent(profile_post)
    except InsufficientLevels:
        ac = float("nan")
    return EwmRecord(
        step=step,
        t=t,
        station=station,
        log_det_mvee=log_det,
        regime=regime_flag(log_det),
        h_pi=h,
        h_pi_pre=h_pre,
        w_ep=epistemic_width(h, reference, cloud_post.dim),
        prune_count=int(prune_count),
        sigma_k=sigma,
        necessity=necessity(cloud_post),
        surprisal=surprisal,
        info=info,
        alpha_c=ac,
        n_target=int(n_target),
        pcrb_floor=pcrb_floor,
        pcrb_satisfied=bool(h >= pcrb_floor - slack),
        holder_min=hc.lower,
        holder_max=hc.upper,
        anchor_error=anchor_error,
    )
