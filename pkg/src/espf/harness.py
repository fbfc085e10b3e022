"""The filter run loop: one ESPF cycle per measurement epoch."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import orbit
from .config import ScenarioConfig
from .entropy import cut_volume_profile, h_pi_or_floor as h_pi
from .evidence import innovation_shape, pcrb_floor, score
from .geometry import DEFAULT_MVEE_TOL, DegenerateCloud, VfiBounds, check_vfi, log_det_mvee, mvee
from .kalman import kalman_oracle_step
from .monitor import EwmRecord, assemble_record, necessity
from .possibility import AllZero, SupportCloud, anchor
from .selection import ComparatorReport, assign_possibility, coverage_controller, evaluate_claims, select_min_q
from .sparsegrid import GridSpec, SigmaLaw, regenerate, survivor_shape, unit_template

log = logging.getLogger(__name__)


class FilterFailure(RuntimeError):
    """The filter could not complete a cycle (exit code 2 territory)."""


class AuditFailure(AssertionError):
    pass


@dataclass(frozen=True)
class FilterParams:
    grid: GridSpec
    sigma_law: SigmaLaw
    vfi: VfiBounds
    bandwidth: float = 0.3
    n_levels: int = 64
    entropy_floor: float = -30.0
    tolerance: float = DEFAULT_MVEE_TOL
    pcrb_slack: float = 0.05
    reference_h: float = 0.0
    claims_draws: int = 50
    debug: bool = False

    @classmethod
    def from_config(cls, cfg: ScenarioConfig, dim: int, reference_h: float = 0.0, debug: bool = False):
        return cls(
            grid=GridSpec(dim, cfg.grid_level),
            sigma_law=SigmaLaw(cfg.sigma_contract, cfg.sigma_gain, cfg.sigma_cap, cfg.sigma_min, cfg.sigma_max),
            vfi=VfiBounds(cfg.vfi_eps_min, cfg.vfi_lambda_max).validate(),
            bandwidth=cfg.kernel_bandwidth,
            n_levels=cfg.entropy_levels,
            entropy_floor=cfg.entropy_floor,
            tolerance=cfg.mvee_tolerance,
            pcrb_slack=cfg.pcrb_slack,
            reference_h=reference_h,
            claims_draws=cfg.claims_draws,
            debug=debug,
        )

    def profile(self, cloud: SupportCloud):
        return cut_volume_profile(cloud, self.n_levels, tolerance=self.tolerance, floor=self.entropy_floor)


# ------------------------------------------------------------------ models


class OrbitModel:
    """Orbit dynamics and tracking in scaled filter coordinates ``z = x / scale``."""

    def __init__(self, cfg: ScenarioConfig):
        self.scale = np.asarray(cfg.state_scale, dtype=float)
        self.step = cfg.orbit_step_s
        self.j2 = cfg.orbit_j2
        self.dim = 7

    def propagate(self, Z, t0: float, t1: float) -> np.ndarray:
        if t1 <= t0:
            return np.array(Z)
        return orbit.propagate_states(Z * self.scale, t1 - t0, self.step, self.j2) / self.scale

    def predict(self, Z, station: orbit.Station, t: float) -> np.ndarray:
        return orbit.range_and_rate(Z * self.scale, station, t)

    def to_state(self, z) -> np.ndarray:
        return np.asarray(z) * self.scale


class RandomWalkModel:
    """Scalar random walk observed directly."""

    dim = 1
    scale = np.ones(1)

    def propagate(self, Z, t0, t1):
        return np.array(Z)

    def predict(self, Z, station, t):
        return np.asarray(Z, dtype=float).reshape(-1, 1)

    def to_state(self, z):
        return np.asarray(z)


# -------------------------------------------------------------- one cycle


@dataclass
class StepResult:
    cloud: SupportCloud
    record: EwmRecord
    report: ComparatorReport | None
    sigma: float
    survivors: SupportCloud


def audit_step(prior: SupportCloud, q, sel, raw, post: SupportCloud, regen: SupportCloud, params: FilterParams):
    """Runtime admissibility checks (debug mode)."""
    if not post.is_normalized() or not regen.is_normalized():
        raise AuditFailure("possibility not normalized")
    if np.any(raw > prior.poss[sel] + 1e-15):
        raise AuditFailure("update raised a possibility value")
    _, shape = survivor_shape(post.points, params.vfi.eps_min, params.tolerance)
    if np.linalg.eigvalsh(shape)[0] < params.vfi.eps_min * (1 - 1e-9):
        raise AuditFailure("eigenvalue floor violated")
    a = anchor(post)
    if post.poss[a] != 1.0:
        raise AuditFailure("anchor lost possibility one")
    perm = np.random.default_rng(0).permutation(prior.size)
    if not np.array_equal(select_min_q(q, sel.size), sel) or np.any(np.argsort(q, kind="stable")[perm] < 0):
        raise AuditFailure("selection depends on more than the innovations")


_RECOVERY_Q = 200.0


def _dilate(cloud: SupportCloud, factor: float) -> SupportCloud:
    c = mvee(cloud.points).center
    return SupportCloud(c + factor * (cloud.points - c), cloud.poss, cloud.epoch)


def espf_step(
    cloud: SupportCloud,
    measurement: orbit.Measurement | None,
    model,
    params: FilterParams,
    sigma: float,
    t_prev: float,
    t: float,
    step: int,
    station: orbit.Station | None = None,
    claims_seed=None,
    truth=None,
) -> StepResult:
    """Predict, score, prune, assign, regenerate, monitor.

    With ``measurement=None`` the cloud is only propagated (no station in view).
    """
    n = model.dim
    prior = SupportCloud(model.propagate(cloud.points, t_prev, t), cloud.poss, t)
    prof_pre = params.profile(prior)
    h_pre = h_pi(prof_pre)

    if measurement is None:
        err = _anchor_error(prior, model, truth)
        rec = assemble_record(
            step, t / orbit.DAY, "-", log_det_mvee(prior.points, params.tolerance), h_pre, prof_pre, prior, 0, sigma,
            0.0, 0.0, prior.size, h_pre, params.reference_h, params.pcrb_slack, err,
        )
        return StepResult(prior, rec, None, sigma, prior)

    for attempt in (0, 1):
        H = model.predict(prior.points, station, t)
        ctx = innovation_shape(H, measurement.imprecision, params.tolerance)
        ev = score(ctx, measurement.values, prior.poss)
        M = prior.size
        n_target = coverage_controller(ev.info, M, n)
        sel = select_min_q(ev.q, n_target)
        try:
            res = assign_possibility(sel, ev.comp, prior.poss)
            break
        except AllZero:
            if attempt:
                raise FilterFailure(f"total conflict at step {step} after dilation") from None
            # Scale so the closest hypothesis lands well inside double range of exp(-q/2).
            f = max(2.0, np.sqrt(float(np.min(ev.q)) / _RECOVERY_Q))
            log.warning("step %d: total evidential conflict, dilating the cloud by %.3g and retrying", step, f)
            prior = _dilate(prior, f)
            prof_pre = params.profile(prior)
            h_pre = h_pi(prof_pre)

    post = SupportCloud(prior.points[sel], res.assigned_poss, t)
    prof_post = params.profile(post)
    floor = pcrb_floor(h_pre, ev.info, n)
    try:
        ld = log_det_mvee(post.points, params.tolerance)
    except DegenerateCloud:
        ld = -np.inf

    report = None
    if claims_seed is not None:
        report = evaluate_claims(
            prior, ev.q, n_target, claims_seed, params.claims_draws, params.n_levels, params.tolerance
        )

    new_sigma = params.sigma_law.update(sigma, ev.surprisal)
    try:
        regen = regenerate(
            post, params.grid, new_sigma, params.vfi.eps_min, params.tolerance, params.bandwidth, params.vfi.lambda_max
        )
    except DegenerateCloud as exc:
        raise FilterFailure(f"step {step}: regeneration failed: {exc}") from None

    if params.debug:
        audit_step(prior, ev.q, sel, res.raw_poss, post, regen, params)

    rec = assemble_record(
        step, t / orbit.DAY, station.name, ld if np.isfinite(ld) else params.entropy_floor, h_pre, prof_post, post,
        res.prune_count, new_sigma, ev.surprisal, ev.info, n_target, floor, params.reference_h,
        params.pcrb_slack, _anchor_error(post, model, truth),
    )
    if not rec.pcrb_satisfied:
        log.warning("step %d: entropy %.4f below PCRB floor %.4f", step, rec.h_pi, floor)
    return StepResult(regen, rec, report, new_sigma, post)


def _anchor_error(cloud: SupportCloud, model, truth) -> float:
    if truth is None:
        return float("nan")
    x = model.to_state(cloud.points[anchor(cloud)])
    if model.dim == 7:
        return float(np.linalg.norm(x[:3] - truth[:3]))
    return float(abs(x[0] - truth[0]))


# ------------------------------------------------------------- scenarios


@dataclass
class RunOutput:
    config: ScenarioConfig
    records: list = field(default_factory=list)
    claims: list = field(default_factory=list)  # (step, sigma, log_det, n_target, regime, report)
    oracle: list = field(default_factory=list)  # (step, kalman mean, kalman sd, anchor) for linear runs
    failure: str | None = None

    def measured(self) -> list:
        return [r for r in self.records if r.station != "-"]

    def summary(self) -> dict:
        recs = self.measured()
        out = {
            "scenario": self.config.name,
            "steps": len(self.records),
            "measured_steps": len(recs),
            "pcrb_violations": sum(not r.pcrb_satisfied for r in self.records),
            "holder_order_violations": sum(
                not (r.holder_min <= r.h_pi + 1e-9 and r.h_pi <= r.holder_max + 1e-9) for r in self.records
            ),
            "contraction_fraction": float(np.mean([r.regime == "contraction" for r in recs])) if recs else 0.0,
        }
        if recs:
            pr = np.array([r.prune_count for r in recs])
            out.update(
                prune_median=float(np.median(pr)),
                prune_max=int(pr.max()),
                surprisal_p95=float(np.percentile([r.surprisal for r in recs], 95)),
                necessity_p95=float(np.percentile([r.necessity for r in recs], 95)),
                sigma_final=recs[-1].sigma_k,
            )
        if self.claims:
            reps = [c[-1] for c in self.claims]

            def rate(attr):
                vals = [getattr(r, attr) for r in reps if getattr(r, attr) is not None]
                return (float(np.mean([v.passed for v in vals])) if vals else float("nan")), vals

            for attr in ("claim_a_vs_random", "claim_a_vs_swap", "claim_b_vs_random", "claim_b_vs_swap"):
                pr_, vals = rate(attr)
                out[f"{attr}_pass_rate"] = pr_
                out[f"{attr}_max_shortfall"] = float(max([-v.gap for v in vals] + [0.0]))
            out["claims_steps"] = len(reps)
        if self.failure:
            out["failure"] = self.failure
        return out


def initial_cloud(cfg: ScenarioConfig, model, truth_vec, grid: GridSpec) -> SupportCloud:
    """Truth plus a Gaussian offset, spread on the grid template, uniform possibility."""
    rng = np.random.default_rng(cfg.seed_init)
    if model.dim == 7:
        sd = np.array([cfg.init_sigma_pos_km] * 3 + [cfg.init_sigma_vel_kms] * 3 + [cfg.init_sigma_cd]) / model.scale
    else:
        sd = np.array([np.sqrt(cfg.linear_p0)])
    z0 = np.asarray(truth_vec) / model.scale + rng.normal(size=sd.size) * sd
    pts = z0 + cfg.sigma0 * cfg.init_spread * unit_template(grid) * sd
    return SupportCloud.uniform(pts)


def _pick_station(stations, truth_vec, t, mask_deg, last: int):
    k = len(stations)
    for off in range(1, k + 1):
        i = (last + off) % k
        if orbit.elevation(truth_vec, stations[i], t) >= np.radians(mask_deg):
            return i
    return None


def _truth_track(cfg: ScenarioConfig):
    x0 = orbit.elements_to_state(
        cfg.orbit_a_km, cfg.orbit_e, np.radians(cfg.orbit_inc_deg), np.radians(cfg.orbit_raan_deg),
        np.radians(cfg.orbit_argp_deg), np.radians(cfg.orbit_nu_deg), cfg.orbit_cd,
    )
    accel = np.full(3, cfg.process_accel) if cfg.process_accel > 0 else None
    truth = orbit.TruthTrack(
        x0, 0.0, tuple(cfg.events), cfg.orbit_step_s, cfg.orbit_j2, accel, np.random.default_rng(cfg.seed_truth)
    )
    return x0, truth


def measured_epochs(cfg: ScenarioConfig) -> list[int]:
    """Steps at which a station sees the truth (every step for the linear scenario)."""
    if cfg.kind == "linear":
        return list(range(1, cfg.n_epochs + 1))
    x0, truth = _truth_track(cfg)
    stations = [orbit.STATIONS[s] for s in cfg.stations]
    out, last = [], -1
    for k in range(1, cfg.n_epochs + 1):
        t = k * cfg.cadence_s
        i = _pick_station(stations, truth.advance(t).vector(), t, cfg.mask_deg, last)
        if i is not None:
            last = i
            out.append(k)
    return out


def run_orbit(cfg: ScenarioConfig, debug: bool = False, claims_every: int | None = None) -> RunOutput:
    cfg.validate()
    model = OrbitModel(cfg)
    x0, truth = _truth_track(cfg)
    meas_rng = np.random.default_rng(cfg.seed_measurement)
    stations = [orbit.STATIONS[s] for s in cfg.stations]
    grid = GridSpec(7, cfg.grid_level)
    cloud = initial_cloud(cfg, model, x0.vector(), grid)
    ref = cfg.reference_h
    if not np.isfinite(ref):
        ref = h_pi(cut_volume_profile(cloud, cfg.entropy_levels, tolerance=cfg.mvee_tolerance, floor=cfg.entropy_floor))
    params = FilterParams.from_config(cfg, 7, ref, debug)
    every = cfg.claims_every if claims_every is None else claims_every

    out = RunOutput(cfg)
    sigma = cfg.sigma0
    t_prev, last, measured = 0.0, -1, 0
    n_epochs = cfg.n_epochs if cfg.max_steps <= 0 else min(cfg.n_epochs, cfg.max_steps)
    for k in range(1, n_epochs + 1):
        t = k * cfg.cadence_s
        xt = truth.advance(t).vector()
        i = _pick_station(stations, xt, t, cfg.mask_deg, last)
        meas = st = None
        seed = None
        if i is not None:
            last = i
            st = stations[i]
            meas = orbit.measure(
                xt, st, t, meas_rng, cfg.sigma_range_km, cfg.sigma_rate_kms, cfg.events, cfg.mask_deg
            )
            if every and measured % every == 0:
                seed = [cfg.seed_comparator, k]
            measured += 1
        try:
            res = espf_step(cloud, meas, model, params, sigma, t_prev, t, k, st, seed, xt)
        except (FilterFailure, orbit.SubsurfaceTrajectory) as exc:
            out.failure = f"step {k}: {exc}"
            log.error("run aborted: %s", out.failure)
            break
        out.records.append(res.record)
        if res.report is not None:
            r = res.record
            out.claims.append((k, r.sigma_k, res.report.espf_log_det, r.n_target, r.regime, res.report))
        cloud, sigma, t_prev = res.cloud, res.sigma, t
    return out


def run_linear(cfg: ScenarioConfig, debug: bool = False, claims_every: int | None = None) -> RunOutput:
    """Scalar random walk tracked by both the ESPF and the Kalman oracle."""
    cfg.validate()
    model = RandomWalkModel()
    rng_truth = np.random.default_rng(cfg.seed_truth)
    rng_meas = np.random.default_rng(cfg.seed_measurement)
    grid = GridSpec(1, cfg.grid_level)
    x = np.zeros(1)
    cloud = initial_cloud(cfg, model, x, grid)
    mean = np.array([cloud.points.mean()])
    cov = np.array([[cfg.linear_p0]])
    ref = cfg.reference_h
    if not np.isfinite(ref):
        ref = h_pi(cut_volume_profile(cloud, cfg.entropy_levels, tolerance=cfg.mvee_tolerance, floor=cfg.entropy_floor))
    params = FilterParams.from_config(cfg, 1, ref, debug)
    every = cfg.claims_every if claims_every is None else claims_every
    F = Hm = np.eye(1)
    Q, R = np.array([[cfg.linear_q]]), np.array([[cfg.linear_r]])
    station = orbit.Station("direct", 0.0, 0.0)
    out = RunOutput(cfg)
    sigma = cfg.sigma0
    n_steps = cfg.n_epochs if cfg.max_steps <= 0 else min(cfg.n_epochs, cfg.max_steps)
    for k in range(1, n_steps + 1):
        x = x + rng_truth.normal(size=1) * np.sqrt(cfg.linear_q)
        y = x + rng_meas.normal(size=1) * np.sqrt(cfg.linear_r)
        mean, cov = kalman_oracle_step(mean, cov, F, Hm, Q, R, y)
        meas = orbit.Measurement(y, R, "direct", float(k))
        seed = [cfg.seed_comparator, k] if every and (k - 1) % every == 0 else None
        try:
            res = espf_step(cloud, meas, model, params, sigma, k - 1.0, float(k), k, station, seed, x)
        except FilterFailure as exc:
            out.failure = f"step {k}: {exc}"
            break
        out.records.append(res.record)
        if res.report is not None:
            r = res.record
            out.claims.append((k, r.sigma_k, res.report.espf_log_det, r.n_target, r.regime, res.report))
        a = float(res.survivors.points[anchor(res.survivors), 0])
        out.oracle.append((k, float(mean[0]), float(np.sqrt(cov[0, 0])), a, float(x[0])))
        cloud, sigma = res.cloud, res.sigma
    return out


def run_scenario(cfg: ScenarioConfig, debug: bool = False, claims_every: int | None = None) -> RunOutput:
    if cfg.kind == "linear":
        return run_linear(cfg, debug, claims_every)
    return run_orbit(cfg, debug, claims_every)
