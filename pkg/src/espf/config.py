"""Scenario configuration: a flat ``section.key = value`` text format.

Grammar (one entry per line)::

    # comment            blank lines and '#' comments are ignored
    section.key = value  scalars: int, float, true/false, bare strings
    section.key = a, b   comma-separated lists
    stress.event = maneuver 1.0 0.010 N    (may repeat)

Unknown keys are errors.  Every seed must be given explicitly or comes from
the documented defaults below; nothing reads ambient randomness.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .orbit import STATIONS, StressEvent


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ScenarioConfig:
    name: str = "nominal"
    kind: str = "orbit"  # "orbit" | "linear"
    duration_days: float = 2.0
    cadence_s: float = 197.0
    # grid / filter
    grid_level: int = 3
    sigma0: float = 1.0
    sigma_contract: float = 0.9703
    sigma_gain: float = 0.05
    sigma_cap: float = 10.0
    sigma_min: float = 0.05
    sigma_max: float = 2.0
    kernel_bandwidth: float = 0.3
    vfi_eps_min: float = 1e-4
    vfi_lambda_max: float = 100.0
    entropy_levels: int = 64
    entropy_floor: float = -30.0
    mvee_tolerance: float = 1e-7
    pcrb_slack: float = 0.05
    reference_h: float = float("nan")  # nan: use the initial cloud
    state_scale: tuple = (1.0, 1.0, 1.0, 1e-3, 1e-3, 1e-3, 1.0)
    # orbit
    orbit_a_km: float = 7878.137
    orbit_e: float = 0.001
    orbit_inc_deg: float = 10.0
    orbit_raan_deg: float = 20.0
    orbit_argp_deg: float = 10.0
    orbit_nu_deg: float = 0.0
    orbit_cd: float = 2.2
    orbit_step_s: float = 10.0
    orbit_j2: bool = True
    stations: tuple = ("arecibo", "kwajalein", "diego_garcia")
    mask_deg: float = 10.0
    # initial uncertainty (1-sigma) and cloud spread in those sigmas
    init_sigma_pos_km: float = 0.05
    init_sigma_vel_kms: float = 5e-5
    init_sigma_cd: float = 0.1
    init_spread: float = 3.0
    # noise
    sigma_range_km: float = 1e-3
    sigma_rate_kms: float = 1e-5
    process_accel: float = 5e-12
    # linear scenario
    linear_steps: int = 200
    linear_q: float = 0.01
    linear_r: float = 1.0
    linear_p0: float = 4.0
    # stress
    events: tuple = ()
    # diagnostics
    claims_every: int = 10
    claims_draws: int = 50
    max_steps: int = 0  # 0 = no limit
    # seeds
    seed_truth: int = 1
    seed_measurement: int = 2
    seed_init: int = 3
    seed_comparator: int = 4
    # output
    out_dir: str = "out"
    plots: bool = False

    def validate(self) -> "ScenarioConfig":
        if self.kind not in ("orbit", "linear"):
            raise ConfigError("scenario.kind", f"unknown kind {self.kind!r}")
        if not self.duration_days > 0:
            raise ConfigError("scenario.duration_days", "must be positive")
        if not self.cadence_s > 0:
            raise ConfigError("scenario.cadence_s", "must be positive")
        if self.grid_level not in (2, 3):
            raise ConfigError("grid.level", "must be 2 or 3")
        if not 0 < self.sigma_min < self.sigma_max:
            raise ConfigError("sigma.min", "need 0 < sigma.min < sigma.max")
        if not self.sigma_min <= self.sigma0 <= self.sigma_max:
            raise ConfigError("sigma.initial", "must lie within [sigma.min, sigma.max]")
        if not 0 < self.vfi_eps_min < self.vfi_lambda_max:
            raise ConfigError("vfi.eps_min", "need 0 < vfi.eps_min < vfi.lambda_max")
        if self.entropy_levels < 8:
            raise ConfigError("entropy.levels", "need at least 8 levels")
        if self.kernel_bandwidth <= 0:
            raise ConfigError("kernel.bandwidth", "must be positive")
        if len(self.state_scale) != 7 or min(self.state_scale) <= 0:
            raise ConfigError("filter.state_scale", "need 7 positive entries")
        for s in self.stations:
            if s not in STATIONS:
                raise ConfigError("stations.names", f"unknown station {s!r}; known: {', '.join(STATIONS)}")
        for ev in self.events:
            if ev.kind == "range_bias" and ev.frame not in STATIONS:
                raise ConfigError("stress.event", f"bias on unknown station {ev.frame!r}")
        if self.claims_every < 0 or self.claims_draws < 1:
            raise ConfigError("claims.every", "claims.every >= 0 and claims.draws >= 1 required")
        if self.linear_r <= 0 or self.linear_q < 0 or self.linear_p0 <= 0:
            raise ConfigError("linear.r", "need r > 0, q >= 0, p0 > 0")
        return self

    @property
    def n_epochs(self) -> int:
        if self.kind == "linear":
            return self.linear_steps
        return int(np.floor(self.duration_days * 86400.0 / self.cadence_s + 1e-9))

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw).validate()


# config key -> dataclass field
KEYS = {
    "scenario.name": "name",
    "scenario.kind": "kind",
    "scenario.duration_days": "duration_days",
    "scenario.cadence_s": "cadence_s",
    "scenario.max_steps": "max_steps",
    "grid.level": "grid_level",
    "sigma.initial": "sigma0",
    "sigma.contract": "sigma_contract",
    "sigma.gain": "sigma_gain",
    "sigma.cap": "sigma_cap",
    "sigma.min": "sigma_min",
    "sigma.max": "sigma_max",
    "kernel.bandwidth": "kernel_bandwidth",
    "vfi.eps_min": "vfi_eps_min",
    "vfi.lambda_max": "vfi_lambda_max",
    "entropy.levels": "entropy_levels",
    "entropy.floor": "entropy_floor",
    "mvee.tolerance": "mvee_tolerance",
    "monitor.pcrb_slack": "pcrb_slack",
    "monitor.reference_h": "reference_h",
    "filter.state_scale": "state_scale",
    "orbit.a_km": "orbit_a_km",
    "orbit.e": "orbit_e",
    "orbit.inc_deg": "orbit_inc_deg",
    "orbit.raan_deg": "orbit_raan_deg",
    "orbit.argp_deg": "orbit_argp_deg",
    "orbit.nu_deg": "orbit_nu_deg",
    "orbit.cd": "orbit_cd",
    "orbit.step_s": "orbit_step_s",
    "orbit.j2": "orbit_j2",
    "stations.names": "stations",
    "stations.mask_deg": "mask_deg",
    "init.sigma_pos_km": "init_sigma_pos_km",
    "init.sigma_vel_kms": "init_sigma_vel_kms",
    "init.sigma_cd": "init_sigma_cd",
    "init.spread": "init_spread",
    "noise.sigma_range_km": "sigma_range_km",
    "noise.sigma_rate_kms": "sigma_rate_kms",
    "noise.process_accel": "process_accel",
    "linear.steps": "linear_steps",
    "linear.q": "linear_q",
    "linear.r": "linear_r",
    "linear.p0": "linear_p0",
    "claims.every": "claims_every",
    "claims.draws": "claims_draws",
    "seed.truth": "seed_truth",
    "seed.measurement": "seed_measurement",
    "seed.init": "seed_init",
    "seed.comparator": "seed_comparator",
    "output.dir": "out_dir",
    "output.plots": "plots",
}

_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}


def _coerce(key: str, attr: str, raw: str):
    default = _FIELDS[attr].default
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if default and isinstance(default[0], float):
                return tuple(float(s) for s in items)
            return tuple(items)
        return raw
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {type(default).__name__}") from None


def parse_event(raw: str) -> StressEvent:
    parts = raw.split()
    if len(parts) != 4:
        raise ConfigError("stress.event", "expected '<kind> <epoch_days> <magnitude> <axis|station>'")
    try:
        return StressEvent(parts[0], float(parts[1]), float(parts[2]), parts[3])
    except ValueError as exc:
        raise ConfigError("stress.event", str(exc)) from None


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    cfg = dataclasses.replace(base) if base is not None else ScenarioConfig()
    events = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "stress.event":
            events = (events or []) + [parse_event(raw)]
            continue
        if key == "stress.none":
            events = []
            continue
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        setattr(cfg, KEYS[key], _coerce(key, KEYS[key], raw))
    if events is not None:
        cfg.events = tuple(events)
    return cfg.validate()


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(str(p), f"cannot read config: {exc.strerror}") from None
    return parse_config(text)


def dump_config(cfg: ScenarioConfig) -> str:
    inv = {v: k for k, v in KEYS.items()}
    lines = []
    for f in dataclasses.fields(cfg):
        if f.name == "events":
            continue
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            val = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in val)
        elif isinstance(val, bool):
            val = str(val).lower()
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{inv[f.name]} = {val}")
    if not cfg.events:
        lines.append("stress.none = true")
    for ev in cfg.events:
        lines.append(f"stress.event = {ev.kind} {ev.epoch_days!r} {ev.magnitude!r} {ev.frame}")
    return "\n".join(lines) + "\n"


NOMINAL = ScenarioConfig().validate()
STRESS = ScenarioConfig(
    name="stress",
    events=(StressEvent("maneuver", 1.0, 0.010, "N"), StressEvent("range_bias", 0.0, 0.020, "arecibo")),
).validate()
# Process noise reaches the filter only through the eigenvalue floor: it is set
# to a 3-sigma step of the random walk, (3 sqrt(q))^2.
LINEAR = ScenarioConfig(
    name="linear", kind="linear", grid_level=3, vfi_eps_min=0.09, vfi_lambda_max=10.0, init_spread=2.0
).validate()

BUILTIN = {"nominal": NOMINAL, "stress": STRESS, "linear": LINEAR}
