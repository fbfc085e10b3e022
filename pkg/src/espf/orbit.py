"""Two-body + J2 orbit model, ground stations and range / range-rate tracking.

State vectors are ``(x, y, z, vx, vy, vz, Cd)`` in km, km/s and a unitless
drag coefficient.  No atmosphere is modelled, so ``Cd`` is carried along
unchanged; it is the coordinate the measurements cannot see.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MU = 398600.4418  # km^3 / s^2
J2 = 1.08263e-3
R_EARTH = 6378.137  # km
OMEGA_EARTH = 7.2921159e-5  # rad / s
WGS84_F = 1.0 / 298.257223563
DAY = 86400.0

SIGMA_RANGE = 1e-3  # km
SIGMA_RANGE_RATE = 1e-5  # km / s


class SubsurfaceTrajectory(RuntimeError):
    pass


class NotVisible(ValueError):
    pass


@dataclass(frozen=True)
class OrbitState:
    r: np.ndarray
    v: np.ndarray
    cd: float = 2.2

    def __post_init__(self):
        object.__setattr__(self, "r", np.array(self.r, dtype=float).reshape(3))
        object.__setattr__(self, "v", np.array(self.v, dtype=float).reshape(3))
        object.__setattr__(self, "cd", float(self.cd))

    def vector(self) -> np.ndarray:
        return np.concatenate([self.r, self.v, [self.cd]])

    @classmethod
    def from_vector(cls, x) -> "OrbitState":
        x = np.asarray(x, dtype=float)
        return cls(x[:3], x[3:6], x[6])


def elements_to_state(a, e, inc, raan, argp, nu, cd: float = 2.2) -> OrbitState:
    """Classical elements (km, rad) to an ECI state."""
    p = a * (1.0 - e * e)
    rm = p / (1.0 + e * np.cos(nu))
    r_pf = rm * np.array([np.cos(nu), np.sin(nu), 0.0])
    v_pf = np.sqrt(MU / p) * np.array([-np.sin(nu), e + np.cos(nu), 0.0])
    cO, sO, ci, si, cw, sw = np.cos(raan), np.sin(raan), np.cos(inc), np.sin(inc), np.cos(argp), np.sin(argp)
    R = np.array(
        [
            [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
            [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
            [sw * si, cw * si, ci],
        ]
    )
    return OrbitState(R @ r_pf, R @ v_pf, cd)


def acceleration(r: np.ndarray, j2: bool = True) -> np.ndarray:
    """Gravity for positions stacked in rows (K x 3)."""
    r = np.atleast_2d(r)
    rn2 = np.sum(r * r, axis=1, keepdims=True)
    rn = np.sqrt(rn2)
    a = -MU * r / (rn2 * rn)
    if j2:
        z2 = (r[:, 2:3] ** 2) / rn2
        k = 1.5 * J2 * MU * R_EARTH**2 / (rn2 * rn2 * rn)
        a = a + k * r * (5.0 * z2 - 1.0) - 2.0 * k * np.hstack([np.zeros_like(rn), np.zeros_like(rn), r[:, 2:3]])
    return a


def _deriv(Y, j2, extra):
    out = np.zeros_like(Y)
    out[:, :3] = Y[:, 3:6]
    out[:, 3:6] = acceleration(Y[:, :3], j2)
    if extra is not None:
        out[:, 3:6] += extra
    return out


def rtn_basis(r, v) -> np.ndarray:
    """Rows are the radial, transverse and normal unit vectors."""
    rhat = r / np.linalg.norm(r)
    h = np.cross(r, v)
    nhat = h / np.linalg.norm(h)
    return np.vstack([rhat, np.cross(nhat, rhat), nhat])


def propagate_states(X, dt: float, step: float = 10.0, j2: bool = True, accel_sigma=None, rng=None) -> np.ndarray:
    """RK4-propagate stacked 7-vectors (K x 7) by ``dt`` seconds.

    With ``accel_sigma`` (km/s^2, RTN components) a fresh piecewise-constant
    random acceleration is drawn for every integrator step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    Y = np.array(np.atleast_2d(X), dtype=float)
    n_steps = int(np.ceil(dt / step - 1e-9))
    h = dt / n_steps
    for _ in range(n_steps):
        extra = None
        if accel_sigma is not None:
            extra = np.empty((Y.shape[0], 3))
            for i in range(Y.shape[0]):
                a_rtn = rng.normal(size=3) * np.asarray(accel_sigma, dtype=float)
                extra[i] = rtn_basis(Y[i, :3], Y[i, 3:6]).T @ a_rtn
        k1 = _deriv(Y, j2, extra)
        k2 = _deriv(Y + 0.5 * h * k1, j2, extra)
        k3 = _deriv(Y + 0.5 * h * k2, j2, extra)
        k4 = _deriv(Y + h * k3, j2, extra)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.any(np.sum(Y[:, :3] ** 2, axis=1) < R_EARTH**2):
            raise SubsurfaceTrajectory("trajectory dipped below the Earth's surface")
    return Y


def propagate(x: OrbitState, dt: float, step: float = 10.0, j2: bool = True, accel_sigma=None, seed=None) -> OrbitState:
    rng = np.random.default_rng(seed) if accel_sigma is not None else None
    return OrbitState.from_vector(propagate_states(x.vector(), dt, step, j2, accel_sigma, rng)[0])


def specific_energy(x: OrbitState) -> float:
    return 0.5 * float(x.v @ x.v) - MU / float(np.linalg.norm(x.r))


@dataclass(frozen=True)
class Station:
    name: str
    lat_deg: float
    lon_deg: float
    alt_km: float = 0.0
    range_bias: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude {self.lat_deg} out of range")

    def ecef(self) -> np.ndarray:
        lat, lon = np.radians(self.lat_deg), np.radians(self.lon_deg)
        e2 = WGS84_F * (2.0 - WGS84_F)
        N = R_EARTH / np.sqrt(1.0 - e2 * np.sin(lat) ** 2)
        return np.array(
            [
                (N + self.alt_km) * np.cos(lat) * np.cos(lon),
                (N + self.alt_km) * np.cos(lat) * np.sin(lon),
                (N * (1.0 - e2) + self.alt_km) * np.sin(lat),
            ]
        )

    def up(self) -> np.ndarray:
        lat, lon = np.radians(self.lat_deg), np.radians(self.lon_deg)
        return np.array([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])

    def eci(self, t: float):
        """(position, velocity, up) in ECI at ``t`` seconds (Greenwich aligned at t = 0)."""
        th = OMEGA_EARTH * t
        c, s = np.cos(th), np.sin(th)
        Rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        r = Rz @ self.ecef()
        v = np.cross([0.0, 0.0, OMEGA_EARTH], r)
        return r, v, Rz @ self.up()


# Nominal published site coordinates (deg, deg, km).
STATIONS = {
    "arecibo": Station("arecibo", 18.3464, -66.7528, 0.497),
    "kwajalein": Station("kwajalein", 9.3952, 167.4791, 0.010),
    "diego_garcia": Station("diego_garcia", -7.3195, 72.4229, 0.010),
}


def elevation(x, station: Station, t: float) -> float:
    """Elevation of the satellite above the station horizon (rad)."""
    x = np.asarray(x, dtype=float)
    rs, _, up = station.eci(t)
    los = x[:3] - rs
    return float(np.arcsin(np.clip(los @ up / np.linalg.norm(los), -1.0, 1.0)))


def range_and_rate(X, station: Station, t: float) -> np.ndarray:
    """Geometric range and range-rate for stacked states (K x 7) -> (K x 2).

    The rate uses the velocity relative to the rotating station, so it is
    the exact time derivative of the range.
    """
    X = np.atleast_2d(X)
    rs, vs, _ = station.eci(t)
    d = X[:, :3] - rs
    rho = np.linalg.norm(d, axis=1)
    rate = np.sum(d * (X[:, 3:6] - vs), axis=1) / rho
    return np.column_stack([rho, rate])


@dataclass(frozen=True)
class Measurement:
    values: np.ndarray
    imprecision: np.ndarray
    station: str
    epoch: float  # seconds from scenario start


@dataclass(frozen=True)
class StressEvent:
    kind: str  # "maneuver" | "range_bias"
    epoch_days: float
    magnitude: float  # km/s for maneuvers, km for biases
    frame: str = "N"  # RTN axis for maneuvers, station name for biases

    def __post_init__(self):
        if self.kind not in ("maneuver", "range_bias"):
            raise ValueError(f"unknown stress kind {self.kind!r}")
        if self.kind == "maneuver":
            if self.magnitude < 0:
                raise ValueError("maneuver magnitude must be non-negative")
            if self.frame not in ("R", "T", "N"):
                raise ValueError("maneuver frame must be R, T or N")


def active_bias(station: Station, events, t: float) -> float:
    bias = station.range_bias
    for ev in events:
        if ev.kind == "range_bias" and ev.frame == station.name and t >= ev.epoch_days * DAY:
            bias += ev.magnitude
    return bias


def measure(
    x,
    station: Station,
    t: float,
    rng: np.random.Generator | None = None,
    sigma_range: float = SIGMA_RANGE,
    sigma_rate: float = SIGMA_RANGE_RATE,
    events=(),
    mask_deg: float = 10.0,
) -> Measurement:
    """Noisy, possibly biased range / range-rate; raises NotVisible below the mask."""
    vec = x.vector() if isinstance(x, OrbitState) else np.asarray(x, dtype=float)
    if elevation(vec, station, t) < np.radians(mask_deg):
        raise NotVisible(f"{station.name} cannot see the satellite at t={t:.1f}s")
    y = range_and_rate(vec, station, t)[0]
    y[0] += active_bias(station, events, t)
    if rng is not None:
        y = y + rng.normal(size=2) * np.array([sigma_range, sigma_rate])
    R = np.diag([sigma_range**2, sigma_rate**2])
    return Measurement(y, R, station.name, t)


def apply_stress(truth: OrbitState, events, t0: float, t1: float) -> OrbitState:
    """Apply every maneuver with epoch in ``(t0, t1]`` (seconds)."""
    for ev in events:
        if ev.kind != "maneuver" or not t0 < ev.epoch_days * DAY <= t1:
            continue
        axis = {"R": 0, "T": 1, "N": 2}[ev.frame]
        dv = ev.magnitude * rtn_basis(truth.r, truth.v)[axis]
        truth = OrbitState(truth.r, truth.v + dv, truth.cd)
    return truth


def maneuver_epochs(events) -> list[float]:
    return sorted(ev.epoch_days * DAY for ev in events if ev.kind == "maneuver")


@dataclass
class TruthTrack:
    """Truth trajectory advanced piecewise, stopping at maneuver epochs."""

    state: OrbitState
    t: float = 0.0
    events: tuple = ()
    step: float = 10.0
    j2: bool = True
    accel_sigma: np.ndarray | None = None
    rng: np.random.Generator | None = None
    _stops: list = field(default_factory=list)

    def __post_init__(self):
        self._stops = maneuver_epochs(self.events)

    def advance(self, t_new: float) -> OrbitState:
        while self.t < t_new:
            nxt = min([s for s in self._stops if self.t < s <= t_new] + [t_new])
            Y = propagate_states(self.state.vector(), nxt - self.t, self.step, self.j2, self.accel_sigma, self.rng)
            prev = self.t
            self.state, self.t = OrbitState.from_vector(Y[0]), nxt
            self.state = apply_stress(self.state, self.events, prev, nxt)
        return self.state
