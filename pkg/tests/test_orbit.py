import numpy as np
import pytest
from numpy.testing import assert_allclose

from espf.orbit import (
    DAY,
    MU,
    STATIONS,
    NotVisible,
    OrbitState,
    Station,
    StressEvent,
    SubsurfaceTrajectory,
    TruthTrack,
    apply_stress,
    elements_to_state,
    measure,
    propagate,
    propagate_states,
    range_and_rate,
    rtn_basis,
    specific_energy,
)

A = 7878.137


def _circular():
    return OrbitState([A, 0, 0], [0, np.sqrt(MU / A), 0])


def test_two_body_period_closure():
    x0 = _circular()
    T = 2 * np.pi * np.sqrt(A**3 / MU)
    x1 = propagate(x0, T, step=2.0, j2=False)
    assert np.linalg.norm(x1.r - x0.r) < 1e-6


def test_energy_drift_two_days():
    x0 = elements_to_state(A, 0.001, 0.17, 0.3, 0.2, 0.0)
    x1 = propagate(x0, 2 * DAY, step=10.0, j2=False)
    e0, e1 = specific_energy(x0), specific_energy(x1)
    assert abs((e1 - e0) / e0) < 1e-9


def _raan(x):
    h = np.cross(x.r, x.v)
    return np.arctan2(h[0], -h[1])


def test_j2_raan_drift_matches_secular_rate():
    inc = np.radians(30.0)
    x0 = elements_to_state(A, 0.0, inc, 0.5, 0.0, 0.0)
    T = 2 * np.pi * np.sqrt(A**3 / MU)
    x1 = propagate(x0, 10 * T, step=10.0, j2=True)
    from espf.orbit import J2, R_EARTH

    n = np.sqrt(MU / A**3)
    rate = -1.5 * n * J2 * (R_EARTH / A) ** 2 * np.cos(inc)
    drift = _raan(x1) - _raan(x0)
    assert drift < 0
    assert drift == pytest.approx(rate * 10 * T, rel=0.05)


def test_elements_roundtrip_radius():
    x = elements_to_state(A, 0.0, 0.3, 1.0, 2.0, 0.7)
    assert np.linalg.norm(x.r) == pytest.approx(A)
    assert np.linalg.norm(x.v) == pytest.approx(np.sqrt(MU / A))


class _OriginStation(Station):
    def eci(self, t):
        return np.zeros(3), np.zeros(3), np.array([1.0, 0.0, 0.0])


def test_range_example():
    st = _OriginStation("o", 0.0, 0.0)
    y = range_and_rate(np.array([7000, 0, 0, 0, 7.5, 0, 2.2]), st, 0.0)[0]
    assert_allclose(y, [7000.0, 0.0], atol=1e-12)
    m = measure(np.array([7000, 0, 0, 0, 7.5, 0, 2.2]), st, 0.0)
    assert_allclose(m.values, [7000.0, 0.0], atol=1e-12)
    biased = measure(
        np.array([7000, 0, 0, 0, 7.5, 0, 2.2]), st, 0.0, events=[StressEvent("range_bias", 0.0, 0.020, "o")]
    )
    assert biased.values[0] == pytest.approx(7000.020)


def test_range_rate_is_range_derivative():
    st = STATIONS["kwajalein"]
    x = np.concatenate([st.eci(0.0)[0] * 1.2 + [100, 300, 50], [1.0, 6.5, 2.0], [2.2]])
    h = 1e-3
    fwd = x.copy()
    fwd[:3] += h * x[3:6]
    bwd = x.copy()
    bwd[:3] -= h * x[3:6]
    num = (range_and_rate(fwd, st, h)[0, 0] - range_and_rate(bwd, st, -h)[0, 0]) / (2 * h)
    assert range_and_rate(x, st, 0.0)[0, 1] == pytest.approx(num, rel=1e-6)


def test_invisible_raises():
    st = STATIONS["arecibo"]
    r, _, up = st.eci(0.0)
    x = np.concatenate([-2 * r, [0, 7, 0], [2.2]])
    with pytest.raises(NotVisible):
        measure(x, st, 0.0)


def test_measurement_jacobian_rank():
    st = STATIONS["arecibo"]
    r, _, up = st.eci(0.0)
    x = np.concatenate([r + 1500 * up + [200, 0, 0], [0.5, 6.8, 2.0], [2.2]])
    J = np.empty((2, 7))
    for j in range(7):
        d = np.zeros(7)
        d[j] = 1e-6
        J[:, j] = (range_and_rate(x + d, st, 0.0)[0] - range_and_rate(x - d, st, 0.0)[0]) / 2e-6
    assert np.linalg.matrix_rank(J, tol=1e-9) == 2
    assert_allclose(J[:, 6], 0.0)


def test_stress_maneuver():
    x = _circular()
    ev = [StressEvent("maneuver", 1.0, 0.010, "N")]
    assert apply_stress(x, ev, 0.0, 0.5 * DAY) is x
    y = apply_stress(x, ev, 0.5 * DAY, DAY)
    dv = y.v - x.v
    assert np.linalg.norm(dv) == pytest.approx(0.010)
    assert_allclose(dv / 0.010, rtn_basis(x.r, x.v)[2], atol=1e-15)


def test_truth_track_diverges_after_maneuver():
    x = _circular()
    ev = (StressEvent("maneuver", 0.01, 0.010, "N"),)
    a = TruthTrack(x, events=ev, j2=False)
    b = TruthTrack(x, j2=False)
    t_m = 0.01 * DAY
    assert_allclose(a.advance(t_m - 100).r, b.advance(t_m - 100).r)
    assert np.linalg.norm(a.advance(t_m + 600).r - b.advance(t_m + 600).r) > 1.0


def test_subsurface_detected():
    with pytest.raises(SubsurfaceTrajectory):
        propagate_states(np.array([6500.0, 0, 0, 0, 1.0, 0, 2.2]), 2000.0)


def test_event_validation():
    with pytest.raises(ValueError):
        StressEvent("maneuver", 1.0, 0.01, "Q")
    with pytest.raises(ValueError):
        StressEvent("burn", 1.0, 0.01, "N")
    with pytest.raises(ValueError):
        Station("x", 95.0, 0.0)
