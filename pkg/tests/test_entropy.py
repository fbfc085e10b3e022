import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from espf.entropy import (
    DEGENERATE_LOG_VOLUME,
    EULER_GAMMA,
    AllDegenerate,
    CutVolumeProfile,
    cut_volume_profile,
    decompose,
    gaussian_h_pi,
    h_pi,
    h_pi_exact,
    h_pi_or_floor,
    holder_mean,
    uniform_levels,
)
from espf.geometry import log_volume, mvee
from espf.possibility import SupportCloud

TWO_LEVEL = CutVolumeProfile.from_values([0.5, 1.0], [np.log(2.0), 0.0])


def _random_cloud(seed, n=2, M=30):
    r = np.random.default_rng(seed)
    X = r.normal(size=(M, n))
    poss = r.uniform(0.05, 1.0, size=M)
    poss[0] = 1.0
    return SupportCloud(X, poss)


def test_uniform_cloud_reduces_to_log_volume(rng):
    X = rng.normal(size=(20, 3))
    c = SupportCloud.uniform(X)
    prof = cut_volume_profile(c)
    assert np.all(prof.log_volumes == prof.log_volumes[0])
    assert h_pi(prof) == log_volume(mvee(X))
    assert h_pi_exact(c) == pytest.approx(log_volume(mvee(X)), abs=1e-12)
    assert decompose(prof).gradient_entropy == 0.0


def test_hull_point_demotion_drops_profile():
    X = np.array([[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1], [0.2, 0.1], [3.0, 0.0]])
    poss = np.ones(7)
    poss[-1] = 0.5
    prof = cut_volume_profile(SupportCloud(X, poss), levels=[0.25, 0.5, 0.75, 1.0])
    with_pt, without = log_volume(mvee(X)), log_volume(mvee(X[:-1]))
    assert_allclose(prof.log_volumes, [with_pt, with_pt, without, without])


def test_exactly_2n_points_all_degenerate(rng):
    c = SupportCloud.uniform(rng.normal(size=(4, 2)))
    prof = cut_volume_profile(c)
    assert prof.degenerate_mask.all()
    with pytest.raises(AllDegenerate):
        h_pi(prof)
    assert h_pi_or_floor(prof) == DEGENERATE_LOG_VOLUME


def test_two_level_profile():
    assert h_pi(TWO_LEVEL) == pytest.approx(0.5 * np.log(2.0))
    assert holder_mean(TWO_LEVEL, np.inf) == pytest.approx(np.log(2.0))
    assert holder_mean(TWO_LEVEL, 0) == pytest.approx(np.log(np.sqrt(2.0)))
    assert holder_mean(TWO_LEVEL, -np.inf) == pytest.approx(0.0)


def test_constant_profile_holder_means():
    prof = CutVolumeProfile.from_values(uniform_levels(16), np.full(16, 1.7))
    for p in (-np.inf, -3.0, -0.5, 0, 0.5, 3.0, np.inf):
        assert holder_mean(prof, p) == pytest.approx(1.7)


@given(vals=st.lists(st.floats(-5.0, 5.0), min_size=8, max_size=40))
def test_holder_means_monotone_in_p(vals):
    lv = np.sort(np.asarray(vals))[::-1]
    prof = CutVolumeProfile.from_values(uniform_levels(len(vals)), lv)
    ps = [-np.inf, -4.0, -1.0, 0, 1.0, 4.0, np.inf]
    m = [holder_mean(prof, p) for p in ps]
    assert np.all(np.diff(m) >= -1e-9)
    if np.ptp(lv) > 1e-6:
        assert m[0] < m[3] < m[-1]


def test_degenerate_levels_use_the_floor():
    prof = CutVolumeProfile.from_values([0.5, 1.0], [1.0, -np.inf], floor=-10.0)
    assert prof.degenerate_mask.tolist() == [False, True]
    assert h_pi(prof) == pytest.approx(0.5 * 1.0 + 0.5 * -10.0)


@given(seed=st.integers(0, 5000))
def test_profile_non_increasing(seed):
    prof = cut_volume_profile(_random_cloud(seed), 32)
    ok = ~prof.degenerate_mask
    assert np.all(np.diff(prof.log_volumes[ok]) <= 2e-7)


@given(seed=st.integers(0, 5000))
def test_gradient_entropy_non_positive(seed):
    d = decompose(cut_volume_profile(_random_cloud(seed, M=40)))
    assert d.gradient_entropy <= 1e-9
    assert d.total == pytest.approx(d.support_entropy + d.gradient_entropy)


@given(seed=st.integers(0, 5000))
def test_grid_matches_exact_when_levels_cover_values(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(25, 2))
    poss = r.integers(1, 9, size=25) / 8.0
    poss[0] = 1.0
    c = SupportCloud(X, poss)
    assert h_pi(cut_volume_profile(c, 8)) == pytest.approx(h_pi_exact(c), abs=1e-7)


def test_monotone_concentration_on_active_point(rng):
    X = rng.normal(size=(15, 2))
    poss = np.ones(15)
    base = h_pi_exact(SupportCloud(X, poss))
    e = mvee(X)
    i = int(np.argmax(e.containment(X)))
    poss[i] = 0.4
    assert h_pi_exact(SupportCloud(X, poss)) < base


def test_gaussian_closed_form():
    assert gaussian_h_pi(np.eye(1)) == pytest.approx(0.5 * (np.log(2.0) - EULER_GAMMA) + np.log(2.0))
    assert gaussian_h_pi(np.eye(1)) == pytest.approx(0.7511, abs=1e-4)
    S = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert gaussian_h_pi(3.0 * S) - gaussian_h_pi(S) == pytest.approx(np.log(3.0))


def test_gaussian_constant_by_quadrature():
    val, _ = integrate.quad(lambda a: np.log(-2.0 * np.log(a)), 0.0, 1.0, limit=200, points=[np.exp(-0.5)])
    assert val == pytest.approx(np.log(2.0) - EULER_GAMMA, abs=1e-4)
    assert val == pytest.approx(0.11593, abs=1e-5)


def test_levels_validation():
    with pytest.raises(ValueError):
        uniform_levels(4)
    with pytest.raises(ValueError):
        CutVolumeProfile.from_values([0.5, 0.4], [0.0, 0.0])
