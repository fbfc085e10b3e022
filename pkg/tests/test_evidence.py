import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from espf.evidence import (
    InnovationContext,
    choquet_surprisal,
    info_content,
    innovation_shape,
    isotropy_check,
    pcrb_floor,
    score,
    whitened_q,
)
from espf.geometry import Ellipsoid, mvee
from espf.possibility import SupportCloud


def _identity_ctx(H):
    H = np.asarray(H, dtype=float)
    m = H.shape[1]
    return InnovationContext(H, np.eye(m), np.eye(m))


def test_coincident_predictions_fall_back_to_sensor():
    ctx = innovation_shape(np.ones((6, 2)), np.diag([2.0, 3.0]))
    assert ctx.used_fallback
    assert_allclose(ctx.innovation_shape, np.diag([2.0, 3.0]))


def test_innovation_shape_adds_spread():
    H = np.array([[2.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    ctx = innovation_shape(H, np.eye(2))
    assert_allclose(ctx.innovation_shape, np.diag([5.0, 2.0]), atol=1e-6)
    assert not ctx.used_fallback


def test_whitened_q_examples():
    ctx = _identity_ctx([[0.0, 0.0], [3.0, 4.0]])
    q, comp = whitened_q(ctx, [3.0, 4.0])
    assert_allclose(q, [25.0, 0.0])
    assert_allclose(comp, [np.exp(-12.5), 1.0])
    H = np.random.default_rng(3).normal(size=(8, 2))
    base = innovation_shape(H, np.eye(2))
    scaled = InnovationContext(H, 4 * base.innovation_shape, 2 * base.whitening)
    y = np.array([0.3, -1.0])
    assert_allclose(whitened_q(scaled, y)[0], whitened_q(base, y)[0] / 4)


def test_surprisal_examples():
    assert choquet_surprisal(np.zeros(4), np.ones(4)) == 0.0
    assert choquet_surprisal([0.2, 4.0], [1.0, 1.0]) == pytest.approx(1.0)
    assert choquet_surprisal([0.2, 10.0], [1.0, 0.3]) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        choquet_surprisal([1.0], [1.0, 1.0])


def _rearranged_sugeno(f, poss):
    # Decreasing rearrangement: A_i holds the i largest values of f.
    order = np.argsort(-f, kind="stable")
    best = 0.0
    for i in range(1, f.size + 1):
        best = max(best, min(f[order[i - 1]], poss[order[:i]].max()))
    return best


@given(seed=st.integers(0, 10_000))
def test_sup_min_matches_rearrangement(seed):
    r = np.random.default_rng(seed)
    q = r.exponential(2.0, size=5)
    poss = r.uniform(size=5)
    poss[r.integers(5)] = 1.0
    assert choquet_surprisal(q, poss) == pytest.approx(_rearranged_sugeno(0.5 * q, poss), abs=1e-15)


def test_info_content():
    assert info_content(0.0) == 0.0
    assert info_content(0.3) == pytest.approx(0.2592, abs=1e-4)
    assert info_content(50.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        info_content(-0.1)


def test_pcrb_floor():
    assert pcrb_floor(1.5, 0.0, 7) == 1.5
    assert pcrb_floor(0.0, 0.5, 7) == pytest.approx(-2.4260, abs=1e-4)
    assert pcrb_floor(0.0, 1.0, 7) == -np.inf


@given(seed=st.integers(0, 10_000))
def test_score_bounds(seed):
    r = np.random.default_rng(seed)
    H = r.normal(size=(12, 2))
    poss = r.uniform(size=12)
    poss[0] = 1.0
    s = score(innovation_shape(H, 0.1 * np.eye(2)), r.normal(size=2), poss)
    assert 0.0 <= s.surprisal <= 1.0
    assert 0.0 <= s.info < 1.0
    assert np.all((s.comp > 0) & (s.comp <= 1))


def test_isotropy_identity_model_ratio_near_one(rng):
    X = rng.normal(size=(40, 2))
    cloud = SupportCloud.uniform(X)
    e = mvee(X)
    ctx = InnovationContext(X, e.shape, np.linalg.cholesky(e.shape))
    res = isotropy_check(cloud, ctx, lambda x: x, e, samples=4000, seed=1)
    assert res.ratio == pytest.approx(1.0, abs=0.1)


def test_isotropy_range_only_tangential_violates():
    # State (x, y); sensor far along -x measures range, so the thin x-extent is
    # seen while the cloud is long in y: innovation variance tiny vs state.
    core = Ellipsoid(np.array([0.0, 0.0]), np.diag([1.0, 1e-4]))
    sensor = np.array([0.0, -1e3])
    X = np.array([[1, 0], [-1, 0], [0, 0.01], [0, -0.01], [0.5, 0.005]], float)
    model = lambda x: np.linalg.norm(x - sensor, axis=1)[:, None]
    H = model(X)
    ctx = InnovationContext(H, np.array([[1e-6]]), np.array([[1e-3]]))
    res = isotropy_check(SupportCloud.uniform(X), ctx, model, core, samples=2000, seed=0)
    assert not res.holds and res.ratio > 1.0


def test_isotropy_rejects_small_samples():
    X = np.random.default_rng(0).normal(size=(10, 2))
    with pytest.raises(ValueError):
        isotropy_check(SupportCloud.uniform(X), _identity_ctx(X), lambda x: x, mvee(X), samples=10)
