import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from espf.possibility import (
    AllZero,
    SupportCloud,
    alpha_cut,
    anchor,
    conjunctive_min,
    conjunctive_update,
    gaussian_kernel,
    kernel_extend,
    normalize,
)

poss_arrays = arrays(np.float64, st.integers(2, 30), elements=st.floats(0.01, 1.0))


def _cloud(poss):
    poss = np.asarray(poss, dtype=float)
    return SupportCloud(np.arange(poss.size, dtype=float)[:, None], poss)


def test_alpha_cut_examples():
    c = _cloud([1.0, 0.6, 0.2])
    assert list(alpha_cut(c, 0.5).member_indices) == [0, 1]
    assert list(alpha_cut(c, 1.0).member_indices) == [0]
    u = SupportCloud.uniform(np.zeros((4, 2)))
    assert len(alpha_cut(u, 0.3)) == 4


@pytest.mark.parametrize("level", [0.0, -0.1, 1.5])
def test_alpha_cut_rejects_levels(level):
    with pytest.raises(ValueError):
        alpha_cut(_cloud([1.0]), level)


@given(poss=poss_arrays, a=st.floats(0.01, 1.0), b=st.floats(0.01, 1.0))
def test_cuts_are_nested(poss, a, b):
    c = _cloud(normalize(poss))
    lo, hi = min(a, b), max(a, b)
    assert set(alpha_cut(c, hi).member_indices) <= set(alpha_cut(c, lo).member_indices)


def test_conjunctive_examples():
    c = _cloud([1.0, 0.8])
    assert_allclose(conjunctive_min(c.poss, [0.5, 0.9]), [0.5, 0.8])
    assert_allclose(conjunctive_update(c, [0.5, 0.9]).poss, [0.625, 1.0])
    same = conjunctive_update(c, [1.0, 0.95])
    assert_allclose(same.poss, c.poss)
    with pytest.raises(AllZero):
        conjunctive_update(c, np.exp(-0.5 * np.array([1e4, 1e4])))


@given(prior=poss_arrays, seed=st.integers(0, 1000))
def test_conjunctive_never_raises_possibility(prior, seed):
    comp = np.random.default_rng(seed).uniform(size=prior.size)
    assert np.all(conjunctive_min(prior, comp) <= prior)


@given(poss=poss_arrays)
def test_normalize_idempotent(poss):
    once = normalize(poss)
    assert once.max() == 1.0
    assert_allclose(normalize(once), once)


def test_kernel_extend_examples():
    surv = SupportCloud(np.array([[0.0], [1.0]]), np.array([1.0, 0.5]))
    assert kernel_extend(surv, None, np.array([[0.2, 1.0]]))[0] == pytest.approx(0.5)
    k = gaussian_kernel(np.eye(1))
    assert kernel_extend(surv, np.array([[0.0]]), k)[0] == pytest.approx(1.0)
    assert kernel_extend(surv, None, np.zeros((1, 2)))[0] == 0.0


@given(poss=poss_arrays, seed=st.integers(0, 1000))
def test_kernel_extension_bounded_and_monotone(poss, seed):
    r = np.random.default_rng(seed)
    surv = _cloud(normalize(poss))
    K = r.uniform(size=(7, poss.size))
    lo = kernel_extend(surv, None, K)
    hi = kernel_extend(surv, None, np.minimum(1.0, K * 1.5))
    assert np.all(lo <= 1.0)
    assert np.all(hi >= lo)


def test_anchor_examples():
    assert anchor(_cloud([0.3, 1.0, 0.7])) == 1
    assert anchor(_cloud([1.0, 1.0])) == 0


def test_cloud_is_immutable():
    c = _cloud([1.0, 0.5])
    with pytest.raises(ValueError):
        c.poss[0] = 0.2
    with pytest.raises(ValueError):
        SupportCloud(np.zeros((3, 2)), [1.0, 1.0])
