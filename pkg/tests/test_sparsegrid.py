import numpy as np
import pytest
from numpy.testing import assert_allclose

from espf.geometry import DegenerateCloud, log_det_mvee, mvee
from espf.possibility import SupportCloud
from espf.sparsegrid import GridSpec, SigmaLaw, UnsupportedLevel, generate_nodes, regenerate, survivor_shape, unit_template


def test_node_counts():
    assert generate_nodes(GridSpec(7, 2)).shape == (15, 7)
    assert_allclose(generate_nodes(GridSpec(1, 2))[:, 0], [-1, 0, 1])
    assert generate_nodes(GridSpec(7, 3)).shape == (113, 7)
    assert generate_nodes(GridSpec(2, 3)).shape == (13, 2)


def test_levels_nested():
    for n in (1, 3, 7):
        lo = {tuple(p) for p in generate_nodes(GridSpec(n, 2))}
        hi = {tuple(p) for p in generate_nodes(GridSpec(n, 3))}
        assert lo < hi


def test_bad_specs():
    with pytest.raises(UnsupportedLevel):
        GridSpec(3, 5)
    with pytest.raises(ValueError):
        GridSpec(0, 2)


def test_template_is_its_own_unit_ball():
    T = unit_template(GridSpec(7, 3))
    e = mvee(T)
    assert_allclose(e.center, 0, atol=1e-7)
    assert_allclose(e.shape, np.eye(7), atol=1e-5)


def _cluster(seed=0, n=3):
    r = np.random.default_rng(seed)
    A = r.normal(size=(n, n))
    X = r.normal(size=(30, n)) @ A.T * 0.1 + 5.0
    poss = r.uniform(0.2, 1, size=30)
    poss[0] = 1.0
    return SupportCloud(X, poss)


def test_regenerate_keeps_shape():
    s = _cluster()
    spec = GridSpec(3, 3)
    new = regenerate(s, spec, 1.0)
    assert_allclose(mvee(new.points).shape, mvee(s.points).shape, rtol=1e-4, atol=1e-8)
    assert new.points.shape == (generate_nodes(spec).shape[0], 3)
    assert new.poss.max() == 1.0 and new.poss.min() > 0


def test_sigma_doubling_scales_log_det():
    s = _cluster(1)
    spec = GridSpec(3, 3)
    a = log_det_mvee(regenerate(s, spec, 0.5).points)
    b = log_det_mvee(regenerate(s, spec, 1.0).points)
    assert b - a == pytest.approx(2 * 3 * np.log(2), abs=1e-5)


def test_center_inherits_anchor_possibility():
    T = unit_template(GridSpec(2, 3))
    poss = np.full(T.shape[0], 0.3)
    centre = int(np.flatnonzero(np.all(T == 0, axis=1))[0])
    poss[centre] = 1.0
    new = regenerate(SupportCloud(T, poss), GridSpec(2, 3), 1.0)
    assert new.poss[centre] == 1.0


def test_survivor_shape_floor_handles_degenerate():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(DegenerateCloud):
        survivor_shape(X)
    _, shape = survivor_shape(X, eps_min=1e-3)
    assert np.linalg.eigvalsh(shape).min() >= 1e-3 * (1 - 1e-9)
    _, capped = survivor_shape(10 * X + np.eye(3, 2), eps_min=1e-3, lambda_max=5.0)
    assert np.linalg.eigvalsh(capped).max() <= 5.0 * (1 + 1e-9)


def test_sigma_law():
    law = SigmaLaw()
    assert law.update(1.0, 0.0) == pytest.approx(0.9703)
    assert law.update(1.0, 1.0) == pytest.approx(0.9703 + 0.05)
    assert law.update(1.0, 1e9) == law.update(1.0, 10.0)
    assert law.update(0.05, 0.0) == 0.05
    assert law.update(2.0, 10.0) == 2.0
    with pytest.raises(ValueError):
        SigmaLaw(sigma_min=3.0)
