import numpy as np
import pytest
from numpy.testing import assert_allclose

from espf.kalman import SingularInnovation, innovations, kalman_oracle_step


def test_scalar_update():
    m, P = kalman_oracle_step([0.0], [[1.0]], 1, 1, 0, 1, [2.0])
    assert P[0, 0] == pytest.approx(0.5)
    assert m[0] == pytest.approx(1.0)


def test_perfect_measurement():
    m, P = kalman_oracle_step(np.zeros(2), np.eye(2), np.eye(2), np.eye(2), np.zeros((2, 2)), 1e-12 * np.eye(2), [3.0, -1.0])
    assert_allclose(m, [3.0, -1.0], atol=1e-9)
    assert np.all(np.linalg.eigvalsh(P) < 1e-9)


def test_singular_innovation():
    with pytest.raises(SingularInnovation):
        kalman_oracle_step([0.0], [[0.0]], 1, 1, 0, 0, [1.0])


def test_constant_velocity_whiteness():
    rng = np.random.default_rng(4)
    F = np.array([[1.0, 1.0], [0.0, 1.0]])
    H = np.array([[1.0, 0.0]])
    Q = 0.01 * np.array([[1 / 3, 1 / 2], [1 / 2, 1.0]])
    R = np.array([[1.0]])
    x = np.array([0.0, 1.0])
    ys = []
    for _ in range(100):
        x = F @ x + rng.multivariate_normal(np.zeros(2), Q)
        ys.append(H @ x + rng.normal(size=1))
    nu = innovations(np.zeros(2), 10 * np.eye(2), F, H, Q, R, ys)[:, 0]
    nu = nu[5:] - nu[5:].mean()
    rho = np.correlate(nu, nu, "full")[nu.size:] / np.dot(nu, nu)
    assert np.max(np.abs(rho[:5])) < 0.2
    assert np.var(nu) == pytest.approx(1.0, abs=0.35)
