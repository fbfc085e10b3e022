"""Linear-Gaussian reference filter."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class SingularInnovation(np.linalg.LinAlgError):
    pass


def kalman_oracle_step(mean, cov, F, H, Q, R, y):
    """One predict + update cycle; returns the posterior ``(mean, cov)``."""
    F, H, Q, R = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (F, H, Q, R))
    m = F @ np.atleast_1d(np.asarray(mean, dtype=float))
    P = F @ np.atleast_2d(cov) @ F.T + Q
    S = H @ P @ H.T + R
    try:
        c = cho_factor(0.5 * (S + S.T))
    except np.linalg.LinAlgError:
        raise SingularInnovation("innovation covariance is not positive definite") from None
    K = cho_solve(c, H @ P).T
    m = m + K @ (np.atleast_1d(y) - H @ m)
    I_KH = np.eye(P.shape[0]) - K @ H
    P = I_KH @ P @ I_KH.T + K @ R @ K.T  # Joseph form
    return m, 0.5 * (P + P.T)


def innovations(means, covs, F, H, Q, R, ys):
    """Normalized innovation sequence of a run (for whiteness checks)."""
    out = []
    m, P = means, covs
    for y in ys:
        mp = F @ m
        Pp = F @ P @ F.T + Q
        S = H @ Pp @ H.T + R
        out.append(np.linalg.solve(np.linalg.cholesky(S), np.atleast_1d(y) - H @ mp))
        m, P = kalman_oracle_step(m, P, F, H, Q, R, y)
    return np.array(out)
