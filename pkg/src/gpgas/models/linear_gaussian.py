"""Scalar linear-Gaussian model and its exact Kalman/RTS oracle.

    x_1 ~ N(m0, p0),  x_t = a x_{t-1} + N(0, q),  y_t = c x_t + N(0, r)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterDomainError
from ..ssm import ObservationSeries, check_finite_params, normal_logpdf


@dataclass(frozen=True)
class KalmanModelSpec:
    a: float = 0.9
    q: float = 0.5
    c: float = 1.0
    r: float = 1.0
    m0: float = 0.0
    p0: float = 1.0

    def __post_init__(self):
        check_finite_params(**vars(self))
        for name in ("q", "r", "p0"):
            if not getattr(self, name) > 0:
                raise ParameterDomainError(f"{name} must be > 0")


class LinearGaussianModel:
    """Single-regime model; theta is a :class:`KalmanModelSpec`."""

    regime_count = 1

    def validate(self, theta: KalmanModelSpec) -> None:
        if not isinstance(theta, KalmanModelSpec):
            raise ParameterDomainError("theta must be a KalmanModelSpec")

    def regime_matrix(self, theta):
        return None

    @staticmethod
    def _regime_term(regime):
        return np.where(np.asarray(regime) == 0, 0.0, -np.inf)

    def initial_logpdf(self, regime, value, theta):
        return normal_logpdf(value, theta.m0, theta.p0) + self._regime_term(regime)

    def transition_logpdf(self, regime, value, prev_regime, prev_value, theta):
        return normal_logpdf(value, theta.a * np.asarray(prev_value), theta.q) + self._regime_term(regime)

    def observation_logpdf(self, y, regime, value, theta):
        return normal_logpdf(y, theta.c * np.asarray(value), theta.r)

    def simulate_initial(self, theta, rng, size):
        value = theta.m0 + np.sqrt(theta.p0) * rng.standard_normal(size)
        return np.zeros(size, dtype=np.int64), value

    def simulate_transition(self, prev_regime, prev_value, theta, rng):
        prev_value = np.asarray(prev_value, dtype=float).reshape(-1)
        value = theta.a * prev_value + np.sqrt(theta.q) * rng.standard_normal(prev_value.size)
        return np.zeros(prev_value.size, dtype=np.int64), value

    def simulate_observation(self, regime, value, theta, rng):
        value = np.asarray(value, dtype=float).reshape(-1)
        return theta.c * value + np.sqrt(theta.r) * rng.standard_normal(value.size)


@dataclass(frozen=True)
class KalmanResult:
    filter_means: np.ndarray
    filter_vars: np.ndarray
    smooth_means: np.ndarray
    smooth_vars: np.ndarray
    log_evidence: float


def kalman_smoother(spec: KalmanModelSpec, y) -> KalmanResult:
    """Kalman filter followed by the Rauch-Tung-Striebel backward pass."""
    y = y.values if isinstance(y, ObservationSeries) else np.asarray(y, dtype=float)
    T = y.size
    a, q, c, r = spec.a, spec.q, spec.c, spec.r
    mf = np.empty(T)
    pf = np.empty(T)
    mp = np.empty(T)  # one-step predictions
    pp = np.empty(T)
    loglik = 0.0
    m, p = spec.m0, spec.p0
    for t in range(T):
        if t > 0:
            m, p = a * mf[t - 1], a * a * pf[t - 1] + q
        mp[t], pp[t] = m, p
        s = c * c * p + r
        k = p * c / s
        loglik += float(normal_logpdf(y[t], c * m, s))
        mf[t] = m + k * (y[t] - c * m)
        pf[t] = (1.0 - k * c) * p
    ms = mf.copy()
    ps = pf.copy()
    for t in range(T - 2, -1, -1):
        g = pf[t] * a / pp[t + 1]
        ms[t] = mf[t] + g * (ms[t + 1] - mp[t + 1])
        ps[t] = pf[t] + g * g * (ps[t + 1] - pp[t + 1])
    return KalmanResult(mf, pf, ms, ps, loglik)
