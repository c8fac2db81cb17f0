"""Finite-state HMM embedded in the (regime, value) state contract.

The hidden state lives entirely in the regime component.  The continuous
component is an independent Uniform[0, 1) nuisance variable: it has no effect
on the observations, so every posterior over regime paths is exactly
computable, while continuous-valued proposals (including the grid proposal on
a single finite cell spanning [0, 1)) remain usable on this model.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..errors import ParameterDomainError
from ..ssm import ObservationSeries, normal_logpdf


@dataclass(frozen=True, eq=False)
class DiscreteHmmSpec:
    """K-state HMM with Gaussian emissions N(obs_means[k], obs_vars[k])."""

    initial: np.ndarray
    transition: np.ndarray
    obs_means: np.ndarray
    obs_vars: np.ndarray

    def __post_init__(self):
        for name in ("initial", "transition", "obs_means", "obs_vars"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        K = self.initial.size
        if self.transition.shape != (K, K) or self.obs_means.shape != (K,) or self.obs_vars.shape != (K,):
            raise ParameterDomainError("inconsistent HMM dimensions")
        if np.any(self.initial < 0) or not np.isclose(self.initial.sum(), 1.0):
            raise ParameterDomainError("initial must be a probability vector")
        if np.any(self.transition < 0) or not np.allclose(self.transition.sum(axis=1), 1.0):
            raise ParameterDomainError("transition rows must be probability vectors")
        if np.any(self.obs_vars <= 0):
            raise ParameterDomainError("emission variances must be positive")

    @property
    def K(self) -> int:
        return self.initial.size

    def log_emissions(self, y) -> np.ndarray:
        """(T, K) array of log p(y_t | state k)."""
        y = y.values if isinstance(y, ObservationSeries) else np.asarray(y, dtype=float)
        return normal_logpdf(y[:, None], self.obs_means[None, :], self.obs_vars[None, :])


class DiscreteHmmModel:
    """Model wrapper; theta is a :class:`DiscreteHmmSpec`."""

    def __init__(self, K: int):
        self.regime_count = K

    def validate(self, theta: DiscreteHmmSpec) -> None:
        if theta.K != self.regime_count:
            raise ParameterDomainError("spec size does not match the model")

    def regime_matrix(self, theta):
        return theta.transition

    @staticmethod
    def _value_term(value):
        value = np.asarray(value, dtype=float)
        return np.where((value >= 0.0) & (value < 1.0), 0.0, -np.inf)

    def initial_logpdf(self, regime, value, theta):
        with np.errstate(divide="ignore"):
            return np.log(theta.initial)[regime] + self._value_term(value)

    def transition_logpdf(self, regime, value, prev_regime, prev_value, theta):
        with np.errstate(divide="ignore"):
            return np.log(theta.transition)[prev_regime, regime] + self._value_term(value)

    def observation_logpdf(self, y, regime, value, theta):
        return normal_logpdf(y, theta.obs_means[regime], theta.obs_vars[regime])

    def simulate_initial(self, theta, rng, size):
        regime = rng.categorical(theta.initial, size=size)
        return regime, rng.random(size)

    def simulate_transition(self, prev_regime, prev_value, theta, rng):
        prev_regime = np.asarray(prev_regime, dtype=np.int64).reshape(-1)
        regime = rng.categorical(theta.transition[prev_regime])
        return regime, rng.random(regime.size)

    def simulate_observation(self, regime, value, theta, rng):
        regime = np.asarray(regime, dtype=np.int64).reshape(-1)
        return theta.obs_means[regime] + np.sqrt(theta.obs_vars[regime]) * rng.standard_normal(regime.size)


@dataclass(frozen=True)
class ForwardBackwardResult:
    filtering: np.ndarray  # (T, K)
    smoothing: np.ndarray  # (T, K)
    log_evidence: float


def hmm_forward_backward(spec: DiscreteHmmSpec, y) -> ForwardBackwardResult:
    """Exact filtering/smoothing marginals in log space."""
    log_b = spec.log_emissions(y)
    T, K = log_b.shape
    with np.errstate(divide="ignore"):
        log_a = np.log(spec.transition)
        log_init = np.log(spec.initial)
    log_alpha = np.empty((T, K))
    log_alpha[0] = log_init + log_b[0]
    for t in range(1, T):
        log_alpha[t] = logsumexp(log_alpha[t - 1][:, None] + log_a, axis=0) + log_b[t]
    log_z = float(logsumexp(log_alpha[-1]))
    log_beta = np.zeros((T, K))
    for t in range(T - 2, -1, -1):
        log_beta[t] = logsumexp(log_a + (log_b[t + 1] + log_beta[t + 1])[None, :], axis=1)
    filt = np.exp(log_alpha - logsumexp(log_alpha, axis=1, keepdims=True))
    smooth = np.exp(log_alpha + log_beta - log_z)
    return ForwardBackwardResult(filt, smooth / smooth.sum(axis=1, keepdims=True), log_z)


def enumerate_small_posterior(spec: DiscreteHmmSpec, y, max_paths: int = 10_000) -> dict[tuple[int, ...], float]:
    """Exact posterior probability of every regime path (brute force)."""
    log_b = spec.log_emissions(y)
    T, K = log_b.shape
    if K ** T > max_paths:
        raise ValueError(f"{K}^{T} paths exceed the enumeration limit {max_paths}")
    with np.errstate(divide="ignore"):
        log_a = np.log(spec.transition)
        log_init = np.log(spec.initial)
    paths = list(itertools.product(range(K), repeat=T))
    logp = np.empty(len(paths))
    for i, path in enumerate(paths):
        lp = log_init[path[0]] + log_b[0, path[0]]
        for t in range(1, T):
            lp += log_a[path[t - 1], path[t]] + log_b[t, path[t]]
        logp[i] = lp
    probs = np.exp(logp - logsumexp(logp))
    return dict(zip(paths, probs))
