"""Two-regime stochastic volatility model with conjugate Gibbs updates.

State equation (regime codes 0/1 stand for regimes 1/2)::

    x_t = gamma[s_t] + phi * (x_{t-1} - gamma[s_{t-1}]) + eta_t,  eta_t ~ N(0, sigma2_eta)
    y_t = exp(x_t / 2) * eps_t,                                   eps_t ~ N(0, 1)
    P(s_t = j | s_{t-1} = i) = pi11 if i == j else 1 - pi11

with fixed initial conditions x_0 = mu, s_0 = regime 1.  Both regimes share the
self-transition probability pi11.

Full conditionals
-----------------
Write z_t = x_{t-1} - gamma[s_{t-1}] and e_t = x_t - gamma[s_t] - phi z_t for
t = 1..T (x_0 = mu, s_0 = 0).  All conditionals below are conjugate:

* phi:  x_t - gamma[s_t] = phi z_t + eta_t, a Gaussian regression on z_t.
* mu:   only t = 1 involves mu: x_1 - gamma[s_1] + phi gamma[0] = phi mu + eta_1.
* gamma_j: x_t - phi x_{t-1} = c_t gamma_j + (other regime terms) + eta_t with
  c_t = [s_t = j] - phi [s_{t-1} = j]; both appearances of gamma_j are kept.
* sigma2_eta: InvGamma(a + T/2, b + sum e_t^2 / 2).
* pi11: Beta(a + #stays, b + #switches), counting the s_0 -> s_1 step.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ParameterDomainError
from ..rng import Stream
from ..ssm import StatePath, StatePoint, check_finite_params, normal_logpdf


@dataclass(frozen=True)
class SvParams:
    gamma1: float
    gamma2: float
    phi: float
    sigma2_eta: float
    mu: float
    pi11: float

    @property
    def gammas(self) -> np.ndarray:
        return np.array([self.gamma1, self.gamma2])


SV_THETA = SvParams(gamma1=-5.0, gamma2=5.0, phi=0.95, sigma2_eta=0.1, mu=1.0, pi11=0.85)


@dataclass(frozen=True)
class SvPriors:
    """Independent priors; Gaussians are parameterized by their variance."""

    gamma1_mean: float = -5.0
    gamma1_var: float = 10.0
    gamma2_mean: float = 5.0
    gamma2_var: float = 10.0
    phi_mean: float = 0.95
    phi_var: float = 1.0
    sigma2_shape: float = 2.01
    sigma2_scale: float = 0.101
    mu_mean: float = 1.0
    mu_var: float = 1.0
    pi11_a: float = 9.9875
    pi11_b: float = 1.7625

    def __post_init__(self):
        for name in ("gamma1_var", "gamma2_var", "phi_var", "sigma2_shape",
                     "sigma2_scale", "mu_var", "pi11_a", "pi11_b"):
            if not getattr(self, name) > 0:
                raise ParameterDomainError(f"{name} must be positive")

    def gamma(self, j: int) -> tuple[float, float]:
        return (self.gamma1_mean, self.gamma1_var) if j == 0 else (self.gamma2_mean, self.gamma2_var)


class SvModel:
    """Regime-switching stochastic volatility model (vectorized)."""

    regime_count = 2

    def validate(self, theta: SvParams) -> None:
        check_finite_params(**vars(theta))
        if not theta.sigma2_eta > 0:
            raise ParameterDomainError(f"sigma2_eta must be > 0, got {theta.sigma2_eta}")
        if not 0.0 < theta.pi11 < 1.0:
            raise ParameterDomainError(f"pi11 must lie in (0, 1), got {theta.pi11}")

    def regime_matrix(self, theta: SvParams) -> np.ndarray:
        p = theta.pi11
        return np.array([[p, 1.0 - p], [1.0 - p, p]])

    def _mean(self, regime, prev_regime, prev_value, theta):
        g = theta.gammas
        return g[regime] + theta.phi * (prev_value - g[prev_regime])

    def transition_logpdf(self, regime, value, prev_regime, prev_value, theta):
        regime = np.asarray(regime)
        prev_regime = np.asarray(prev_regime)
        with np.errstate(divide="ignore"):
            log_p = np.log(self.regime_matrix(theta))
        mean = self._mean(regime, prev_regime, prev_value, theta)
        return normal_logpdf(value, mean, theta.sigma2_eta) + log_p[prev_regime, regime]

    def initial_logpdf(self, regime, value, theta):
        return self.transition_logpdf(regime, value, 0, theta.mu, theta)

    def observation_logpdf(self, y, regime, value, theta):
        value = np.asarray(value, dtype=float)
        return -0.5 * (np.log(2.0 * np.pi) + value + np.asarray(y) ** 2 * np.exp(-value))

    def simulate_transition(self, prev_regime, prev_value, theta, rng: Stream):
        prev_regime = np.asarray(prev_regime, dtype=np.int64).reshape(-1)
        prev_value = np.broadcast_to(np.asarray(prev_value, dtype=float), prev_regime.shape)
        regime = rng.categorical(self.regime_matrix(theta)[prev_regime])
        mean = self._mean(regime, prev_regime, prev_value, theta)
        value = mean + np.sqrt(theta.sigma2_eta) * rng.standard_normal(regime.size)
        return regime, value

    def simulate_initial(self, theta, rng: Stream, size: int):
        return self.simulate_transition(np.zeros(size, dtype=np.int64), theta.mu, theta, rng)

    def simulate_observation(self, regime, value, theta, rng: Stream):
        value = np.asarray(value, dtype=float).reshape(-1)
        return np.exp(value / 2.0) * rng.standard_normal(value.size)


def sv_log_densities(x_t: StatePoint, x_prev: StatePoint, y_t: float, theta: SvParams) -> tuple[float, float]:
    """Transition and observation log densities of one SV step."""
    model = SvModel()
    model.validate(theta)
    trans = model.transition_logpdf(x_t.regime, x_t.value, x_prev.regime, x_prev.value, theta)
    obs = model.observation_logpdf(y_t, x_t.regime, x_t.value, theta)
    return float(trans), float(obs)


# -- full conditionals ---------------------------------------------------------

def _lagged(path: StatePath, theta: SvParams):
    """Current and previous (regime, value) arrays with x_0 = mu, s_0 = 0."""
    s = path.regimes
    x = path.values
    s_prev = np.concatenate(([0], s[:-1]))
    x_prev = np.concatenate(([theta.mu], x[:-1]))
    return s, x, s_prev, x_prev


def _gaussian_posterior(prior_mean, prior_var, design, response, noise_var):
    """Posterior of b in response = design * b + N(0, noise_var), b ~ N(prior)."""
    prec = 1.0 / prior_var + np.dot(design, design) / noise_var
    mean = (prior_mean / prior_var + np.dot(design, response) / noise_var) / prec
    return float(mean), float(1.0 / prec)


def gamma_conditional(j: int, theta: SvParams, path: StatePath, priors: SvPriors):
    s, x, s_prev, x_prev = _lagged(path, theta)
    g = theta.gammas
    other = 1 - j
    coef = (s == j) - theta.phi * (s_prev == j)
    other_part = g[other] * ((s == other) - theta.phi * (s_prev == other))
    resp = x - theta.phi * x_prev - other_part
    return _gaussian_posterior(*priors.gamma(j), coef.astype(float), resp, theta.sigma2_eta)


def phi_conditional(theta: SvParams, path: StatePath, priors: SvPriors):
    s, x, s_prev, x_prev = _lagged(path, theta)
    g = theta.gammas
    z = x_prev - g[s_prev]
    return _gaussian_posterior(priors.phi_mean, priors.phi_var, z, x - g[s], theta.sigma2_eta)


def mu_conditional(theta: SvParams, path: StatePath, priors: SvPriors):
    g = theta.gammas
    s1, x1 = path.regimes[0], path.values[0]
    resp = np.array([x1 - g[s1] + theta.phi * g[0]])
    return _gaussian_posterior(priors.mu_mean, priors.mu_var, np.array([theta.phi]), resp, theta.sigma2_eta)


def sigma2_conditional(theta: SvParams, path: StatePath, priors: SvPriors):
    """(shape, scale) of the inverse-gamma full conditional."""
    s, x, s_prev, x_prev = _lagged(path, theta)
    g = theta.gammas
    resid = x - g[s] - theta.phi * (x_prev - g[s_prev])
    return priors.sigma2_shape + 0.5 * resid.size, priors.sigma2_scale + 0.5 * float(np.dot(resid, resid))


def pi11_conditional(n_stay: int, n_switch: int, priors: SvPriors):
    """(a, b) of the Beta full conditional given pooled regime-transition counts."""
    return priors.pi11_a + n_stay, priors.pi11_b + n_switch


def regime_transition_counts(path: StatePath) -> tuple[int, int]:
    s = path.regimes
    s_prev = np.concatenate(([0], s[:-1]))
    n_stay = int(np.count_nonzero(s == s_prev))
    return n_stay, s.size - n_stay


def sv_gibbs_update(theta: SvParams, path: StatePath, y, priors: SvPriors, rng: Stream) -> SvParams:
    """One systematic-scan Gibbs pass over (gamma1, gamma2, phi, sigma2_eta, mu, pi11).

    The observations do not enter any conditional: given the latent path they
    carry no further information about theta.
    """
    gen = rng.generator
    for j, name in ((0, "gamma1"), (1, "gamma2")):
        m, v = gamma_conditional(j, theta, path, priors)
        theta = replace(theta, **{name: m + np.sqrt(v) * gen.standard_normal()})
    m, v = phi_conditional(theta, path, priors)
    theta = replace(theta, phi=m + np.sqrt(v) * gen.standard_normal())
    a, b = sigma2_conditional(theta, path, priors)
    theta = replace(theta, sigma2_eta=b / gen.gamma(a))
    m, v = mu_conditional(theta, path, priors)
    theta = replace(theta, mu=m + np.sqrt(v) * gen.standard_normal())
    a, b = pi11_conditional(*regime_transition_counts(path), priors)
    theta = replace(theta, pi11=gen.beta(a, b))
    return theta


class SvGibbsUpdater:
    """Parameter updater for the samplers: ``updater(theta, path, y, rng)``."""

    def __init__(self, priors: SvPriors | None = None):
        self.priors = priors or SvPriors()

    def __call__(self, theta, path, y, rng):
        return sv_gibbs_update(theta, path, y, self.priors, rng)
