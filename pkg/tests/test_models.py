from dataclasses import replace

import numpy as np
import pytest
from scipy import stats
from scipy.stats import multivariate_normal

from gpgas.errors import ParameterDomainError
from gpgas.models import (
    DiscreteHmmSpec,
    KalmanModelSpec,
    SV_THETA,
    SvGibbsUpdater,
    SvParams,
    SvPriors,
    enumerate_small_posterior,
    hmm_forward_backward,
    kalman_smoother,
    sv_gibbs_update,
)
from gpgas.models.sv import (
    gamma_conditional,
    mu_conditional,
    phi_conditional,
    pi11_conditional,
    regime_transition_counts,
    sigma2_conditional,
)
from gpgas.rng import Stream
from gpgas.ssm import StatePath


def test_default_pi11_prior_moments():
    p = SvPriors()
    dist = stats.beta(p.pi11_a, p.pi11_b)
    assert dist.mean() == pytest.approx(0.85, abs=1e-12)
    assert dist.var() == pytest.approx(0.01, abs=1e-4)


def test_regime_counts_include_first_step():
    path = StatePath([1, 1, 0, 0, 0], np.zeros(5))
    assert regime_transition_counts(path) == (3, 2)


def test_pi11_conditional_without_switches_is_prior_plus_counts():
    priors = SvPriors()
    a, b = pi11_conditional(*regime_transition_counts(StatePath(np.zeros(100, int), np.zeros(100))), priors)
    assert (a, b) == (priors.pi11_a + 100, priors.pi11_b)


def _sv_path(seed=2, T=200, theta=SV_THETA):
    from gpgas.models import SvModel
    from gpgas.ssm import simulate_dataset

    return simulate_dataset(SvModel(), theta, T, seed)[0]


def _brute_gaussian_conditional(logdens, grid):
    lp = np.array([logdens(v) for v in grid])
    w = np.exp(lp - lp.max())
    w /= np.trapezoid(w, grid)
    mean = np.trapezoid(grid * w, grid)
    var = np.trapezoid((grid - mean) ** 2 * w, grid)
    return mean, var


def _sv_log_joint_states(theta, path, priors, which):
    """Log of prior(which) * p(path | theta), up to a constant."""
    from gpgas.models import SvModel

    model = SvModel()
    s_prev = np.concatenate(([0], path.regimes[:-1]))
    x_prev = np.concatenate(([theta.mu], path.values[:-1]))
    ll = float(np.sum(model.transition_logpdf(path.regimes, path.values, s_prev, x_prev, theta)))
    m, v = {
        "gamma1": (priors.gamma1_mean, priors.gamma1_var),
        "gamma2": (priors.gamma2_mean, priors.gamma2_var),
        "phi": (priors.phi_mean, priors.phi_var),
        "mu": (priors.mu_mean, priors.mu_var),
    }[which]
    return ll + stats.norm.logpdf(getattr(theta, which), m, np.sqrt(v))


@pytest.mark.parametrize("which,fn", [
    ("gamma1", lambda th, p, pr: gamma_conditional(0, th, p, pr)),
    ("gamma2", lambda th, p, pr: gamma_conditional(1, th, p, pr)),
    ("phi", phi_conditional),
    ("mu", mu_conditional),
])
def test_gaussian_conditionals_match_numerical_posterior(which, fn):
    priors = SvPriors()
    path = _sv_path()
    theta = replace(SV_THETA, phi=0.9, gamma1=-4.5)
    mean, var = fn(theta, path, priors)
    lo, hi = mean - 12 * np.sqrt(var), mean + 12 * np.sqrt(var)
    grid = np.linspace(lo, hi, 4001)
    bm, bv = _brute_gaussian_conditional(
        lambda v: _sv_log_joint_states(replace(theta, **{which: v}), path, priors, which), grid)
    assert mean == pytest.approx(bm, abs=1e-6 * max(1, abs(bm)))
    assert var == pytest.approx(bv, rel=1e-4)


def test_sigma2_conditional_is_conjugate():
    priors = SvPriors()
    path = _sv_path()
    shape, scale = sigma2_conditional(SV_THETA, path, priors)
    assert shape == pytest.approx(priors.sigma2_shape + len(path) / 2)
    grid = np.linspace(0.02, 0.4, 6001)

    def logdens(v):
        th = replace(SV_THETA, sigma2_eta=v)
        from gpgas.models import SvModel
        s_prev = np.concatenate(([0], path.regimes[:-1]))
        x_prev = np.concatenate(([th.mu], path.values[:-1]))
        ll = float(np.sum(SvModel().transition_logpdf(path.regimes, path.values, s_prev, x_prev, th)))
        return ll + stats.invgamma.logpdf(v, priors.sigma2_shape, scale=priors.sigma2_scale)

    bm, _ = _brute_gaussian_conditional(logdens, grid)
    assert stats.invgamma(shape, scale=scale).mean() == pytest.approx(bm, rel=1e-4)


def test_gibbs_pi11_with_no_counts_draws_from_prior():
    priors = SvPriors()
    a, b = pi11_conditional(0, 0, priors)
    gen = np.random.default_rng(0)
    draws = gen.beta(a, b, size=20000)
    assert stats.kstest(draws, stats.beta(priors.pi11_a, priors.pi11_b).cdf).pvalue > 1e-3


def test_gibbs_update_keeps_domain_and_is_deterministic():
    path = _sv_path()
    updater = SvGibbsUpdater()
    a = updater(SV_THETA, path, None, Stream(3))
    b = updater(SV_THETA, path, None, Stream(3))
    assert a == b
    assert a.sigma2_eta > 0 and 0 < a.pi11 < 1


def test_gibbs_update_concentrates_near_truth_on_long_path():
    path = _sv_path(T=3000, seed=5)
    rng = Stream(1)
    theta = SV_THETA
    draws = []
    for _ in range(300):
        theta = sv_gibbs_update(theta, path, None, SvPriors(), rng)
        draws.append(theta)
    phi = np.mean([d.phi for d in draws[50:]])
    s2 = np.mean([d.sigma2_eta for d in draws[50:]])
    p11 = np.mean([d.pi11 for d in draws[50:]])
    assert abs(phi - 0.95) < 0.03
    assert abs(s2 - 0.1) < 0.02
    assert abs(p11 - 0.85) < 0.03


def test_gibbs_conditional_draws_pass_ks():
    # the phi draw given everything else must follow the Gaussian full conditional
    priors = SvPriors()
    path = _sv_path()
    m, v = phi_conditional(SV_THETA, path, priors)
    rng = Stream(0)
    draws = [m + np.sqrt(v) * rng.generator.standard_normal() for _ in range(5000)]
    assert stats.kstest(draws, stats.norm(m, np.sqrt(v)).cdf).pvalue > 1e-3


def test_invalid_priors_rejected():
    with pytest.raises(ParameterDomainError):
        SvPriors(phi_var=0.0)
    with pytest.raises(ParameterDomainError):
        KalmanModelSpec(q=-1.0)


# -- Kalman ---------------------------------------------------------------------

def _dense_gaussian(spec, y):
    """Joint Gaussian of (x, y) and exact conditional moments of x given y."""
    T = len(y)
    # x = L e with the AR(1) recursion
    cov = np.empty((T, T))
    var = np.empty(T)
    var[0] = spec.p0
    for t in range(1, T):
        var[t] = spec.a ** 2 * var[t - 1] + spec.q
    for i in range(T):
        for j in range(T):
            lo, hi = min(i, j), max(i, j)
            cov[i, j] = spec.a ** (hi - lo) * var[lo]
    mean = spec.m0 * spec.a ** np.arange(T)
    syy = spec.c ** 2 * cov + spec.r * np.eye(T)
    sxy = spec.c * cov
    gain = np.linalg.solve(syy, sxy.T).T
    post_mean = mean + gain @ (np.asarray(y) - spec.c * mean)
    post_cov = cov - gain @ sxy.T
    evidence = multivariate_normal(spec.c * mean, syy).logpdf(y)
    return post_mean, np.diag(post_cov), evidence


@pytest.mark.parametrize("spec", [KalmanModelSpec(), KalmanModelSpec(0.5, 2.0, 1.5, 0.3, 1.0, 4.0)])
def test_kalman_matches_dense_gaussian(spec):
    y = np.random.default_rng(0).normal(size=30)
    res = kalman_smoother(spec, y)
    m, v, ev = _dense_gaussian(spec, y)
    np.testing.assert_allclose(res.smooth_means, m, atol=1e-9)
    np.testing.assert_allclose(res.smooth_vars, v, atol=1e-9)
    assert res.log_evidence == pytest.approx(ev, abs=1e-8)
    # last filtering moment equals the smoothing one
    assert res.filter_means[-1] == pytest.approx(res.smooth_means[-1])


# -- discrete HMM ------------------------------------------------------------------

def test_forward_backward_matches_enumeration(hmm3):
    _, spec, y = hmm3
    y_short = y.values[:7]
    post = enumerate_small_posterior(spec, y_short)
    fb = hmm_forward_backward(spec, y_short)
    marg = np.zeros((7, spec.K))
    for path, p in post.items():
        for t, k in enumerate(path):
            marg[t, k] += p
    np.testing.assert_allclose(fb.smoothing, marg, atol=1e-12)


def test_enumeration_two_state_example(hmm2):
    _, spec, y = hmm2
    post = enumerate_small_posterior(spec, y.values)
    assert len(post) == 8
    assert sum(post.values()) == pytest.approx(1.0, abs=1e-14)
    # brute force by hand
    logb = spec.log_emissions(y.values)
    raw = {}
    for path in post:
        p = spec.initial[path[0]] * np.exp(logb[0, path[0]])
        for t in (1, 2):
            p *= spec.transition[path[t - 1], path[t]] * np.exp(logb[t, path[t]])
        raw[path] = p
    z = sum(raw.values())
    for path, p in post.items():
        assert p == pytest.approx(raw[path] / z, abs=1e-14)


def test_enumeration_refuses_large_problems(hmm3):
    _, spec, y = hmm3
    with pytest.raises(ValueError):
        enumerate_small_posterior(spec, y.values)


def test_discrete_spec_validation():
    with pytest.raises(ParameterDomainError):
        DiscreteHmmSpec([0.5, 0.6], [[1, 0], [0, 1]], [0, 0], [1, 1])
    with pytest.raises(ParameterDomainError):
        DiscreteHmmSpec([0.5, 0.5], [[1, 0], [0, 1]], [0, 0], [1, -1])


# -- quadrature audit of every full conditional --------------------------------------------

def _quadrature_cdf(logdens, grid):
    lp = np.array([logdens(v) for v in grid])
    w = np.exp(lp - lp.max())
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(grid))))
    return lambda x: np.interp(x, grid, cdf / cdf[-1])


def _fixture(seed):
    g = np.random.default_rng(100 + seed)
    theta = SvParams(g.normal(-5, 0.5), g.normal(5, 0.5), g.uniform(0.8, 0.97), g.uniform(0.05, 0.3),
                     g.normal(1, 0.5), g.uniform(0.7, 0.95))
    return theta, _sv_path(seed=seed, T=int(g.integers(30, 150)), theta=theta)


def _log_joint(theta, path, priors):
    from gpgas.models import SvModel

    s_prev = np.concatenate(([0], path.regimes[:-1]))
    x_prev = np.concatenate(([theta.mu], path.values[:-1]))
    lp = float(np.sum(SvModel().transition_logpdf(path.regimes, path.values, s_prev, x_prev, theta)))
    lp += stats.norm.logpdf(theta.gamma1, priors.gamma1_mean, np.sqrt(priors.gamma1_var))
    lp += stats.norm.logpdf(theta.gamma2, priors.gamma2_mean, np.sqrt(priors.gamma2_var))
    lp += stats.norm.logpdf(theta.phi, priors.phi_mean, np.sqrt(priors.phi_var))
    lp += stats.norm.logpdf(theta.mu, priors.mu_mean, np.sqrt(priors.mu_var))
    lp += stats.invgamma.logpdf(theta.sigma2_eta, priors.sigma2_shape, scale=priors.sigma2_scale)
    lp += stats.beta.logpdf(theta.pi11, priors.pi11_a, priors.pi11_b)
    return lp


def _conditional_draws(name, theta, path, priors, gen, n):
    if name in ("gamma1", "gamma2", "phi", "mu"):
        fn = {"gamma1": lambda: gamma_conditional(0, theta, path, priors),
              "gamma2": lambda: gamma_conditional(1, theta, path, priors),
              "phi": lambda: phi_conditional(theta, path, priors),
              "mu": lambda: mu_conditional(theta, path, priors)}[name]
        m, v = fn()
        return m + np.sqrt(v) * gen.standard_normal(n), m, np.sqrt(v)
    if name == "sigma2_eta":
        a, b = sigma2_conditional(theta, path, priors)
        d = b / gen.gamma(a, size=n)
        return d, d.mean(), d.std()
    a, b = pi11_conditional(*regime_transition_counts(path), priors)
    d = gen.beta(a, b, size=n)
    return d, d.mean(), d.std()


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("name", ["gamma1", "gamma2", "phi", "sigma2_eta", "mu", "pi11"])
def test_full_conditionals_match_quadrature(seed, name):
    priors = SvPriors()
    theta, path = _fixture(seed)
    draws, centre, spread = _conditional_draws(name, theta, path, priors, np.random.default_rng(seed), 10_000)
    lo, hi = centre - 10 * spread, centre + 10 * spread
    if name == "sigma2_eta":
        lo = max(lo, 1e-6)
    if name == "pi11":
        lo, hi = max(lo, 1e-9), min(hi, 1 - 1e-9)
    grid = np.linspace(lo, hi, 2001)
    cdf = _quadrature_cdf(lambda v: _log_joint(replace(theta, **{name: v}), path, priors), grid)
    assert stats.kstest(draws, cdf).statistic < 0.02


@pytest.mark.parametrize("name", ["gamma1", "pi11"])
def test_gibbs_sweep_draws_first_and_last_conditionals(name):
    # gamma1 is drawn first and pi11 depends only on the path, so their sweep draws are exact conditional draws
    priors = SvPriors()
    theta, path = _fixture(0)
    rng = Stream(0)
    draws = np.array([getattr(sv_gibbs_update(theta, path, None, priors, rng), name) for _ in range(10_000)])
    ref, _, _ = _conditional_draws(name, theta, path, priors, np.random.default_rng(1), 100_000)
    assert stats.ks_2samp(draws, ref).statistic < 0.02


# -- oracle edge cases ---------------------------------------------------------------------

def test_kalman_zero_noise_limit_recovers_observations():
    spec = KalmanModelSpec(a=0.7, q=1.0, c=2.0, r=1e-12, m0=0.0, p0=1.0)
    y = np.array([0.4, -1.0, 2.2, 0.1])
    np.testing.assert_allclose(kalman_smoother(spec, y).smooth_means, y / 2.0, atol=1e-9)


def test_kalman_single_step_is_bayes_update():
    spec = KalmanModelSpec(a=0.5, q=1.0, c=1.5, r=0.4, m0=0.3, p0=2.0)
    res = kalman_smoother(spec, [1.1])
    prec = 1 / 2.0 + 1.5 ** 2 / 0.4
    assert res.smooth_vars[0] == pytest.approx(1 / prec)
    assert res.smooth_means[0] == pytest.approx((0.3 / 2.0 + 1.5 * 1.1 / 0.4) / prec)


def test_forward_backward_uniform_when_uninformative():
    spec = DiscreteHmmSpec([1 / 3] * 3, np.eye(3), [0.0] * 3, [1.0] * 3)
    fb = hmm_forward_backward(spec, np.array([0.2, -1.0, 3.0, 0.5]))
    np.testing.assert_allclose(fb.smoothing, 1 / 3, atol=1e-14)


def test_log_evidence_shifts_with_likelihood_scale():
    # scaling every observation density by c shifts log-evidence by T log c; rescaling y by c does exactly that
    spec = DiscreteHmmSpec([0.4, 0.6], [[0.9, 0.1], [0.3, 0.7]], [-1.0, 1.0], [1.0, 1.0])
    scaled = DiscreteHmmSpec(spec.initial, spec.transition, [-2.0, 2.0], [4.0, 4.0])
    y = np.array([0.3, -0.2, 1.5, 0.9])
    a = hmm_forward_backward(spec, y)
    b = hmm_forward_backward(scaled, 2 * y)
    assert b.log_evidence == pytest.approx(a.log_evidence - y.size * np.log(2.0), abs=1e-12)
    np.testing.assert_allclose(a.smoothing, b.smoothing, atol=1e-12)


def test_deterministic_chain_enumerates_to_point_mass():
    spec = DiscreteHmmSpec([0.0, 1.0, 0.0], [[0, 1, 0], [0, 0, 1], [1, 0, 0]], [0.0] * 3, [1.0] * 3)
    post = enumerate_small_posterior(spec, np.zeros(4))
    assert post[(1, 2, 0, 1)] == pytest.approx(1.0)
    assert sum(post.values()) == pytest.approx(1.0)
