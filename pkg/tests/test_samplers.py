import numpy as np
import pytest
from scipy import stats

from gpgas.bench.metrics import batch_means_stderr
from gpgas.errors import ConfigurationError, DegenerateWeightsError, InitializationError
from gpgas.grid import FreezePolicy, approx_hmm, build_grid
from gpgas.models import (
    DiscreteHmmSpec,
    SV_THETA,
    SvGibbsUpdater,
    enumerate_small_posterior,
    kalman_smoother,
)
from gpgas.rng import Stream, enumerate_outcomes
from gpgas.samplers import (
    GridConfig,
    SamplerConfig,
    fixed_parameters,
    gpgas_run,
    gpgas_sweep,
    pg_run,
    pg_sweep,
    pgas_run,
    pgas_sweep,
    run_sampler,
    sample_trajectory,
)
from gpgas.smc import BootstrapProposal, ParticleSystem, ProposalDraw, smc_run
from gpgas.ssm import StatePath


# -- trajectory draw ----------------------------------------------------------------

def _system(lg_fixture, M=10, seed=0):
    model, spec, y = lg_fixture
    return smc_run(model, BootstrapProposal(model), y, spec, M, 0.5, Stream(seed))


def _with_final_weights(system, logw):
    lw = system.log_weights.copy()
    lw[-1] = logw
    return ParticleSystem(system.regimes, system.values, system.ancestors, lw, system.ess,
                          system.resampled, system.ancestor_switched)


def test_point_mass_selects_that_trajectory(lg):
    sys = _system(lg)
    logw = np.full(10, -np.inf)
    logw[3] = 0.0
    path = sample_trajectory(_with_final_weights(sys, logw), Stream(0))
    assert path.same_as(sys.trajectory(3))


def test_uniform_weights_select_uniformly(lg):
    sys = _with_final_weights(_system(lg), np.zeros(10))
    rng = Stream(1)
    last = sys.values[-1]
    assert np.unique(last).size == 10
    picks = [int(np.flatnonzero(last == sample_trajectory(sys, rng).values[-1])[0]) for _ in range(100_000)]
    assert stats.chisquare(np.bincount(picks, minlength=10)).pvalue > 1e-3


def test_degenerate_final_weights_raise(lg):
    sys = _with_final_weights(_system(lg), np.full(10, -np.inf))
    with pytest.raises(DegenerateWeightsError):
        sample_trajectory(sys, Stream(0))


def test_ancestry_matches_full_copy_storage(lg):
    sys = _system(lg, M=8, seed=4)
    paths = [[v] for v in sys.values[0]]
    for t in range(1, sys.T):
        paths = [paths[a] + [sys.values[t, m]] for m, a in enumerate(sys.ancestors[t])]
    for m in range(8):
        np.testing.assert_array_equal(sys.trajectory(m).values, paths[m])


# -- degenerate and forced-failure cases ------------------------------------------------

@pytest.mark.parametrize("sweep", [pg_sweep, pgas_sweep])
def test_single_particle_never_moves(sv_data, sweep):
    model, theta, path, y = sv_data
    ref = path
    for s in range(5):
        new, _ = sweep(model, BootstrapProposal(model), y, theta, 1, 0.25, Stream(s), ref)
        assert new.same_as(ref)
        ref = new


def test_single_particle_gpgas_never_moves(sv_data):
    model, theta, path, y = sv_data
    hmm = approx_hmm(build_grid(-12, 12, 10), theta, model, y)
    new, _, _ = gpgas_sweep(model, hmm, y, theta, 1, 0.25, Stream(0), path)
    assert new.same_as(path)


class ImpossibleProposal:
    """Proposes values where the discrete test model has zero density."""

    def __init__(self, model):
        self.model = model

    def propose_initial(self, y, theta, rng, size):
        return ProposalDraw(np.zeros(size, dtype=np.int64), np.full(size, 5.0), np.zeros(size))

    def propose_step(self, t, y, parent_regime, parent_value, parent_cell, theta, rng):
        n = np.size(parent_regime)
        return ProposalDraw(np.zeros(n, dtype=np.int64), np.full(n, 5.0), np.zeros(n))

    def initial_logq(self, y, regime, value, theta):
        return np.zeros(np.size(regime)), None

    def step_logq(self, t, y, parent_regime, parent_value, parent_cell, regime, value, theta):
        return np.zeros(np.size(regime)), None


@pytest.mark.parametrize("sweep", [pg_sweep, pgas_sweep])
def test_reference_survives_impossible_proposals(hmm3, sweep):
    model, spec, y = hmm3
    ref = StatePath(np.arange(len(y)) % 3, np.full(len(y), 0.25))
    new, system = sweep(model, ImpossibleProposal(model), y, spec, 20, 0.5, Stream(0), ref)
    assert new.same_as(ref)
    assert np.all(system.log_weights[:, :-1] == -np.inf)


# -- stationarity on a small discrete model -----------------------------------------------

def _enumerated_tv(hmm2, kernel):
    model, spec, y = hmm2
    post = enumerate_small_posterior(spec, y.values)
    out = dict.fromkeys(post, 0.0)
    for path, p in post.items():
        ref = StatePath(list(path), [0.5] * len(y))
        for w, res in enumerate_outcomes(lambda s: tuple(kernel(model, spec, y, ref, s).regimes)):
            out[res] += p * w
    return 0.5 * sum(abs(out[k] - post[k]) for k in post)


@pytest.mark.parametrize("psi", [1.0, 0.6])
@pytest.mark.parametrize("kind", ["PG", "PGAS", "GPGAS"])
def test_one_sweep_leaves_posterior_invariant(hmm2, kind, psi):
    def kernel(model, spec, y, ref, s):
        if kind == "PG":
            return pg_sweep(model, BootstrapProposal(model), y, spec, 2, psi, s, ref)[0]
        if kind == "PGAS":
            return pgas_sweep(model, BootstrapProposal(model), y, spec, 2, psi, s, ref)[0]
        hmm = approx_hmm(build_grid(0, 1, 3), spec, model, y)
        return gpgas_sweep(model, hmm, y, spec, 2, psi, s, ref)[0]

    assert _enumerated_tv(hmm2, kernel) < 1e-10


# -- drivers --------------------------------------------------------------------------------

def test_sampler_config_validation():
    for kwargs in ({"M": 1, "S": 5}, {"M": 5, "S": 0}, {"M": 5, "S": 5, "psi": 0.0},
                   {"M": 5, "S": 5, "psi": 1.5}, {"M": 5, "S": 5, "kind": "SMC"},
                   {"M": 5, "S": 5, "kind": "GPGAS"}, {"M": 5, "S": 5, "as_mode": "always"}):
        with pytest.raises(ConfigurationError):
            SamplerConfig(**kwargs)
    with pytest.raises(ConfigurationError):
        GridConfig(eps=0.0)
    with pytest.raises(ConfigurationError):
        GridConfig(N=2)


def test_bad_initial_path_rejected(sv_data):
    model, theta, path, y = sv_data
    cfg = SamplerConfig(M=5, S=2)
    with pytest.raises(InitializationError):
        pgas_run(model, None, fixed_parameters, y, cfg, theta, StatePath([0], [0.0]))


def test_zero_density_initial_path_rejected(hmm3):
    model, spec, y = hmm3
    with pytest.raises(InitializationError):
        pg_run(model, None, fixed_parameters, y, SamplerConfig(M=5, S=2), spec,
               StatePath(np.zeros(len(y), int), np.full(len(y), 3.0)))


@pytest.mark.parametrize("kind", ["PG", "PGAS", "GPGAS"])
def test_identical_configs_give_identical_chains(sv_data, kind):
    model, theta, path, y = sv_data
    cfg = SamplerConfig(M=10, S=15, psi=0.25, seed=3, kind=kind, grid=GridConfig(N=10) if kind == "GPGAS" else None)
    a = run_sampler(model, SvGibbsUpdater(), y, cfg, theta)
    b = run_sampler(model, SvGibbsUpdater(), y, cfg, theta)
    assert a.thetas == b.thetas
    assert a.values.tobytes() == b.values.tobytes() and np.array_equal(a.regimes, b.regimes)
    for name in ("ess", "resampled", "ancestor_switched", "not_updated", "row_builds", "matrix_builds"):
        assert np.array_equal(getattr(a.diagnostics, name), getattr(b.diagnostics, name))


def test_diagnostics_conserve_state_counts(sv_data):
    model, theta, path, y = sv_data
    cfg = SamplerConfig(M=10, S=20, kind="PGAS")
    chain = run_sampler(model, SvGibbsUpdater(), y, cfg, theta, x0=path)
    d = chain.diagnostics
    T = len(y)
    prev_r = np.vstack([path.regimes, chain.regimes[:-1]])
    prev_v = np.vstack([path.values, chain.values[:-1]])
    same = ((chain.regimes == prev_r) & (chain.values == prev_v)).sum(axis=1)
    np.testing.assert_array_equal(d.not_updated, same)
    updated = ((chain.regimes != prev_r) | (chain.values != prev_v)).sum(axis=1)
    np.testing.assert_array_equal(updated + d.not_updated, T)
    assert d.ess.shape == (20, T) and np.all((d.ess >= 1 - 1e-9) & (d.ess <= 10 + 1e-9))
    assert len(chain.thetas) == chain.S == 20
    assert np.all(d.wallclock > 0)


@pytest.mark.parametrize("s_tilde,window", [(3, 2), (0, 1), (9, 10)])
def test_matrix_build_counter_follows_freeze(sv_data, s_tilde, window):
    model, theta, path, y = sv_data
    S = 10
    cfg = SamplerConfig(M=5, S=S, kind="GPGAS", grid=GridConfig(N=10), freeze=FreezePolicy(s_tilde, window))
    chain = gpgas_run(model, SvGibbsUpdater(), y, cfg, theta, x0=path)
    builds = np.cumsum(chain.diagnostics.matrix_builds)
    np.testing.assert_array_equal(builds, np.minimum(np.arange(1, S + 1), s_tilde + 1))
    assert np.all(chain.diagnostics.row_builds > 0)


def test_gpgas_without_freeze_rebuilds_every_iteration(sv_data):
    model, theta, path, y = sv_data
    cfg = SamplerConfig(M=5, S=4, kind="GPGAS", grid=GridConfig(N=10))
    chain = gpgas_run(model, SvGibbsUpdater(), y, cfg, theta, x0=path)
    assert chain.diagnostics.matrix_builds.tolist() == [1, 1, 1, 1]


def test_ancestor_sampling_updates_more_states_than_pg(sv_data):
    model, theta, path, y = sv_data
    rates = {"PG": [], "PGAS": []}
    for seed in range(10):
        for kind in rates:
            cfg = SamplerConfig(M=10, S=30, psi=0.25, seed=seed, kind=kind)
            chain = run_sampler(model, fixed_parameters, y, cfg, theta, x0=path)
            rates[kind].append(chain.diagnostics.not_updated_rate())
    assert np.mean(rates["PGAS"]) <= np.mean(rates["PG"])


# -- smoothing oracle --------------------------------------------------------------------------

def _check_against_rts(chain, spec, y, warmup=500):
    rts = kalman_smoother(spec, y)
    v = chain.values[warmup:]
    se_mean = batch_means_stderr(v)
    se_sq = batch_means_stderr((v - rts.smooth_means) ** 2)
    mean_z = np.abs(v.mean(axis=0) - rts.smooth_means) / se_mean
    var_z = np.abs(((v - rts.smooth_means) ** 2).mean(axis=0) - rts.smooth_vars) / se_sq
    assert mean_z.max() < 3.0, f"worst mean z {mean_z.max():.2f}"
    assert var_z.max() < 3.0, f"worst var z {var_z.max():.2f}"


@pytest.mark.slow
@pytest.mark.parametrize("kind,M,grid", [
    ("PG", 100, None),
    ("PGAS", 100, None),
    ("GPGAS", 50, GridConfig(N=25, lo=-6.0, hi=6.0)),
])
def test_fixed_theta_chain_matches_rts_smoother(lg, kind, M, grid):
    model, spec, y = lg
    cfg = SamplerConfig(M=M, S=5000, psi=0.5, seed=7, kind=kind, grid=grid,
                        freeze=FreezePolicy(0, 1) if grid else None)
    chain = run_sampler(model, fixed_parameters, y, cfg, spec)
    _check_against_rts(chain, spec, y)
