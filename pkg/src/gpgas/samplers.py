"""Particle Gibbs drivers: PG, PGAS and the grid-proposal variant GPGAS.

Each iteration updates the parameters given the current path, runs one
conditional SMC sweep with the current path as reference, and draws the next
path from the final particle weights (always accepted).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, InitializationError
from .grid import FreezePolicy, Grid, GridProposal, HmmApprox, WithinCellSampler, approx_hmm, build_grid, freeze
from .rng import Stream, as_stream
from .smc import AS_MODES, BootstrapProposal, ParticleSystem, csmc_as_run, csmc_run
from .ssm import ObservationSeries, SsmModel, StatePath, path_log_density

ParameterUpdater = Callable[[object, StatePath, ObservationSeries, Stream], object]

KINDS = ("PG", "PGAS", "GPGAS")


def fixed_parameters(theta, path, y, rng):
    """Identity updater: keeps theta fixed (pure state smoothing)."""
    return theta


@dataclass(frozen=True)
class GridConfig:
    N: int = 10
    lo: float = -12.0
    hi: float = 12.0
    eps: float = 1e-12
    outer_variance: float | None = None  # default: 10% of hi - lo

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ConfigurationError("grid eps must lie in (0, 1)")
        build_grid(self.lo, self.hi, self.N)  # validates geometry

    def build(self) -> tuple[Grid, WithinCellSampler]:
        grid = build_grid(self.lo, self.hi, self.N)
        return grid, WithinCellSampler(grid, self.outer_variance)


@dataclass(frozen=True)
class SamplerConfig:
    M: int
    S: int
    psi: float = 0.25
    seed: int = 0
    kind: str = "PGAS"
    grid: GridConfig | None = None
    freeze: FreezePolicy | None = None
    as_mode: str = "resampling"  # or "every_step" (not invariant for psi < 1)

    def __post_init__(self):
        if self.M < 2:
            raise ConfigurationError(f"M must be >= 2, got {self.M}")
        if self.S < 1:
            raise ConfigurationError(f"S must be >= 1, got {self.S}")
        if not 0.0 < self.psi <= 1.0:
            raise ConfigurationError(f"psi must lie in (0, 1], got {self.psi}")
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown sampler kind {self.kind!r}")
        if self.kind == "GPGAS" and self.grid is None:
            raise ConfigurationError("GPGAS needs grid settings")
        if self.as_mode not in AS_MODES:
            raise ConfigurationError(f"as_mode must be one of {AS_MODES}")


@dataclass(eq=False)
class DiagnosticsRecord:
    """Per-iteration sampler health metrics.

    ``ess``, ``resampled`` and ``ancestor_switched`` are (S, T); the rest are
    length S.  ``matrix_builds`` counts HMM transition-matrix constructions and
    ``row_builds`` tilted proposal rows (both zero for PG/PGAS).
    """

    ess: np.ndarray
    resampled: np.ndarray
    ancestor_switched: np.ndarray
    not_updated: np.ndarray
    row_builds: np.ndarray
    matrix_builds: np.ndarray
    as_fallbacks: np.ndarray
    wallclock: np.ndarray

    @classmethod
    def empty(cls, S: int, T: int) -> "DiagnosticsRecord":
        return cls(
            ess=np.zeros((S, T)),
            resampled=np.zeros((S, T), dtype=bool),
            ancestor_switched=np.zeros((S, T), dtype=bool),
            not_updated=np.zeros(S, dtype=np.int64),
            row_builds=np.zeros(S, dtype=np.int64),
            matrix_builds=np.zeros(S, dtype=np.int64),
            as_fallbacks=np.zeros(S, dtype=np.int64),
            wallclock=np.zeros(S),
        )

    def not_updated_rate(self, start: int = 0) -> float:
        T = self.ess.shape[1]
        return float(self.not_updated[start:].mean() / T)


@dataclass(eq=False)
class ChainRecord:
    thetas: list
    regimes: np.ndarray  # (S, T)
    values: np.ndarray  # (S, T)
    diagnostics: DiagnosticsRecord
    config: SamplerConfig | None = None
    extra: dict = field(default_factory=dict)

    @property
    def S(self) -> int:
        return self.values.shape[0]

    def path(self, s: int) -> StatePath:
        return StatePath(self.regimes[s], self.values[s])

    def posterior_moments(self, warmup: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Per-t mean and variance of the continuous state after ``warmup``."""
        v = self.values[warmup:]
        return v.mean(axis=0), v.var(axis=0)

    def regime_probabilities(self, warmup: int = 0, R: int = 2) -> np.ndarray:
        """(T, R) posterior regime frequencies after ``warmup``."""
        r = self.regimes[warmup:]
        return np.stack([(r == k).mean(axis=0) for k in range(R)], axis=1)


def sample_trajectory(system: ParticleSystem, rng) -> StatePath:
    """Draw one trajectory with probability equal to its final normalized weight."""
    m = int(as_stream(rng).categorical(system.ledger.normalized))
    return system.trajectory(m)


def pg_sweep(model, proposal, y, theta, M, psi, rng, reference: StatePath):
    """One PG state update; returns (new path, particle system)."""
    system = csmc_run(model, proposal, y, theta, M, psi, rng, reference)
    return sample_trajectory(system, rng), system


def pgas_sweep(model, proposal, y, theta, M, psi, rng, reference: StatePath, as_mode: str = "resampling"):
    """One PGAS state update; returns (new path, particle system)."""
    system = csmc_as_run(model, proposal, y, theta, M, psi, rng, reference, as_mode)
    return sample_trajectory(system, rng), system


def gpgas_sweep(model, hmm: HmmApprox, y, theta, M, psi, rng, reference: StatePath,
                sampler: WithinCellSampler | None = None, as_mode: str = "resampling"):
    """One GPGAS state update with a fresh row cache built on ``hmm``."""
    proposal = GridProposal(hmm, sampler)
    path, system = pgas_sweep(model, proposal, y, theta, M, psi, rng, reference, as_mode)
    return path, system, proposal.rows_built


def simulate_path(model: SsmModel, theta, T: int, rng) -> StatePath:
    """Ancestral draw of a latent path from the model prior."""
    rng = as_stream(rng)
    r, v = model.simulate_initial(theta, rng, 1)
    regimes = [int(np.asarray(r).reshape(-1)[0])]
    values = [float(np.asarray(v).reshape(-1)[0])]
    for _ in range(1, T):
        r, v = model.simulate_transition(np.array([regimes[-1]]), np.array([values[-1]]), theta, rng)
        regimes.append(int(np.asarray(r).reshape(-1)[0]))
        values.append(float(np.asarray(v).reshape(-1)[0]))
    return StatePath(regimes, values)


def _initial_path(model, theta, y, x0, rng) -> StatePath:
    if x0 is None:
        x0 = simulate_path(model, theta, len(y), rng)
    if len(x0) != len(y):
        raise InitializationError(f"initial path has length {len(x0)}, expected {len(y)}")
    if not np.isfinite(path_log_density(model, x0, y, theta)):
        raise InitializationError("initial path has zero posterior density")
    return x0


class _GridSchedule:
    """Decides when to (re)build the HMM approximation."""

    def __init__(self, model, y, grid_cfg: GridConfig, policy: FreezePolicy | None):
        self.model, self.y, self.cfg, self.policy = model, y, grid_cfg, policy
        self.grid, self.sampler = grid_cfg.build()
        self.hmm: HmmApprox | None = None

    def hmm_for(self, s: int, history: list) -> tuple[HmmApprox, int]:
        """HMM for iteration s (1-based); history[k] is theta^(k)."""
        p = self.policy
        if p is None or s <= p.s_tilde:
            hmm = approx_hmm(self.grid, history[s], self.model, self.y, self.cfg.eps)
        elif s == p.s_tilde + 1:
            hmm = freeze(p, history, self.grid, self.model, self.y, self.cfg.eps)
        else:
            return self.hmm, 0
        self.hmm = hmm
        return hmm, 1


def _drive(model, y, config: SamplerConfig, theta0, x0, updater, sweep, rng) -> ChainRecord:
    rng = as_stream(rng) if rng is not None else Stream(config.seed)
    model.validate(theta0)
    path = _initial_path(model, theta0, y, x0, rng)
    S, T = config.S, len(y)
    diag = DiagnosticsRecord.empty(S, T)
    regimes = np.empty((S, T), dtype=np.int64)
    values = np.empty((S, T))
    thetas = []
    history = [theta0]
    theta = theta0
    for i in range(S):
        start = time.perf_counter()
        theta = updater(theta, path, y, rng)
        history.append(theta)
        new, system, rows, builds = sweep(i + 1, theta, history, path, rng)
        diag.wallclock[i] = time.perf_counter() - start
        same = (new.regimes == path.regimes) & (new.values == path.values)
        diag.not_updated[i] = int(same.sum())
        diag.ess[i] = system.ess
        diag.resampled[i] = system.resampled
        diag.ancestor_switched[i] = system.ancestor_switched
        diag.as_fallbacks[i] = system.as_fallbacks
        diag.row_builds[i] = rows
        diag.matrix_builds[i] = builds
        regimes[i] = new.regimes
        values[i] = new.values
        thetas.append(theta)
        path = new
    return ChainRecord(thetas, regimes, values, diag, config)


def pg_run(model: SsmModel, proposal, updater: ParameterUpdater, y: ObservationSeries,
           config: SamplerConfig, theta0, x0: StatePath | None = None, rng=None) -> ChainRecord:
    """Particle Gibbs: conditional SMC sweeps, reference history kept fixed."""
    proposal = proposal or BootstrapProposal(model)

    def sweep(s, theta, history, ref, stream):
        new, system = pg_sweep(model, proposal, y, theta, config.M, config.psi, stream, ref)
        return new, system, 0, 0

    return _drive(model, y, config, theta0, x0, updater, sweep, rng)


def pgas_run(model: SsmModel, proposal, updater: ParameterUpdater, y: ObservationSeries,
             config: SamplerConfig, theta0, x0: StatePath | None = None, rng=None) -> ChainRecord:
    """Particle Gibbs with ancestor sampling."""
    proposal = proposal or BootstrapProposal(model)

    def sweep(s, theta, history, ref, stream):
        new, system = pgas_sweep(model, proposal, y, theta, config.M, config.psi, stream, ref, config.as_mode)
        return new, system, 0, 0

    return _drive(model, y, config, theta0, x0, updater, sweep, rng)


def gpgas_run(model: SsmModel, updater: ParameterUpdater, y: ObservationSeries,
              config: SamplerConfig, theta0, x0: StatePath | None = None, rng=None) -> ChainRecord:
    """PGAS with the grid-HMM proposal, rebuilt each iteration until frozen."""
    if config.grid is None:
        raise ConfigurationError("GPGAS needs grid settings")
    schedule = _GridSchedule(model, y, config.grid, config.freeze)

    def sweep(s, theta, history, ref, stream):
        hmm, builds = schedule.hmm_for(s, history)
        new, system, rows = gpgas_sweep(model, hmm, y, theta, config.M, config.psi, stream, ref,
                                        schedule.sampler, config.as_mode)
        return new, system, rows, builds

    return _drive(model, y, config, theta0, x0, updater, sweep, rng)


def run_sampler(model: SsmModel, updater: ParameterUpdater, y: ObservationSeries, config: SamplerConfig,
                theta0, x0: StatePath | None = None, proposal=None, rng=None) -> ChainRecord:
    """Dispatch on ``config.kind``."""
    if config.kind == "GPGAS":
        return gpgas_run(model, updater, y, config, theta0, x0, rng)
    runner = pg_run if config.kind == "PG" else pgas_run
    return runner(model, proposal, updater, y, config, theta0, x0, rng)
