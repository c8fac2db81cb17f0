"""Sequential Monte Carlo, conditional SMC and CSMC with ancestor sampling.

The three recursions share one engine (:func:`_run`).  Particles are stored
per time step together with ancestor indices; trajectories are rebuilt on
demand by walking the ancestry backwards, so resampling never copies paths.

Conventions
-----------
* Time is 0-based internally (``t = 0`` is the first observation).
* In the conditional recursions the reference trajectory occupies the last
  slot, index ``M - 1``.
* ``ancestors[t, m]`` is the index at ``t - 1`` of particle ``m``'s parent;
  ``ancestors[0]`` is the identity.
* Resampling is multinomial and triggered when ``ESS < psi * M``; ``psi = 1``
  resamples at every step.  After a resampling step every particle carries
  cumulative weight ``1/M`` into the next increment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Protocol

import numpy as np

from .errors import DegenerateWeightsError
from .rng import Stream
from .ssm import ObservationSeries, SsmModel, StatePath, StatePoint


def normalize_log_weights(log_weights) -> np.ndarray:
    """Max-shifted exponentiation; raises if every weight is zero."""
    log_weights = np.asarray(log_weights, dtype=float)
    top = np.max(log_weights)
    if not np.isfinite(top):
        raise DegenerateWeightsError()
    w = np.exp(log_weights - top)
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class WeightLedger:
    """Unnormalized cumulative log weights of M particles."""

    log_weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "log_weights", np.asarray(self.log_weights, dtype=float))

    @property
    def normalized(self) -> np.ndarray:
        return normalize_log_weights(self.log_weights)

    def __len__(self):
        return self.log_weights.size


def effective_sample_size(ledger: WeightLedger) -> float:
    """1 / sum(W^2) of the normalized weights, a value in [1, M]."""
    w = ledger.normalized
    return float(1.0 / np.dot(w, w))


def multinomial_resample(ledger: WeightLedger, M: int, rng: Stream) -> np.ndarray:
    """M i.i.d. ancestor indices drawn with probabilities W."""
    return np.asarray(rng.categorical(ledger.normalized, size=M), dtype=np.int64)


class ProposalDraw(NamedTuple):
    regime: np.ndarray
    value: np.ndarray
    logq: np.ndarray
    cell: np.ndarray | None = None


class Proposal(Protocol):
    """Importance distribution over the joint (regime, value) state.

    Proposals may attach a discrete label (the grid cell) to each particle;
    it is passed back as ``parent_cell`` at the next step.  ``initial_logq``
    and ``step_logq`` evaluate the density of an arbitrary point (needed to
    weight the reference trajectory) and return its label as well.
    """

    def propose_initial(self, y, theta, rng, size) -> ProposalDraw: ...

    def propose_step(self, t, y, parent_regime, parent_value, parent_cell, theta, rng) -> ProposalDraw: ...

    def initial_logq(self, y, regime, value, theta): ...

    def step_logq(self, t, y, parent_regime, parent_value, parent_cell, regime, value, theta): ...


class BootstrapProposal:
    """Propose from the model's own dynamics.

    The transition density cancels in the weight, so the engine skips both
    terms (``cancels_transition``); the weight increment is the observation
    log-likelihood alone.
    """

    cancels_transition = True

    def __init__(self, model: SsmModel):
        self.model = model

    def propose_initial(self, y, theta, rng, size):
        r, v = self.model.simulate_initial(theta, rng, size)
        return ProposalDraw(r, v, self.model.initial_logpdf(r, v, theta))

    def propose_step(self, t, y, parent_regime, parent_value, parent_cell, theta, rng):
        r, v = self.model.simulate_transition(parent_regime, parent_value, theta, rng)
        return ProposalDraw(r, v, self.model.transition_logpdf(r, v, parent_regime, parent_value, theta))

    def initial_logq(self, y, regime, value, theta):
        return self.model.initial_logpdf(regime, value, theta), None

    def step_logq(self, t, y, parent_regime, parent_value, parent_cell, regime, value, theta):
        return self.model.transition_logpdf(regime, value, parent_regime, parent_value, theta), None


@dataclass(eq=False)
class ParticleSystem:
    """Output of one SMC-family recursion.

    ``log_weights[t]`` holds the cumulative unnormalized log weights after the
    step-t update; ``ess[t]`` the ESS of those weights.  ``resampled[t]`` says
    whether ancestors at step ``t`` were drawn by resampling, and
    ``ancestor_switched[t]`` whether the reference slot was re-attached to a
    different history (CSMC-AS only).
    """

    regimes: np.ndarray  # (T, M)
    values: np.ndarray  # (T, M)
    ancestors: np.ndarray  # (T, M)
    log_weights: np.ndarray  # (T, M)
    ess: np.ndarray  # (T,)
    resampled: np.ndarray  # (T,)
    ancestor_switched: np.ndarray  # (T,)
    cells: np.ndarray | None = None  # (T, M)
    as_fallbacks: int = 0

    @property
    def T(self) -> int:
        return self.regimes.shape[0]

    @property
    def M(self) -> int:
        return self.regimes.shape[1]

    @property
    def ledger(self) -> WeightLedger:
        return WeightLedger(self.log_weights[-1])

    def lineage(self, m) -> np.ndarray:
        """(T,) or (T, len(m)) particle indices of the ancestral line(s) ending at m."""
        idx = np.asarray(m, dtype=np.int64)
        out = np.empty((self.T,) + idx.shape, dtype=np.int64)
        for t in range(self.T - 1, -1, -1):
            out[t] = idx
            idx = self.ancestors[t, idx]
        return out

    def trajectory(self, m: int) -> StatePath:
        line = self.lineage(int(m))
        rows = np.arange(self.T)
        return StatePath(self.regimes[rows, line], self.values[rows, line])

    def trajectories(self) -> tuple[np.ndarray, np.ndarray]:
        """All M trajectories as (M, T) regime and value arrays."""
        line = self.lineage(np.arange(self.M))
        rows = np.arange(self.T)[:, None]
        return self.regimes[rows, line].T, self.values[rows, line].T

    def filtering_weights(self) -> np.ndarray:
        """(T, M) normalized weights W_{1:t} at each step."""
        w = np.exp(self.log_weights - self.log_weights.max(axis=1, keepdims=True))
        return w / w.sum(axis=1, keepdims=True)


def ancestor_weights(ledger: WeightLedger, parent_regimes, parent_values, ref_point: StatePoint,
                     theta, model: SsmModel) -> np.ndarray:
    """Normalized ancestor-sampling weights  W~^m  prop. to  w^m p(ref | parent^m)."""
    log_w = ledger.log_weights + model.transition_logpdf(
        ref_point.regime, ref_point.value, np.asarray(parent_regimes), np.asarray(parent_values), theta
    )
    return normalize_log_weights(log_w)


def _check(logw, t):
    if not np.any(logw > -np.inf):
        raise DegenerateWeightsError(t=t)


AS_MODES = ("resampling", "every_step")


def _run(model: SsmModel, proposal, y: ObservationSeries, theta, M: int, psi: float, rng,
         reference: StatePath | None = None, ancestor_sampling: bool = False,
         as_mode: str = "resampling") -> ParticleSystem:
    yv = y.values
    T = yv.size
    conditional = reference is not None
    if conditional and len(reference) != T:
        raise ValueError(f"reference length {len(reference)} != T={T}")
    if not 0.0 < psi <= 1.0:
        raise ValueError("psi must lie in (0, 1]")
    if as_mode not in AS_MODES:
        raise ValueError(f"as_mode must be one of {AS_MODES}")
    as_always = as_mode == "every_step"
    n_free = M - 1 if conditional else M
    ref = M - 1
    bootstrap = getattr(proposal, "cancels_transition", False)
    log_m = -np.log(M)

    regimes = np.empty((T, M), dtype=np.int64)
    values = np.empty((T, M))
    ancestors = np.empty((T, M), dtype=np.int64)
    log_weights = np.empty((T, M))
    ess = np.empty(T)
    resampled = np.zeros(T, dtype=bool)
    switched = np.zeros(T, dtype=bool)
    cells = None
    fallbacks = 0

    # t = 0
    logq = np.empty(M)
    if n_free:
        draw = proposal.propose_initial(yv[0], theta, rng, n_free)
        regimes[0, :n_free] = draw.regime
        values[0, :n_free] = draw.value
        logq[:n_free] = draw.logq
        if draw.cell is not None:
            cells = np.empty((T, M), dtype=np.int64)
            cells[0, :n_free] = draw.cell
    if conditional:
        regimes[0, ref] = reference.regimes[0]
        values[0, ref] = reference.values[0]
        lq, cell = proposal.initial_logq(yv[0], reference.regimes[:1], reference.values[:1], theta)
        logq[ref] = np.asarray(lq).reshape(-1)[0]
        if cell is not None:
            if cells is None:
                cells = np.empty((T, M), dtype=np.int64)
            cells[0, ref] = np.asarray(cell).reshape(-1)[0]
    ancestors[0] = np.arange(M)
    r0, v0 = regimes[0], values[0]
    incr = model.observation_logpdf(yv[0], r0, v0, theta)
    if not bootstrap:
        incr = incr + model.initial_logpdf(r0, v0, theta) - logq
    logw = np.where(np.isnan(incr), -np.inf, incr)
    _check(logw, 0)
    W = normalize_log_weights(logw)
    log_weights[0] = logw
    ess[0] = 1.0 / np.dot(W, W)

    identity = np.arange(M)
    for t in range(1, T):
        anc = identity.copy()
        resample = psi >= 1.0 or ess[t - 1] < psi * M
        if resample and n_free:
            anc[:n_free] = rng.categorical(W, size=n_free)
        resampled[t] = resample
        prev_r, prev_v = regimes[t - 1], values[t - 1]

        if conditional:
            ref_r, ref_v = reference.regimes[t], reference.values[t]
            if ancestor_sampling and (resample or as_always) and M > 1:
                as_logw = logw + model.transition_logpdf(ref_r, ref_v, prev_r, prev_v, theta)
                top = np.max(as_logw)
                if np.isfinite(top):
                    p = np.exp(as_logw - top)
                    anc[ref] = rng.categorical(p / p.sum())
                else:
                    fallbacks += 1
            switched[t] = anc[ref] != ref
            regimes[t, ref] = ref_r
            values[t, ref] = ref_v

        logq = np.empty(M)
        if n_free:
            pa = anc[:n_free]
            draw = proposal.propose_step(t, yv[t], prev_r[pa], prev_v[pa],
                                         None if cells is None else cells[t - 1, pa], theta, rng)
            regimes[t, :n_free] = draw.regime
            values[t, :n_free] = draw.value
            logq[:n_free] = draw.logq
            if cells is not None:
                cells[t, :n_free] = draw.cell
        if conditional:
            a = anc[ref]
            lq, cell = proposal.step_logq(
                t, yv[t], prev_r[a:a + 1], prev_v[a:a + 1],
                None if cells is None else cells[t - 1, a:a + 1],
                reference.regimes[t:t + 1], reference.values[t:t + 1], theta,
            )
            logq[ref] = np.asarray(lq).reshape(-1)[0]
            if cells is not None:
                cells[t, ref] = np.asarray(cell).reshape(-1)[0]
        ancestors[t] = anc

        cur_r, cur_v = regimes[t], values[t]
        incr = model.observation_logpdf(yv[t], cur_r, cur_v, theta)
        if not bootstrap:
            incr = incr + model.transition_logpdf(cur_r, cur_v, prev_r[anc], prev_v[anc], theta) - logq
        prior = np.full(M, log_m) if resample else logw[anc]
        logw = prior + incr
        logw = np.where(np.isnan(logw), -np.inf, logw)
        _check(logw, t)
        W = normalize_log_weights(logw)
        log_weights[t] = logw
        ess[t] = 1.0 / np.dot(W, W)

    return ParticleSystem(regimes, values, ancestors, log_weights, ess, resampled, switched, cells, fallbacks)


def smc_run(model: SsmModel, proposal, y: ObservationSeries, theta, M: int, psi: float, rng) -> ParticleSystem:
    """Sequential importance sampling with ESS-triggered multinomial resampling."""
    if M < 2:
        raise ValueError("smc_run needs M >= 2")
    return _run(model, proposal, y, theta, M, psi, rng)


def csmc_run(model: SsmModel, proposal, y: ObservationSeries, theta, M: int, psi: float, rng,
             reference: StatePath) -> ParticleSystem:
    """Conditional SMC: slot M-1 is pinned to ``reference`` with a_t = M-1."""
    return _run(model, proposal, y, theta, M, psi, rng, reference=reference)


def csmc_as_run(model: SsmModel, proposal, y: ObservationSeries, theta, M: int, psi: float, rng,
                reference: StatePath, as_mode: str = "resampling") -> ParticleSystem:
    """Conditional SMC where the reference's ancestor is redrawn.

    The reference ancestor is drawn with probability proportional to the
    pre-resampling weight of each particle times the exact model transition
    density into the reference point.  With the default ``as_mode="resampling"``
    this happens only at steps where the ESS test resamples; elsewhere the
    reference keeps its own history.  ``as_mode="every_step"`` redraws it at
    every step, which mixes faster but does not leave the smoothing
    distribution invariant unless ``psi = 1`` (then the two modes coincide).
    If every ancestor weight is zero the reference keeps its history and
    ``as_fallbacks`` is incremented.
    """
    return _run(model, proposal, y, theta, M, psi, rng, reference=reference, ancestor_sampling=True,
                as_mode=as_mode)
