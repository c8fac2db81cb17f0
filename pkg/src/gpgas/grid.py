"""Grid HMM approximation and the grid importance distribution.

The continuous state axis is cut into ``N`` cells: ``N - 2`` equal-width finite
cells covering ``[lo, hi)`` plus two semi-infinite outer cells.  Cell ``0`` is
``(-inf, lo)``, cell ``N - 1`` is ``[hi, inf)``.  Crossing cells with regimes
gives the joint alphabet of size ``K = N * R`` with joint index
``regime * N + cell`` (0-based regime codes).

The midpoint rule turns the model into a discrete HMM over that alphabet;
tilting its transition rows by the observation likelihood gives a discrete
approximation of the locally optimal proposal.  A particle is proposed by
drawing a joint cell from the tilted row of its parent's cell and then a value
inside the cell (uniform in finite cells, truncated Gaussian in outer cells).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtri

from .errors import ConfigurationError
from .smc import ProposalDraw
from .ssm import ObservationSeries, SsmModel


@dataclass(frozen=True, eq=False)
class Grid:
    lo: float
    hi: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.lo >= self.hi:
            raise ConfigurationError(f"grid needs finite lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.N) != self.N or self.N < 3:
            raise ConfigurationError(f"grid needs N >= 3 cells, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        w = self.width
        edges = self.lo + w * np.arange(self.N - 1)
        edges[-1] = self.hi
        inner = 0.5 * (edges[:-1] + edges[1:])
        mids = np.concatenate(([self.lo - 0.5 * w], inner, [self.hi + 0.5 * w]))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "midpoints", mids)
        # outer cells take the finite width as their nominal length
        object.__setattr__(self, "lengths", np.full(self.N, w))

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / (self.N - 2)

    def locate(self, x):
        """Cell index of x; cells are half-open, [edge, next_edge)."""
        return np.searchsorted(self.edges, x, side="right")


def build_grid(lo: float, hi: float, N: int) -> Grid:
    return Grid(float(lo), float(hi), N)


def locate_cell(x, grid: Grid):
    return grid.locate(x)


@dataclass(frozen=True, eq=False)
class WithinCellSampler:
    """Uniform draws in finite cells, truncated Gaussians in the outer cells.

    The outer Gaussians are centred on the outer cells' nominal midpoints.
    ``outer_variance`` defaults to 10% of the finite range.
    """

    grid: Grid
    outer_variance: float | None = None

    def __post_init__(self):
        var = self.outer_variance
        if var is None:
            var = 0.1 * (self.grid.hi - self.grid.lo)
        if not var > 0:
            raise ConfigurationError("outer_variance must be positive")
        object.__setattr__(self, "outer_variance", float(var))
        sd = np.sqrt(var)
        object.__setattr__(self, "_sd", sd)
        # both outer Gaussians keep mass Phi(w / (2 sd)) on their side of the boundary
        log_mass = float(log_ndtr(0.5 * self.grid.width / sd))
        object.__setattr__(self, "_mass", np.exp(log_mass))
        object.__setattr__(self, "_log_uniform", -np.log(self.grid.width))
        object.__setattr__(self, "_log_outer_norm", -0.5 * np.log(2 * np.pi) - np.log(sd) - log_mass)

    def sample(self, cells, u) -> np.ndarray:
        """Map uniforms u in [0, 1) to points inside ``cells``."""
        g = self.grid
        cells = np.asarray(cells)
        u = np.asarray(u, dtype=float)
        inner = np.clip(cells, 1, g.N - 2)
        x = g.edges[inner - 1] + u * g.width
        # rounding can push x onto the upper edge of its cell
        x = np.minimum(x, np.nextafter(g.edges[inner], -np.inf))
        left = cells == 0
        right = cells == g.N - 1
        if left.any() or right.any():
            z = ndtri(np.maximum(u, 1e-300) * self._mass)
            if left.any():
                xl = g.midpoints[0] + self._sd * z[left]
                x[left] = np.minimum(xl, np.nextafter(g.lo, -np.inf))
            if right.any():
                x[right] = np.maximum(g.midpoints[-1] - self._sd * z[right], g.hi)
        return x

    def logpdf(self, cells, x) -> np.ndarray:
        """Log density of x under cell ``cells``'s sampler (-inf outside the cell)."""
        g = self.grid
        cells, x = np.broadcast_arrays(np.asarray(cells), np.asarray(x, dtype=float))
        out = np.full(x.shape, self._log_uniform)
        left = cells == 0
        right = cells == g.N - 1
        if left.any() or right.any():
            outer = left | right
            mid = np.where(left, g.midpoints[0], g.midpoints[-1])[outer]
            z = (x[outer] - mid) / self._sd
            out[outer] = self._log_outer_norm - 0.5 * z * z
        out[g.locate(x) != cells] = -np.inf
        return out


@dataclass(frozen=True, eq=False)
class HmmApprox:
    """Bounded midpoint-rule HMM over the joint (regime, cell) alphabet.

    ``obs_loglik[t]`` is the log of the bounded, per-time normalized cell
    likelihood; only its shape across cells matters for tilting.
    """

    grid: Grid
    regime_count: int
    initial: np.ndarray  # (K,)
    transition: np.ndarray  # (K, K)
    obs_loglik: np.ndarray  # (T, K)
    eps: float

    @property
    def K(self) -> int:
        return self.grid.N * self.regime_count

    def joint_index(self, regime, cell):
        return np.asarray(regime) * self.grid.N + np.asarray(cell)

    def split_index(self, joint):
        return np.divmod(np.asarray(joint), self.grid.N)


def _bounded(log_raw: np.ndarray, eps: float) -> np.ndarray:
    """Normalize rows, floor every probability at eps, renormalize."""
    top = np.max(log_raw, axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    p = np.exp(log_raw - top)
    total = p.sum(axis=-1, keepdims=True)
    p = np.divide(p, total, out=np.zeros_like(p), where=total > 0)
    p = np.maximum(p, eps)
    return p / p.sum(axis=-1, keepdims=True)


def approx_hmm(grid: Grid, theta, model: SsmModel, y: ObservationSeries, eps: float = 1e-12) -> HmmApprox:
    """Midpoint-rule HMM: probabilities prop. to cell lengths times densities at midpoints."""
    model.validate(theta)
    R = model.regime_count
    regime = np.repeat(np.arange(R), grid.N)
    mid = np.tile(grid.midpoints, R)
    log_len = np.tile(np.log(grid.lengths), R)
    with np.errstate(divide="ignore", invalid="ignore"):
        init_raw = log_len + model.initial_logpdf(regime, mid, theta)
        trans_raw = (
            log_len[None, :]
            + log_len[:, None]
            + model.transition_logpdf(regime[None, :], mid[None, :], regime[:, None], mid[:, None], theta)
        )
        obs_raw = log_len[None, :] + model.observation_logpdf(y.values[:, None], regime[None, :], mid[None, :], theta)
    init_raw = np.where(np.isnan(init_raw), -np.inf, init_raw)
    trans_raw = np.where(np.isnan(trans_raw), -np.inf, trans_raw)
    obs_raw = np.where(np.isnan(obs_raw), -np.inf, obs_raw)
    return HmmApprox(
        grid=grid,
        regime_count=R,
        initial=_bounded(init_raw, eps),
        transition=_bounded(trans_raw, eps),
        obs_loglik=np.log(_bounded(obs_raw, eps)),
        eps=eps,
    )


class ProposalTable:
    """Tilted proposal rows, built lazily for occupied parent cells only.

    Rows are cached per ``(t, parent)`` for the lifetime of the table (one
    sweep); ``rows_built`` counts every row computed.  Both factors of a row
    are floored away from zero, so rows are formed in linear space.
    """

    def __init__(self, hmm: HmmApprox):
        self.hmm = hmm
        self._obs = np.exp(hmm.obs_loglik)
        T, K = self._obs.shape
        self._rows: list[np.ndarray | None] = [None] * T
        self._built = np.zeros((T, K), dtype=bool)
        self.rows_built = 0
        init = hmm.initial * self._obs[0]
        self.initial_probs = init / init.sum()
        self.log_initial = np.log(self.initial_probs)

    def rows(self, t: int, parents) -> np.ndarray:
        """(len(parents), K) normalized tilted rows at step t >= 1."""
        parents = np.asarray(parents, dtype=np.int64).reshape(-1)
        built = self._built[t]
        todo = parents[~built[parents]]
        if todo.size:
            if self._rows[t] is None:
                self._rows[t] = np.empty((self.hmm.K, self.hmm.K))
            todo = np.unique(todo)
            raw = self.hmm.transition[todo] * self._obs[t]
            self._rows[t][todo] = raw / raw.sum(axis=1, keepdims=True)
            built[todo] = True
            self.rows_built += todo.size
        return self._rows[t][parents]


def tilted_row(table: ProposalTable, t: int, parent: int) -> np.ndarray:
    """Normalized tilted proposal row of one parent joint cell (t >= 1)."""
    return table.rows(t, [parent])[0]


class GridProposal:
    """Proposal that samples a joint cell, then a value within the cell."""

    def __init__(self, hmm: HmmApprox, sampler: WithinCellSampler | None = None):
        self.hmm = hmm
        self.grid = hmm.grid
        self.sampler = sampler or WithinCellSampler(hmm.grid)
        if self.sampler.grid.N != hmm.grid.N:
            raise ConfigurationError("sampler and HMM grids differ")
        self.table = ProposalTable(hmm)

    @property
    def rows_built(self) -> int:
        return self.table.rows_built

    def _emit(self, joint, log_cell_prob, rng):
        regime, cell = self.hmm.split_index(joint)
        value = self.sampler.sample(cell, rng.random(np.size(joint)))
        logq = log_cell_prob + self.sampler.logpdf(cell, value)
        return ProposalDraw(regime, value, logq, joint)

    def propose_initial(self, y, theta, rng, size):
        joint = np.asarray(rng.categorical(self.table.initial_probs, size=size), dtype=np.int64)
        return self._emit(joint, self.table.log_initial[joint], rng)

    def propose_step(self, t, y, parent_regime, parent_value, parent_cell, theta, rng):
        probs = self.table.rows(t, parent_cell)
        joint = np.asarray(rng.categorical(probs), dtype=np.int64)
        return self._emit(joint, np.log(probs[np.arange(joint.size), joint]), rng)

    def _joint_of(self, regime, value):
        return np.asarray(self.hmm.joint_index(regime, self.grid.locate(value))).reshape(-1)

    def initial_logq(self, y, regime, value, theta):
        joint = self._joint_of(regime, value)
        _, cell = self.hmm.split_index(joint)
        return self.table.log_initial[joint] + self.sampler.logpdf(cell, value), joint

    def step_logq(self, t, y, parent_regime, parent_value, parent_cell, regime, value, theta):
        if parent_cell is None:
            parent_cell = self._joint_of(parent_regime, parent_value)
        joint = self._joint_of(regime, value)
        probs = self.table.rows(t, parent_cell)
        _, cell = self.hmm.split_index(joint)
        return np.log(probs[np.arange(joint.size), joint]) + self.sampler.logpdf(cell, value), joint


def grid_proposal(hmm: HmmApprox, grid: Grid | None = None, sampler: WithinCellSampler | None = None) -> GridProposal:
    if grid is not None and grid.N != hmm.grid.N:
        raise ConfigurationError("grid does not match the HMM approximation")
    return GridProposal(hmm, sampler)


def evaluate_proposal_logq(proposal: GridProposal, t: int, y_t, parent, point) -> float:
    """log q of ``point`` given ``parent`` (a StatePoint, or None at t = 0)."""
    regime = np.array([point.regime])
    value = np.array([point.value])
    if t == 0 or parent is None:
        lq, _ = proposal.initial_logq(y_t, regime, value, None)
    else:
        lq, _ = proposal.step_logq(t, y_t, np.array([parent.regime]), np.array([parent.value]), None,
                                   regime, value, None)
    return float(np.asarray(lq).reshape(-1)[0])


# -- freezing ------------------------------------------------------------------

@dataclass(frozen=True)
class FreezePolicy:
    """Rebuild the HMM for iterations 1..s_tilde, then fix it.

    At iteration ``s_tilde + 1`` the HMM is built once more at the mean of
    theta^(s_tilde - window + 1) .. theta^(s_tilde) (theta^(0) is the initial
    value) and reused for every later iteration.
    """

    s_tilde: int
    window: int = 1

    def __post_init__(self):
        if self.s_tilde < 0 or self.window < 1:
            raise ConfigurationError("FreezePolicy needs s_tilde >= 0 and window >= 1")
        if self.window > self.s_tilde + 1:
            raise ConfigurationError("freeze window longer than the available history")


def average_parameters(thetas):
    """Field-wise mean of dataclass parameters (or of plain arrays)."""
    first = thetas[0]
    if dataclasses.is_dataclass(first):
        fields = {}
        for f in dataclasses.fields(first):
            vals = np.stack([np.asarray(getattr(th, f.name), dtype=float) for th in thetas])
            mean = vals.mean(axis=0)
            fields[f.name] = float(mean) if mean.ndim == 0 else mean
        return dataclasses.replace(first, **fields)
    return np.mean(np.stack([np.asarray(th, dtype=float) for th in thetas]), axis=0)


def freeze(policy: FreezePolicy, thetas, grid: Grid, model: SsmModel, y: ObservationSeries,
           eps: float = 1e-12) -> HmmApprox:
    """HMM built at the windowed posterior mean; ``thetas[s]`` is theta^(s)."""
    start = policy.s_tilde - policy.window + 1
    if start < 0 or len(thetas) <= policy.s_tilde:
        raise ConfigurationError(
            f"freeze needs theta^(0..{policy.s_tilde}), have {len(thetas)} values"
        )
    theta_bar = average_parameters(thetas[start:policy.s_tilde + 1])
    return approx_hmm(grid, theta_bar, model, y, eps)
