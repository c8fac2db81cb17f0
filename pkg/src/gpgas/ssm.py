"""State-space model contract and path containers.

A latent state is a pair (regime, value): a discrete regime code in
``0..regime_count-1`` and a real continuous value.  Purely continuous models use
a single regime (code 0).  Regime *labels* in user-facing files are 1-based
(label = code + 1).

Models are vectorized: every density and simulator accepts numpy arrays that
broadcast against each other, so one call handles all particles of a step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from .errors import ParameterDomainError
from .rng import Stream, as_stream


@dataclass(frozen=True)
class StatePoint:
    regime: int
    value: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"state value must be finite, got {self.value}")


@dataclass(frozen=True, eq=False)
class StatePath:
    """A full latent trajectory, stored column-wise."""

    regimes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        regimes = np.array(self.regimes, dtype=np.int64).reshape(-1)
        values = np.array(self.values, dtype=float).reshape(-1)
        if regimes.shape != values.shape:
            raise ValueError("regimes and values must have equal length")
        regimes.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "regimes", regimes)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_points(cls, points) -> "StatePath":
        points = list(points)
        return cls([p.regime for p in points], [p.value for p in points])

    def __len__(self):
        return self.values.size

    def __getitem__(self, t) -> StatePoint:
        return StatePoint(int(self.regimes[t]), float(self.values[t]))

    @property
    def points(self) -> list[StatePoint]:
        return [self[t] for t in range(len(self))]

    def same_as(self, other: "StatePath") -> bool:
        """Bitwise equality of both components."""
        return (
            np.array_equal(self.regimes, other.regimes)
            and self.values.tobytes() == other.values.tobytes()
        )


@dataclass(frozen=True, eq=False)
class ObservationSeries:
    values: np.ndarray
    t0: int = 1  # time index of the first observation

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size < 1:
            raise ValueError("observation series must have T >= 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("observations must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


class SsmModel(Protocol):
    """Vectorized model contract consumed by every sampler.

    Densities return log values, with ``-inf`` for impossible states.  Joint
    transitions cover both the regime and the continuous component.
    """

    regime_count: int

    def validate(self, theta) -> None: ...

    def initial_logpdf(self, regime, value, theta) -> np.ndarray: ...

    def transition_logpdf(self, regime, value, prev_regime, prev_value, theta) -> np.ndarray: ...

    def observation_logpdf(self, y, regime, value, theta) -> np.ndarray: ...

    def simulate_initial(self, theta, rng: Stream, size: int) -> tuple[np.ndarray, np.ndarray]: ...

    def simulate_transition(self, prev_regime, prev_value, theta, rng: Stream) -> tuple[np.ndarray, np.ndarray]: ...

    def simulate_observation(self, regime, value, theta, rng: Stream) -> np.ndarray: ...

    def regime_matrix(self, theta) -> np.ndarray | None: ...


def simulate_dataset(model: SsmModel, theta: Any, T: int, seed=0) -> tuple[StatePath, ObservationSeries]:
    """Ancestral simulation of ``T`` latent states and observations."""
    if T < 1:
        raise ValueError("T must be >= 1")
    model.validate(theta)
    rng = Stream(int(seed)) if isinstance(seed, (int, np.integer)) else as_stream(seed)
    regimes = np.empty(T, dtype=np.int64)
    values = np.empty(T)
    ys = np.empty(T)
    r, v = model.simulate_initial(theta, rng, 1)
    for t in range(T):
        if t > 0:
            r, v = model.simulate_transition(r, v, theta, rng)
        regimes[t], values[t] = r[0], v[0]
        ys[t] = model.simulate_observation(r, v, theta, rng)[0]
    return StatePath(regimes, values), ObservationSeries(ys)


def path_log_density(model: SsmModel, path: StatePath, y: ObservationSeries, theta) -> float:
    """Joint log density log p(x_{1:T}, y_{1:T} | theta)."""
    r, v = path.regimes, path.values
    lp = model.initial_logpdf(r[:1], v[:1], theta).sum()
    if len(path) > 1:
        lp += model.transition_logpdf(r[1:], v[1:], r[:-1], v[:-1], theta).sum()
    lp += model.observation_logpdf(y.values, r, v, theta).sum()
    return float(lp)


def check_finite_params(**values) -> None:
    for name, val in values.items():
        if not np.all(np.isfinite(val)):
            raise ParameterDomainError(f"{name} must be finite, got {val}")


_LOG_2PI = float(np.log(2.0 * np.pi))


def normal_logpdf(x, mean, var):
    """Gaussian log density parameterized by variance."""
    d = np.asarray(x) - mean
    return -0.5 * (_LOG_2PI + np.log(var) + d * d / var)
