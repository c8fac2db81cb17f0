"""Random streams.

Every random draw in the package goes through a :class:`Stream`, which exposes
only three primitives: uniforms on ``[0, 1)``, standard normals and categorical
draws.  Keeping the surface this small is what allows
:class:`EnumeratingStream` to stand in for a real stream and walk every discrete
branch of a computation exactly (used by the stationarity tests).
"""

from __future__ import annotations

import numpy as np


class Stream:
    """Seeded random stream backed by a numpy ``Generator``."""

    def __init__(self, seed=None):
        if isinstance(seed, np.random.Generator):
            self.generator = seed
        else:
            self.generator = np.random.default_rng(seed)

    @classmethod
    def from_key(cls, seed: int, *key: int) -> "Stream":
        """Independent stream derived from ``seed`` and an integer key path.

        ``Stream.from_key(seed, replicate)`` and ``Stream.from_key(seed, sweep, t)``
        give reproducible, non-overlapping streams for parallel callers.
        """
        ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
        return cls(np.random.default_rng(ss))

    def random(self, size=None):
        return self.generator.random(size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def categorical(self, p, size=None):
        """Draw indices from categorical distributions.

        ``p`` is either one probability vector (``size`` draws from it) or a
        2-D array whose rows are distributions (one draw per row).  Rows need
        not be normalized.
        """
        p = np.asarray(p, dtype=float)
        if p.ndim == 1:
            cdf = np.cumsum(p)
            u = self.generator.random(size) * cdf[-1]
            idx = np.searchsorted(cdf, u, side="right")
            return np.minimum(idx, p.size - 1)
        cdf = np.cumsum(p, axis=1)
        u = self.generator.random(p.shape[0]) * cdf[:, -1]
        idx = np.count_nonzero(cdf <= u[:, None], axis=1)
        return np.minimum(idx, p.shape[1] - 1)


def as_stream(rng) -> Stream:
    if isinstance(rng, (Stream, EnumeratingStream)):
        return rng
    return Stream(rng)


class EnumeratingStream:
    """Deterministic stream double that follows a scripted branch sequence.

    Continuous draws are replaced by fixed values (uniform -> 0.5, normal -> 0),
    so only computations whose discrete outcome does not depend on the exact
    continuous values can be enumerated faithfully.  Each scalar categorical draw
    is a branch point; ``weight`` accumulates the probability of the branch
    taken.  Use :func:`enumerate_outcomes` rather than driving this directly.
    """

    def __init__(self, script=()):
        self._script = list(script)
        self.choices: list[int] = []
        self.rows: list[np.ndarray] = []
        self.weight = 1.0

    def random(self, size=None):
        return 0.5 if size is None else np.full(size, 0.5)

    def standard_normal(self, size=None):
        return 0.0 if size is None else np.zeros(size)

    def _choose(self, row):
        total = row.sum()
        if not total > 0:
            raise ValueError("categorical row has no mass")
        row = row / total
        pos = len(self.choices)
        if pos < len(self._script):
            k = self._script[pos]
        else:
            k = int(np.flatnonzero(row > 0)[0])
        self.choices.append(k)
        self.rows.append(row)
        self.weight *= row[k]
        return k

    def categorical(self, p, size=None):
        p = np.asarray(p, dtype=float)
        if p.ndim == 1:
            if size is None:
                return self._choose(p)
            n = int(np.prod(size))
            return np.array([self._choose(p) for _ in range(n)], dtype=np.int64).reshape(size)
        return np.array([self._choose(row) for row in p], dtype=np.int64)


def enumerate_outcomes(fn):
    """Yield ``(probability, fn(stream))`` for every positive-probability branch.

    ``fn`` is re-run once per leaf of the branch tree (depth-first), so it must
    be deterministic given the stream.
    """
    script: list[int] = []
    while True:
        stream = EnumeratingStream(script)
        result = fn(stream)
        yield stream.weight, result
        choices, rows = stream.choices, stream.rows
        i = len(choices) - 1
        while i >= 0:
            later = np.flatnonzero(rows[i][choices[i] + 1:] > 0)
            if later.size:
                script = choices[:i] + [choices[i] + 1 + int(later[0])]
                break
            i -= 1
        else:
            return
