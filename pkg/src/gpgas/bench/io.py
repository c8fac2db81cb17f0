"""File formats: dataset CSV, ground-truth JSON, results CSV and chain JSON.

Dataset CSV
    columns ``t, y`` and, for simulated data, ``x_true, s_true``; ``t`` starts
    at 1 and ``s_true`` uses regime labels 1..R.
Results CSV
    one row per (configuration, replicate) with the columns in
    :data:`RESULT_COLUMNS`; absent values (e.g. an empty switching partition)
    are written as empty fields.
Ground-truth JSON
    ``{"mean": [...], "var": [...], "regime_probs": [[...], ...], "provenance": {...}}``
Chain JSON
    ``{"config": {...}, "seed": int, "stride": int, "theta": [{...}, ...],
    "diagnostics": {...}, "metrics": {...}}`` with theta samples thinned by
    ``stride`` and full per-iteration diagnostics.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..samplers import ChainRecord
from ..ssm import ObservationSeries, StatePath

RESULT_COLUMNS = (
    "sampler", "N", "M", "psi", "seed", "iterations", "wallclock_s", "mrae_mean", "mrae_var",
    "mrae_mean_switch", "mrae_mean_nonswitch", "not_updated_rate", "mean_ess",
)


def write_dataset(path, y: ObservationSeries, truth: StatePath | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t", "y", "x_true", "s_true") if truth is not None else ("t", "y"))
        for t, yt in enumerate(y.values):
            row = [t + 1, repr(float(yt))]
            if truth is not None:
                row += [repr(float(truth.values[t])), int(truth.regimes[t]) + 1]
            writer.writerow(row)


def read_dataset(path) -> tuple[ObservationSeries, StatePath | None]:
    try:
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigurationError(f"cannot read dataset {path}: {exc}") from exc
    if not rows or "y" not in rows[0]:
        raise ConfigurationError(f"dataset {path} has no 'y' column")
    y = ObservationSeries([float(r["y"]) for r in rows])
    truth = None
    if "x_true" in rows[0] and "s_true" in rows[0]:
        truth = StatePath([int(r["s_true"]) - 1 for r in rows], [float(r["x_true"]) for r in rows])
    return y, truth


@dataclass(eq=False)
class GroundTruth:
    mean: np.ndarray
    var: np.ndarray
    regime_probs: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.var = np.asarray(self.var, dtype=float)
        if self.mean.shape != self.var.shape:
            raise ValueError("mean and var lengths differ")
        if self.regime_probs is not None:
            self.regime_probs = np.asarray(self.regime_probs, dtype=float)

    @property
    def T(self) -> int:
        return self.mean.size

    def save(self, path) -> None:
        doc = {
            "mean": self.mean.tolist(),
            "var": self.var.tolist(),
            "regime_probs": None if self.regime_probs is None else self.regime_probs.tolist(),
            "provenance": self.provenance,
        }
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(doc, indent=1))

    @classmethod
    def load(cls, path) -> "GroundTruth":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigurationError(f"cannot read ground truth {path}: {exc}") from exc
        return cls(doc["mean"], doc["var"], doc.get("regime_probs"), doc.get("provenance", {}))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results(path, rows) -> None:
    """Write result rows (dicts keyed by :data:`RESULT_COLUMNS`)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])


def read_results(path) -> list[dict]:
    if not Path(path).exists():
        raise ConfigurationError(f"results file {path} does not exist")
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise ConfigurationError(f"{path} does not have the results schema")
        out = []
        for raw in reader:
            row = {}
            for key, val in raw.items():
                if key == "sampler":
                    row[key] = val
                elif val == "":
                    row[key] = None
                elif key in ("N", "M", "seed", "iterations"):
                    row[key] = int(val)
                else:
                    row[key] = float(val)
            out.append(row)
        return out


def chain_document(chain: ChainRecord, config_doc: dict, seed: int, stride: int, metrics: dict) -> dict:
    d = chain.diagnostics
    thetas = chain.thetas[::stride]
    theta_rows = [dataclasses.asdict(th) if dataclasses.is_dataclass(th) else th for th in thetas]
    return {
        "config": config_doc,
        "seed": seed,
        "stride": stride,
        "theta": theta_rows,
        "diagnostics": {
            "ess": d.ess.tolist(),
            "resampled": d.resampled.astype(int).tolist(),
            "ancestor_switched": d.ancestor_switched.astype(int).tolist(),
            "not_updated": d.not_updated.tolist(),
            "row_builds": d.row_builds.tolist(),
            "matrix_builds": d.matrix_builds.tolist(),
            "as_fallbacks": d.as_fallbacks.tolist(),
            "wallclock": d.wallclock.tolist(),
        },
        "metrics": metrics,
    }


def write_json(path, doc) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc))
