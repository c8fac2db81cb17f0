"""Run configuration: a nested YAML document mapped onto dataclasses.

Every field is addressable from the command line with ``--set a.b=value``
(values are parsed as YAML scalars), e.g. ``--set sampler.grid.N=25``.

Schema (defaults shown)::

    model: sv                  # sv | lg
    theta: null                # model parameters; null -> model defaults
    update_parameters: true    # false keeps theta fixed (state smoothing only)
    data:
      path: null               # dataset CSV; null -> simulate
      T: 100
      seed: 1
    sampler:
      kind: PGAS               # PG | PGAS | GPGAS
      M: 25
      S: 1000
      psi: 0.25
      grid: {N: 10, lo: -12.0, hi: 12.0, eps: 1.0e-12, outer_variance: null}
      freeze: {s_tilde: 2000, window: 1000}   # null -> never freeze
      as_mode: resampling      # resampling | every_step
    output_dir: results
    warmup: 0
    replicates: 1
    seed_base: 0
    ground_truth: null         # ground-truth JSON; null -> no metrics
    json_stride: 10            # thinning of theta samples in chain JSON
    checkpoints: 20            # points on the error-vs-time curve
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import yaml

from ..errors import ConfigurationError
from ..grid import FreezePolicy
from ..models import SV_THETA, KalmanModelSpec, SvParams
from ..samplers import GridConfig, SamplerConfig

MODELS = ("sv", "lg")

DEFAULTS = {
    "model": "sv",
    "theta": None,
    "update_parameters": True,
    "data": {"path": None, "T": 100, "seed": 1},
    "sampler": {
        "kind": "PGAS",
        "M": 25,
        "S": 1000,
        "psi": 0.25,
        "seed": 0,
        "grid": {"N": 10, "lo": -12.0, "hi": 12.0, "eps": 1e-12, "outer_variance": None},
        "freeze": {"s_tilde": 2000, "window": 1000},
        "as_mode": "resampling",
    },
    "output_dir": "results",
    "warmup": 0,
    "replicates": 1,
    "seed_base": 0,
    "ground_truth": None,
    "json_stride": 10,
    "checkpoints": 20,
}


@dataclass(frozen=True)
class DataConfig:
    path: str | None = None
    T: int = 100
    seed: int = 1


@dataclass(frozen=True)
class RunConfig:
    model: str
    theta: object
    update_parameters: bool
    data: DataConfig
    sampler: SamplerConfig
    output_dir: str = "results"
    warmup: int = 0
    replicates: int = 1
    seed_base: int = 0
    ground_truth: str | None = None
    json_stride: int = 10
    checkpoints: int = 20

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigurationError("replicates must be >= 1")
        if not 0 <= self.warmup < self.sampler.S:
            raise ConfigurationError("warmup must lie in [0, S)")
        if self.json_stride < 1 or self.checkpoints < 1:
            raise ConfigurationError("json_stride and checkpoints must be >= 1")
        if self.data.path is not None and not Path(self.data.path).exists():
            raise ConfigurationError(f"dataset {self.data.path} does not exist")
        if self.ground_truth is not None and not Path(self.ground_truth).exists():
            raise ConfigurationError(f"ground truth {self.ground_truth} does not exist")

    def with_sampler(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, sampler=dataclasses.replace(self.sampler, **changes))


def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in (update or {}).items():
        if key not in out:
            raise ConfigurationError(f"unknown config key {key!r}")
        if isinstance(out[key], dict) and isinstance(val, dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def apply_override(doc: dict, assignment: str) -> dict:
    """Apply one ``dotted.key=value`` override to a raw config dict."""
    if "=" not in assignment:
        raise ConfigurationError(f"override {assignment!r} is not of the form key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = doc
    for part in parts[:-1]:
        if part not in node:
            raise ConfigurationError(f"unknown config key {key!r}")
        if node[part] is None:
            node[part] = copy.deepcopy(_default_at(parts[: parts.index(part) + 1]))
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigurationError(f"unknown config key {key!r}")
    node[parts[-1]] = yaml.safe_load(raw)
    return doc


def _default_at(parts):
    node = DEFAULTS
    for p in parts:
        node = node[p]
    return node if node is not None else {}


def model_theta(model: str, theta: dict | None):
    if model == "sv":
        return SV_THETA if theta is None else SvParams(**{k: float(v) for k, v in theta.items()})
    return KalmanModelSpec() if theta is None else KalmanModelSpec(**{k: float(v) for k, v in theta.items()})


def from_dict(doc: dict) -> RunConfig:
    doc = _merge(DEFAULTS, doc)
    if doc["model"] not in MODELS:
        raise ConfigurationError(f"model must be one of {MODELS}")
    s = doc["sampler"]
    try:
        grid = GridConfig(**s["grid"]) if s["grid"] is not None else None
        freeze = FreezePolicy(**s["freeze"]) if s["freeze"] is not None else None
        sampler = SamplerConfig(M=int(s["M"]), S=int(s["S"]), psi=float(s["psi"]), seed=int(s["seed"]),
                                kind=s["kind"], grid=grid, freeze=freeze, as_mode=s["as_mode"])
        theta = model_theta(doc["model"], doc["theta"])
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    return RunConfig(
        model=doc["model"],
        theta=theta,
        update_parameters=bool(doc["update_parameters"]),
        data=DataConfig(**doc["data"]),
        sampler=sampler,
        output_dir=str(doc["output_dir"]),
        warmup=int(doc["warmup"]),
        replicates=int(doc["replicates"]),
        seed_base=int(doc["seed_base"]),
        ground_truth=doc["ground_truth"],
        json_stride=int(doc["json_stride"]),
        checkpoints=int(doc["checkpoints"]),
    )


def load_config(path: str | None = None, overrides=()) -> RunConfig:
    """Read a YAML config (or start from defaults) and apply overrides."""
    doc = _merge(DEFAULTS, {})
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        doc = _merge(doc, yaml.safe_load(text) or {})
    for item in overrides:
        apply_override(doc, item)
    return from_dict(doc)


def to_dict(config: RunConfig) -> dict:
    """Plain-data form of a config (round-trips through :func:`from_dict`)."""
    s = config.sampler
    return {
        "model": config.model,
        "theta": dataclasses.asdict(config.theta),
        "update_parameters": config.update_parameters,
        "data": dataclasses.asdict(config.data),
        "sampler": {
            "kind": s.kind, "M": s.M, "S": s.S, "psi": s.psi, "seed": s.seed,
            "grid": None if s.grid is None else dataclasses.asdict(s.grid),
            "freeze": None if s.freeze is None else dataclasses.asdict(s.freeze),
            "as_mode": s.as_mode,
        },
        "output_dir": config.output_dir,
        "warmup": config.warmup,
        "replicates": config.replicates,
        "seed_base": config.seed_base,
        "ground_truth": config.ground_truth,
        "json_stride": config.json_stride,
        "checkpoints": config.checkpoints,
    }
