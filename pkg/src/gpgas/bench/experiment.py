"""Replicated sampler runs, metrics against a ground truth, ground-truth runs."""

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, GpgasError
from ..models import KalmanModelSpec, LinearGaussianModel, SvGibbsUpdater, SvModel, kalman_smoother
from ..samplers import ChainRecord, fixed_parameters, run_sampler
from ..ssm import ObservationSeries, StatePath, simulate_dataset
from .config import RunConfig, to_dict
from .io import GroundTruth, chain_document, read_dataset, write_json, write_results
from .metrics import batch_means_stderr, mrae, relative_errors, running_means, switching_breakdown

log = logging.getLogger(__name__)


class GroundTruthRejected(GpgasError):
    """Two independent ground-truth chains disagree beyond the tolerance."""


def make_model(config: RunConfig):
    return SvModel() if config.model == "sv" else LinearGaussianModel()


def make_updater(config: RunConfig):
    if not config.update_parameters:
        return fixed_parameters
    if config.model != "sv":
        raise ConfigurationError("parameter updates are only available for the sv model")
    return SvGibbsUpdater()


def load_data(config: RunConfig) -> tuple[ObservationSeries, StatePath | None]:
    if config.data.path is not None:
        return read_dataset(config.data.path)
    path, y = simulate_dataset(make_model(config), config.theta, config.data.T, config.data.seed)
    return y, path


def replicate_seeds(config: RunConfig) -> list[int]:
    return [config.seed_base + r for r in range(config.replicates)]


def run_chain(config: RunConfig, y: ObservationSeries, seed: int) -> ChainRecord:
    cfg = dataclasses.replace(config.sampler, seed=seed)
    return run_sampler(make_model(config), make_updater(config), y, cfg, config.theta)


def checkpoint_grid(S: int, warmup: int, n: int) -> np.ndarray:
    """Iteration counts (after warmup) at which the error curve is evaluated."""
    kept = S - warmup
    return np.unique(np.linspace(kept / n, kept, n).round().astype(np.int64).clip(1, kept))


def chain_metrics(chain: ChainRecord, warmup: int, truth: GroundTruth | None,
                  true_path: StatePath | None, checkpoints: int = 20) -> dict:
    """Scalar metrics of one chain plus its error-vs-time curve."""
    d = chain.diagnostics
    out = {
        "iterations": chain.S,
        "wallclock_s": float(d.wallclock.sum()),
        "not_updated_rate": d.not_updated_rate(warmup),
        "mean_ess": float(d.ess[warmup:].mean()),
        "mrae_mean": None,
        "mrae_var": None,
        "mrae_mean_switch": None,
        "mrae_mean_nonswitch": None,
        "zero_guard": False,
        "curve_time": [],
        "curve_mrae_mean": [],
    }
    if truth is None:
        return out
    if truth.T != chain.values.shape[1]:
        raise ConfigurationError("ground truth length does not match the data")
    mean, var = chain.posterior_moments(warmup)
    out["mrae_mean"] = mrae(mean, truth.mean)
    out["mrae_var"] = mrae(var, truth.var)
    out["zero_guard"] = relative_errors(mean, truth.mean)[1] or relative_errors(var, truth.var)[1]
    if true_path is not None:
        sw, nsw = switching_breakdown(mean, truth.mean, true_path.regimes)
        out["mrae_mean_switch"], out["mrae_mean_nonswitch"] = sw, nsw
    cps = checkpoint_grid(chain.S, warmup, checkpoints)
    means = running_means(chain.values[warmup:], cps)
    elapsed = np.cumsum(d.wallclock)
    out["curve_time"] = elapsed[warmup + cps - 1].tolist()
    out["curve_mrae_mean"] = [mrae(m, truth.mean) for m in means]
    return out


def result_row(config: RunConfig, seed: int, metrics: dict) -> dict:
    s = config.sampler
    row = {k: metrics[k] for k in ("iterations", "wallclock_s", "mrae_mean", "mrae_var", "mrae_mean_switch",
                                   "mrae_mean_nonswitch", "not_updated_rate", "mean_ess")}
    row.update(sampler=s.kind, N=s.grid.N if s.kind == "GPGAS" else None, M=s.M, psi=s.psi, seed=seed)
    return row


def chain_filename(config: RunConfig, seed: int) -> str:
    s = config.sampler
    grid = f"_N{s.grid.N}" if s.kind == "GPGAS" else ""
    return f"{s.kind}{grid}_M{s.M}_seed{seed}.json"


def run_experiment(config: RunConfig, write: bool = True, y: ObservationSeries | None = None,
                   true_path: StatePath | None = None) -> list[dict]:
    """Run every replicate of ``config``; returns result rows (and writes CSV/JSON)."""
    if y is None:
        y, true_path = load_data(config)
    truth = GroundTruth.load(config.ground_truth) if config.ground_truth else None
    rows = []
    out_dir = Path(config.output_dir)
    for seed in replicate_seeds(config):
        chain = run_chain(config, y, seed)
        metrics = chain_metrics(chain, config.warmup, truth, true_path, config.checkpoints)
        rows.append(result_row(config, seed, metrics))
        log.info("%s seed=%d: %.1fs", chain_filename(config, seed), seed, metrics["wallclock_s"])
        if write:
            doc = chain_document(chain, to_dict(config), seed, config.json_stride, metrics)
            write_json(out_dir / "chains" / chain_filename(config, seed), doc)
    if write:
        write_results(out_dir / "results.csv", rows)
    return rows


def agreement_fraction(a: ChainRecord, b: ChainRecord, warmup: int, z: float = 2.0) -> float:
    """Share of time points whose posterior means agree within z pooled MC standard errors."""
    va, vb = a.values[warmup:], b.values[warmup:]
    se = np.sqrt(batch_means_stderr(va) ** 2 + batch_means_stderr(vb) ** 2)
    diff = np.abs(va.mean(axis=0) - vb.mean(axis=0))
    return float(np.mean(diff <= z * se))


def make_ground_truth(config: RunConfig, y: ObservationSeries | None = None, min_agreement: float = 0.9,
                      z: float = 2.0) -> GroundTruth:
    """Long-run posterior moments of the continuous state.

    Linear-Gaussian models with fixed parameters use the exact smoother.
    Otherwise two chains (seeds ``seed_base`` and ``seed_base + 1``) are run
    and pooled; if fewer than ``min_agreement`` of the time points agree
    within ``z`` pooled standard errors, :class:`GroundTruthRejected` is raised.
    """
    if y is None:
        y, _ = load_data(config)
    if config.model == "lg" and not config.update_parameters:
        theta = config.theta if isinstance(config.theta, KalmanModelSpec) else KalmanModelSpec()
        res = kalman_smoother(theta, y)
        return GroundTruth(res.smooth_means, res.smooth_vars, None,
                           {"method": "kalman", "theta": dataclasses.asdict(theta)})
    seeds = (config.seed_base, config.seed_base + 1)
    chains = [run_chain(config, y, s) for s in seeds]
    w = config.warmup
    frac = agreement_fraction(chains[0], chains[1], w, z)
    provenance = {
        "sampler": config.sampler.kind, "M": config.sampler.M, "S": config.sampler.S,
        "psi": config.sampler.psi, "warmup": w, "seeds": list(seeds), "agreement": frac,
        "wallclock_s": [float(c.diagnostics.wallclock.sum()) for c in chains],
    }
    if frac < min_agreement:
        raise GroundTruthRejected(
            f"ground-truth chains agree at only {frac:.0%} of time points (need {min_agreement:.0%})"
        )
    values = np.concatenate([c.values[w:] for c in chains])
    regimes = np.concatenate([c.regimes[w:] for c in chains])
    R = make_model(config).regime_count
    probs = np.stack([(regimes == k).mean(axis=0) for k in range(R)], axis=1)
    return GroundTruth(values.mean(axis=0), values.var(axis=0), probs, provenance)
