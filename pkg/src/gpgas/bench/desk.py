"""Desk-scale SV benchmark: PGAS vs GPGAS on a short simulated series.

The sweep runs PGAS for each M and GPGAS for each (N, M), all with Gibbs
parameter updates, against a gated long-run PGAS ground truth.  Results are
cached in ``out_dir``:

``dataset.csv``      simulated data with the true path
``ground_truth.json``
``results.csv``      one row per (configuration, seed), standard schema
``curves.json``      ``{label: {seed: {"time": [...], "mrae": [...]}}}``

:func:`evaluate` turns the cached results into the three headline checks.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..models import SV_THETA, SvModel
from ..ssm import simulate_dataset
from .config import load_config
from .experiment import chain_metrics, make_ground_truth, result_row, run_chain
from .io import GroundTruth, read_dataset, read_results, write_dataset, write_results

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeskSettings:
    T: int = 100
    data_seed: int = 1
    seeds: int = 10
    S: int = 3000
    warmup: int = 1000
    psi: float = 0.25
    Ms: tuple = (10, 25, 50)
    Ns: tuple = (10, 25)
    s_tilde: int = 1000
    window: int = 500
    gt_M: int = 2000
    gt_S: int = 20000
    gt_warmup: int = 2000
    gt_min_agreement: float = 0.9
    as_mode: str = "resampling"
    checkpoints: int = 20


def label(kind: str, M: int, N: int | None = None) -> str:
    return f"{kind}_N{N}_M{M}" if kind == "GPGAS" else f"{kind}_M{M}"


def _config(settings: DeskSettings, kind: str, M: int, S: int, warmup: int, N: int | None = None,
            gt_path: str | None = None):
    overrides = [
        "model=sv", f"data.T={settings.T}", f"data.seed={settings.data_seed}",
        f"sampler.kind={kind}", f"sampler.M={M}", f"sampler.S={S}", f"sampler.psi={settings.psi}",
        f"sampler.as_mode={settings.as_mode}", f"warmup={warmup}", f"checkpoints={settings.checkpoints}",
        f"sampler.freeze.s_tilde={settings.s_tilde}", f"sampler.freeze.window={settings.window}",
    ]
    if N is not None:
        overrides.append(f"sampler.grid.N={N}")
    if gt_path is not None:
        overrides.append(f"ground_truth={gt_path}")
    return load_config(None, overrides)


def prepare_data(settings: DeskSettings, out_dir: Path):
    path = out_dir / "dataset.csv"
    if not path.exists():
        truth, y = simulate_dataset(SvModel(), SV_THETA, settings.T, settings.data_seed)
        write_dataset(path, y, truth)
    return read_dataset(path)


def prepare_ground_truth(settings: DeskSettings, out_dir: Path, y) -> GroundTruth:
    path = out_dir / "ground_truth.json"
    if path.exists():
        return GroundTruth.load(path)
    cfg = _config(settings, "PGAS", settings.gt_M, settings.gt_S, settings.gt_warmup)
    log.info("ground truth: PGAS M=%d S=%d", settings.gt_M, settings.gt_S)
    truth = make_ground_truth(cfg, y=y, min_agreement=settings.gt_min_agreement)
    truth.save(path)
    return truth


def sweep_configs(settings: DeskSettings):
    for M in settings.Ms:
        yield "PGAS", M, None
        for N in settings.Ns:
            yield "GPGAS", M, N


def run_desk(settings: DeskSettings, out_dir) -> None:
    """Run (or resume) the full desk benchmark into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "settings.json").write_text(json.dumps(dataclasses.asdict(settings), indent=1))
    y, true_path = prepare_data(settings, out_dir)
    prepare_ground_truth(settings, out_dir, y)
    gt_path = str(out_dir / "ground_truth.json")
    truth = GroundTruth.load(gt_path)
    curves_path = out_dir / "curves.json"
    curves = json.loads(curves_path.read_text()) if curves_path.exists() else {}
    rows = read_results(out_dir / "results.csv") if (out_dir / "results.csv").exists() else []
    done = {(r["sampler"], r["N"], r["M"], r["seed"]) for r in rows}
    # seeds outermost so that slow drift in machine speed hits every configuration alike
    for seed in range(settings.seeds):
        for kind, M, N in sweep_configs(settings):
            if (kind, N, M, seed) in done:
                continue
            cfg = _config(settings, kind, M, settings.S, settings.warmup, N, gt_path)
            chain = run_chain(cfg, y, seed)
            metrics = chain_metrics(chain, cfg.warmup, truth, true_path, cfg.checkpoints)
            rows.append(result_row(cfg, seed, metrics))
            curves.setdefault(label(kind, M, N), {})[str(seed)] = {
                "time": metrics["curve_time"], "mrae": metrics["curve_mrae_mean"],
            }
            log.info("%s seed %d: %.0fs mrae %.4f", label(kind, M, N), seed, metrics["wallclock_s"],
                     metrics["mrae_mean"])
            write_results(out_dir / "results.csv", rows)
            curves_path.write_text(json.dumps(curves))


# -- evaluation -----------------------------------------------------------------------------

def _error_at(curve: dict, tau: float) -> float:
    """Running-mean error at wall-clock tau; NaN before the first checkpoint."""
    t, e = np.asarray(curve["time"]), np.asarray(curve["mrae"])
    if tau < t[0]:
        return np.nan
    if tau >= t[-1]:
        return float(e[-1])
    return float(np.interp(tau, t, e))


def envelope_at(curves: list[dict], tau: float) -> float:
    """Best error any of ``curves`` has reached by wall-clock ``tau``."""
    vals = [_error_at(c, tau) for c in curves]
    vals = [v for v in vals if np.isfinite(v)]
    return min(vals) if vals else np.nan


def evaluate(settings: DeskSettings, rows: list[dict], curves: dict) -> dict:
    """Headline comparisons from cached desk results."""
    seeds = sorted({r["seed"] for r in rows})
    pg_labels = [label("PGAS", M) for M in settings.Ms]
    gp_labels = [label("GPGAS", M, N) for M in settings.Ms for N in settings.Ns]

    paired = []
    for seed in seeds:
        key = str(seed)
        pg = [curves[lab][key] for lab in pg_labels if key in curves.get(lab, {})]
        gp = [curves[lab][key] for lab in gp_labels if key in curves.get(lab, {})]
        if not pg or not gp:
            continue
        tau = min(max(c["time"][-1] for c in pg), max(c["time"][-1] for c in gp))
        e_pg, e_gp = envelope_at(pg, tau), envelope_at(gp, tau)
        paired.append({"seed": seed, "budget_s": tau, "pgas": e_pg, "gpgas": e_gp, "gpgas_wins": bool(e_gp <= e_pg)})

    def mean_of(kind, M, N, field):
        vals = [r[field] for r in rows if r["sampler"] == kind and r["M"] == M and r["N"] == N
                and r[field] is not None]
        return float(np.mean(vals)) if vals else np.nan

    def mean_ratio(kind, M, N):
        vals = [r["mrae_mean_switch"] / r["mrae_mean_nonswitch"] for r in rows
                if r["sampler"] == kind and r["M"] == M and r["N"] == N
                and r["mrae_mean_switch"] is not None and r["mrae_mean_nonswitch"]]
        return float(np.mean(vals)) if vals else np.nan

    update, switching = [], []
    for M in settings.Ms:
        pg_rate = mean_of("PGAS", M, None, "not_updated_rate")
        pg_ratio = mean_ratio("PGAS", M, None)
        for N in settings.Ns:
            gp_rate = mean_of("GPGAS", M, N, "not_updated_rate")
            reduction = 1.0 - gp_rate / pg_rate
            update.append({"N": N, "M": M, "pgas": pg_rate, "gpgas": gp_rate, "reduction": reduction,
                           "ok": bool(reduction >= 0.05)})
            gp_ratio = mean_ratio("GPGAS", M, N)
            switching.append({"N": N, "M": M, "pgas": pg_ratio, "gpgas": gp_ratio, "ok": bool(gp_ratio <= pg_ratio)})

    wins = sum(p["gpgas_wins"] for p in paired)
    return {
        "time_matched": {"pairs": paired, "wins": wins, "n": len(paired), "ok": len(paired) == settings.seeds and wins >= 0.8 * settings.seeds},
        "update_rate": {"configs": update, "ok": bool(update) and all(u["ok"] for u in update)},
        "switching": {"configs": switching, "ok": bool(switching) and all(s["ok"] for s in switching)},
    }


def load_and_evaluate(out_dir, settings: DeskSettings | None = None) -> dict:
    out_dir = Path(out_dir)
    if settings is None:
        doc = json.loads((out_dir / "settings.json").read_text())
        doc["Ms"], doc["Ns"] = tuple(doc["Ms"]), tuple(doc["Ns"])
        settings = DeskSettings(**doc)
    rows = read_results(out_dir / "results.csv")
    curves = json.loads((out_dir / "curves.json").read_text())
    return evaluate(settings, rows, curves)
