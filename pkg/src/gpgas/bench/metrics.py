"""Accuracy and mixing metrics for posterior summaries."""

from __future__ import annotations

import numpy as np

ZERO_GUARD = 1e-8


def relative_errors(estimates, truth) -> tuple[np.ndarray, bool]:
    """Per-t |est - truth| / |truth|; absolute error where |truth| < 1e-8.

    Returns the errors and whether the zero guard fired anywhere.
    """
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {tru.shape}")
    small = np.abs(tru) < ZERO_GUARD
    denom = np.where(small, 1.0, np.abs(tru))
    return np.abs(est - tru) / denom, bool(small.any())


def mrae(estimates, truth) -> float:
    """Mean relative absolute error over time points."""
    err, _ = relative_errors(estimates, truth)
    return float(err.mean())


def switch_mask(regimes_truth, s0: int = 0) -> np.ndarray:
    """True where s_t differs from s_{t-1}; t = 1 is compared against s0."""
    s = np.asarray(regimes_truth)
    prev = np.concatenate(([s0], s[:-1]))
    return s != prev


def switching_breakdown(estimates, truth, regimes_truth, s0: int = 0) -> tuple[float | None, float | None]:
    """(MRAE over switching times, MRAE over non-switching times).

    An empty partition is reported as ``None``.
    """
    err, _ = relative_errors(estimates, truth)
    mask = switch_mask(regimes_truth, s0)
    sw = float(err[mask].mean()) if mask.any() else None
    nsw = float(err[~mask].mean()) if (~mask).any() else None
    return sw, nsw


def batch_means_stderr(samples, n_batches: int = 50) -> np.ndarray:
    """Monte Carlo standard error of the column means via non-overlapping batch means."""
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    n_batches = min(n_batches, n)
    size = n // n_batches
    if size < 1 or n_batches < 2:
        raise ValueError("not enough samples for batch means")
    batches = x[: size * n_batches].reshape((n_batches, size) + x.shape[1:]).mean(axis=1)
    return batches.std(axis=0, ddof=1) / np.sqrt(n_batches)


def running_means(values, checkpoints) -> np.ndarray:
    """Posterior-mean estimates using samples [0, c) for each checkpoint c."""
    values = np.asarray(values, dtype=float)
    csum = np.cumsum(values, axis=0)
    idx = np.asarray(checkpoints, dtype=np.int64)
    return csum[idx - 1] / idx[:, None]


def running_variances(values, checkpoints) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    idx = np.asarray(checkpoints, dtype=np.int64)
    m1 = np.cumsum(values, axis=0)[idx - 1] / idx[:, None]
    m2 = np.cumsum(values * values, axis=0)[idx - 1] / idx[:, None]
    return np.maximum(m2 - m1 * m1, 0.0)
