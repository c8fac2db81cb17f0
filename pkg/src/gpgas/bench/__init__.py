"""Benchmark harness: metrics, configuration, experiments and the CLI."""

from .config import RunConfig, load_config
from .experiment import GroundTruthRejected, make_ground_truth, run_experiment
from .io import RESULT_COLUMNS, GroundTruth, read_dataset, write_dataset
from .metrics import batch_means_stderr, mrae, switching_breakdown

__all__ = [
    "GroundTruth",
    "GroundTruthRejected",
    "RESULT_COLUMNS",
    "RunConfig",
    "batch_means_stderr",
    "load_config",
    "make_ground_truth",
    "mrae",
    "read_dataset",
    "run_experiment",
    "switching_breakdown",
    "write_dataset",
]
