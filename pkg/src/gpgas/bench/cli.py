"""``gpgas`` command line: simulate, run, ground-truth, report.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, DegenerateWeightsError, ParameterDomainError
from ..ssm import simulate_dataset
from .config import load_config
from .experiment import GroundTruthRejected, make_ground_truth, make_model, run_experiment
from .io import read_results, write_dataset

# flag name -> dotted config key
FLAG_KEYS = {
    "model": "model",
    "dataset": "data.path",
    "T": "data.T",
    "data_seed": "data.seed",
    "kind": "sampler.kind",
    "M": "sampler.M",
    "S": "sampler.S",
    "psi": "sampler.psi",
    "N": "sampler.grid.N",
    "lo": "sampler.grid.lo",
    "hi": "sampler.grid.hi",
    "eps": "sampler.grid.eps",
    "outer_variance": "sampler.grid.outer_variance",
    "s_tilde": "sampler.freeze.s_tilde",
    "window": "sampler.freeze.window",
    "as_mode": "sampler.as_mode",
    "output_dir": "output_dir",
    "warmup": "warmup",
    "replicates": "replicates",
    "seed_base": "seed_base",
    "ground_truth": "ground_truth",
    "json_stride": "json_stride",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field, e.g. sampler.grid.N=25 (repeatable)")
    p.add_argument("--model", choices=("sv", "lg"))
    p.add_argument("--dataset", help="dataset CSV (omit to simulate)")
    p.add_argument("--T", type=int, help="simulated series length")
    p.add_argument("--data-seed", type=int)
    p.add_argument("--kind", choices=("PG", "PGAS", "GPGAS"))
    p.add_argument("--as-mode", choices=("resampling", "every_step"))
    for name, typ in (("M", int), ("S", int), ("psi", float), ("N", int), ("lo", float), ("hi", float),
                      ("eps", float), ("outer-variance", float), ("s-tilde", int), ("window", int),
                      ("warmup", int), ("replicates", int), ("seed-base", int), ("json-stride", int)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--output-dir")
    p.add_argument("--ground-truth", help="ground-truth JSON used for metrics")


def _config_from_args(args):
    overrides = [f"{key}={getattr(args, flag)}" for flag, key in FLAG_KEYS.items()
                 if getattr(args, flag, None) is not None]
    return load_config(args.config, list(args.overrides) + overrides)


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    path, y = simulate_dataset(make_model(config), config.theta, config.data.T, config.data.seed)
    write_dataset(args.out, y, path)
    print(f"wrote {config.data.T} observations to {args.out}")
    return 0


def cmd_run(args) -> int:
    config = _config_from_args(args)
    rows = run_experiment(config)
    print(f"wrote {len(rows)} result rows to {Path(config.output_dir) / 'results.csv'}")
    return 0


def cmd_ground_truth(args) -> int:
    config = _config_from_args(args)
    truth = make_ground_truth(config, min_agreement=args.min_agreement)
    truth.save(args.out)
    print(f"wrote ground truth ({truth.provenance.get('method', 'chains')}) to {args.out}")
    return 0


def cmd_report(args) -> int:
    rows = []
    for path in args.results:
        rows.extend(read_results(path))
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["sampler"], row["N"], row["M"], row["psi"]), []).append(row)
    cols = ("wallclock_s", "mrae_mean", "mrae_var", "mrae_mean_switch", "mrae_mean_nonswitch",
            "not_updated_rate", "mean_ess")
    print("sampler,N,M,psi,replicates," + ",".join(cols))
    for key in sorted(groups, key=lambda k: (k[0], k[1] or 0, k[2], k[3])):
        members = groups[key]
        means = []
        for c in cols:
            vals = [r[c] for r in members if r[c] is not None]
            means.append(f"{np.mean(vals):.6g}" if vals else "")
        sampler, N, M, psi = key
        print(f"{sampler},{'' if N is None else N},{M},{psi},{len(members)}," + ",".join(means))
    return 0


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors (exit 1); 2 is reserved for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress")
    parser = _Parser(prog="gpgas", description="Particle Gibbs samplers and benchmarks.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset CSV", parents=[common])
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="run replicated sampler chains and write metrics", parents=[common])
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ground-truth", help="produce a ground-truth JSON", parents=[common])
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--min-agreement", type=float, default=0.9)
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("report", help="aggregate results CSVs by configuration", parents=[common])
    p.add_argument("results", nargs="+")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ParameterDomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (DegenerateWeightsError, GroundTruthRejected, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
