"""Desk-scale PGAS vs GPGAS benchmark on simulated SV data.

Runs the ground truth (if not cached) and the full sweep, then prints the
three headline checks.  Re-running resumes from the cached results, so an
interrupted run loses at most one chain.

    python3 scripts/desk_reproduction.py --out results/desk
    python3 scripts/desk_reproduction.py --out results/desk_every_step --as-mode every_step \
        --ground-truth results/desk/ground_truth.json
"""

import argparse
import json
import logging
import shutil
from pathlib import Path

from gpgas.bench.desk import DeskSettings, load_and_evaluate, run_desk


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results/desk")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--S", type=int, default=3000)
    p.add_argument("--warmup", type=int, default=1000)
    p.add_argument("--gt-M", type=int, default=2000)
    p.add_argument("--gt-S", type=int, default=20000)
    p.add_argument("--gt-warmup", type=int, default=2000)
    p.add_argument("--gt-min-agreement", type=float, default=0.9)
    p.add_argument("--as-mode", choices=("resampling", "every_step"), default="resampling")
    p.add_argument("--ground-truth", help="reuse an existing ground-truth JSON (and its dataset)")
    p.add_argument("--evaluate-only", action="store_true")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out)
    if not args.evaluate_only:
        settings = DeskSettings(seeds=args.seeds, S=args.S, warmup=args.warmup, gt_M=args.gt_M, gt_S=args.gt_S,
                                gt_warmup=args.gt_warmup, gt_min_agreement=args.gt_min_agreement, as_mode=args.as_mode,
                                s_tilde=args.warmup, window=max(1, args.warmup // 2))
        if args.ground_truth:
            out.mkdir(parents=True, exist_ok=True)
            src = Path(args.ground_truth)
            for name, target in ((src, "ground_truth.json"), (src.parent / "dataset.csv", "dataset.csv")):
                if not (out / target).exists():
                    shutil.copy(name, out / target)
        run_desk(settings, out)
    print(json.dumps(load_and_evaluate(out), indent=1))


if __name__ == "__main__":
    main()
