"""Synthetic separation and ranked-filtering experiments.

Trains on Crafty instructions for 150 grid routes (plus sub-paths), scores a
held-out corpus of the remaining 50 routes against its mined negatives, then
compares the top-ranked half of that corpus with random halves.

    python scripts/run_separation.py --out runs/separation.json
"""

import argparse
import json
import time
from dataclasses import replace
from pathlib import Path

from navcompat.workbench.experiments import SeparationConfig, filtering_trials, run_separation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps", type=int, default=None, help="override training steps")
    ap.add_argument("--no-subpaths", action="store_true")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    cfg = SeparationConfig(seed=args.seed, subpaths=not args.no_subpaths)
    if args.steps is not None:
        cfg.train = replace(cfg.train, steps=args.steps)
    t0 = time.perf_counter()
    result = run_separation(cfg, log=print)
    ids = [p.id for p in result.eval_pairs]
    labels = [p.label for p in result.eval_pairs]
    filt = filtering_trials(ids, result.scores, labels, trials=100, fraction=0.5, seed=args.seed)
    report = result.summary()
    report["filtering"] = {"wins": filt.wins, "trials": filt.trials,
                           "ranked_positive_fraction": filt.ranked_fraction,
                           "random_positive_fraction_max": max(filt.random_fractions)}
    report["wall_seconds"] = time.perf_counter() - t0
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
