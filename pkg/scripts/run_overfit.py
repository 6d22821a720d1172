"""Overfit an 8-pair toy corpus and report the loss ratio and score-matrix AUC.

    python scripts/run_overfit.py
"""

import argparse
import json

from navcompat.workbench.experiments import OverfitConfig, run_overfit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    res = run_overfit(OverfitConfig(seed=args.seed))
    print(json.dumps({
        "initial_loss": res.losses[0],
        "final_loss": res.losses[-1],
        "ratio": res.losses[-1] / res.losses[0],
        "auc": res.auc,
    }, indent=2))


if __name__ == "__main__":
    main()
