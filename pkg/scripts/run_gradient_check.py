"""Finite-difference gradient check of a tiny model for each loss configuration.

    python scripts/run_gradient_check.py
"""

import argparse

import numpy as np

from navcompat.compat.data import TrainingPair, TrainingSet, sample_minibatch
from navcompat.compat.losses import ClassificationKind, LossConfig
from navcompat.compat.model import CompatModel, ModelConfig
from navcompat.compat.train import dataset_vocab, gradient_check
from navcompat.crafty import build_hmm, compute_idf, generate
from navcompat.workbench.experiments import SYNTHETIC_CRAFTY
from navcompat.workbench.synthetic import SyntheticConfig, build_world

CONFIGS = {
    "ce": LossConfig(ClassificationKind.CE, contrastive=False),
    "focal": LossConfig(ClassificationKind.Focal, contrastive=False),
    "contrastive": LossConfig(None, contrastive=True),
    "combined": LossConfig(ClassificationKind.Focal, contrastive=True),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-params", type=int, default=200)
    args = ap.parse_args()
    world = build_world(SyntheticConfig(rows=5, cols=5, n_objects=12, n_trajectories=16, d_img=4), args.seed)
    hmm = build_hmm(world.graph, world.env, compute_idf(world.env), SYNTHETIC_CRAFTY)
    pairs = [TrainingPair(generate(world.graph, world.env, t, i, hmm=hmm).annotated(), t)
             for i, t in enumerate(world.trajectories)]
    ds = TrainingSet(world.graph, world.features, pairs)
    batch = sample_minibatch(ds, 8, np.random.default_rng(args.seed))
    model = CompatModel.initialize(ModelConfig(dataset_vocab(ds), d_e=5, d_h=3, d_img=4),
                                   np.random.default_rng(args.seed + 1))
    for name, cfg in CONFIGS.items():
        report = gradient_check(model, batch, cfg, n_params=args.n_params, rng=args.seed)
        print(f"{name:<12} {report.summary()}")


if __name__ == "__main__":
    main()
