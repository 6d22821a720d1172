"""Synthetic separation and ranked-filtering experiments on the grid world."""

from __future__ import annotations

import math
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..compat.data import Provenance, TrainingPair, TrainingSet
from ..compat.model import CompatModel, ModelConfig
from ..compat.train import TrainConfig, dataset_vocab, train
from ..crafty import CraftyParams, build_hmm, compute_idf, generate
from ..navgraph import Trajectory, direction_between
from ..rng import as_rng
from ..textperturb import Instruction
from ..stats import auc_from_arrays
from .corpus import CorpusConfig, CorpusPair, build_training_corpus
from .evaluate import classify_instructions, rank_and_filter
from .synthetic import SyntheticConfig, SyntheticWorld, build_world

# Sharper emission and weaker self-transition than the library defaults, so
# that a 2 m grid yields more than one fixated object per route.
SYNTHETIC_CRAFTY = CraftyParams(sigma_emission=1.0, kappa_self=1.0)


@dataclass
class SeparationConfig:
    world: SyntheticConfig = field(default_factory=SyntheticConfig)
    crafty: CraftyParams = SYNTHETIC_CRAFTY
    n_train: int = 150
    realizations: int = 4
    subpaths: bool = True
    min_subpath: int = 3
    eval_realizations: int = 4
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        d_h=32, steps=9000, batch_size=16, lr=2e-3))
    seed: int = 0


@dataclass
class SeparationResult:
    auc_trained: float
    auc_untrained: float
    per_method: dict[str, float]
    n_eval: int
    train_seconds: float
    losses: list[float]
    model: CompatModel
    eval_pairs: list[CorpusPair]
    scores: np.ndarray

    def summary(self) -> dict:
        return {
            "auc_trained": self.auc_trained,
            "auc_untrained": self.auc_untrained,
            "per_method": self.per_method,
            "n_eval": self.n_eval,
            "train_seconds": self.train_seconds,
            "initial_loss": self.losses[0] if self.losses else None,
            "final_loss": float(np.mean(self.losses[-50:])) if self.losses else None,
        }


def _subpaths(t: Trajectory, graph, min_len: int):
    for a in range(len(t.nodes)):
        for b in range(a + min_len, len(t.nodes) + 1):
            if (a, b) == (0, len(t.nodes)):
                continue
            heading = t.initial_heading if a == 0 else \
                direction_between(graph, t.nodes[a - 1], t.nodes[a]).heading
            yield Trajectory(t.scan, t.nodes[a:b], heading, id=f"{t.id}[{a}:{b}]")


def separation_corpora(world: SyntheticWorld, cfg: SeparationConfig):
    """Training positives and a labeled held-out corpus over disjoint routes.

    Training routes are the first ``n_train`` trajectories plus their contiguous
    sub-paths; any sub-path that coincides with a held-out route is dropped.
    """
    hmm = build_hmm(world.graph, world.env, compute_idf(world.env), cfg.crafty)
    train_t = world.trajectories[:cfg.n_train]
    test_t = world.trajectories[cfg.n_train:]
    held_out = {t.nodes for t in test_t} | {t.nodes[::-1] for t in test_t}
    routes = list(train_t)
    if cfg.subpaths:
        seen = {t.nodes for t in train_t}
        for t in train_t:
            for sub in _subpaths(t, world.graph, cfg.min_subpath):
                if sub.nodes not in seen and sub.nodes not in held_out:
                    seen.add(sub.nodes)
                    routes.append(sub)
    train_pairs = []
    for i, t in enumerate(routes):
        n = cfg.realizations if i < len(train_t) else max(1, cfg.realizations // 2)
        for k in range(n):
            inst = generate(world.graph, world.env, t, (cfg.seed, i, k), hmm=hmm)
            inst = Instruction(f"{t.id}#{k}", inst.text).annotated()
            train_pairs.append(CorpusPair(inst.id, inst, t, Provenance.GroundTruth, 1))
    positives = []
    for i, t in enumerate(test_t):
        for k in range(cfg.eval_realizations):
            inst = generate(world.graph, world.env, t, (cfg.seed, 10**6 + i, k), hmm=hmm)
            inst = Instruction(f"{t.id}#{k}", inst.text).annotated()
            positives.append(CorpusPair(inst.id, inst, t, Provenance.GroundTruth, 1))
    eval_pairs = list(build_training_corpus(positives, world.graph, CorpusConfig(),
                                            as_rng((cfg.seed, 1))))
    return train_pairs, eval_pairs


def per_method_auc(pairs, scores) -> dict[str, float]:
    labels = np.array([p.label for p in pairs])
    scores = np.asarray(scores)
    methods = np.array([p.method or "" for p in pairs])
    out = {}
    for m in sorted(set(methods[labels == 0])):
        sel = (labels == 1) | (methods == m)
        out[str(m)] = auc_from_arrays(scores[sel], labels[sel])
    return out


def run_separation(cfg: SeparationConfig = SeparationConfig(), log=None) -> SeparationResult:
    world = build_world(cfg.world, cfg.seed)
    train_pairs, eval_pairs = separation_corpora(world, cfg)
    dataset = TrainingSet(world.graph, world.features, [p.as_training_pair() for p in train_pairs])
    views = dataset.views
    vocab = dataset_vocab(dataset)
    untrained = CompatModel.initialize(
        ModelConfig(vocab, cfg.train.d_e, cfg.train.d_h, cfg.train.d_img, loss=cfg.train.loss),
        as_rng((cfg.seed, 2)))
    auc0 = classify_instructions(untrained, eval_pairs, views).auc

    def on_step(step, loss, parts):
        if log is not None and (step % 1000 == 0 or step == cfg.train.steps - 1):
            log(f"step {step} loss {loss:.4f}")

    t0 = time.perf_counter()
    result = train(dataset, cfg.train, as_rng((cfg.seed, 3)), vocab=vocab, on_step=on_step)
    seconds = time.perf_counter() - t0
    cls = classify_instructions(result.model, eval_pairs, views)
    scores = np.array([s.score for s in cls.scores])
    return SeparationResult(cls.auc, auc0, per_method_auc(eval_pairs, scores), len(eval_pairs),
                            seconds, result.losses, result.model, eval_pairs, scores)


@dataclass
class OverfitConfig:
    """Eight pairs, always all in the batch: full-batch training on positives only."""

    world: SyntheticConfig = field(default_factory=lambda: SyntheticConfig(
        rows=5, cols=5, n_objects=12, n_trajectories=8, d_img=8))
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        d_e=16, d_h=16, d_img=8, lr=2.5e-3, steps=500, batch_size=8, mix=(1, 0, 0)))
    seed: int = 0


@dataclass
class OverfitResult:
    losses: list[float]
    score_matrix: np.ndarray
    auc: float
    model: CompatModel


def toy_training_set(world: SyntheticWorld, params: CraftyParams = SYNTHETIC_CRAFTY) -> TrainingSet:
    hmm = build_hmm(world.graph, world.env, compute_idf(world.env), params)
    pairs = [TrainingPair(generate(world.graph, world.env, t, i, hmm=hmm).annotated(), t)
             for i, t in enumerate(world.trajectories)]
    return TrainingSet(world.graph, world.features, pairs)


def run_overfit(cfg: OverfitConfig = OverfitConfig()) -> OverfitResult:
    """Train on the toy corpus; AUC treats the score-matrix diagonal as positives."""
    world = build_world(cfg.world, cfg.seed)
    dataset = toy_training_set(world)
    result = train(dataset, cfg.train, as_rng(cfg.seed))
    pairs = dataset.pairs
    S = result.model.score_matrix([p.instruction.tokens for p in pairs],
                                  [dataset.views(p.trajectory) for p in pairs])
    labels = np.eye(len(pairs), dtype=int).ravel()
    return OverfitResult(result.losses, S, auc_from_arrays(S.ravel(), labels), result.model)


@dataclass(frozen=True)
class FilteringResult:
    wins: int
    trials: int
    ranked_fraction: float
    random_fractions: tuple[float, ...]


def filtering_trials(ids, scores, labels, trials: int = 100, fraction: float = 0.5,
                     seed=0) -> FilteringResult:
    """Positive rate of the top-ranked subset against seeded random subsets of equal size."""
    labels_by_id = dict(zip(ids, labels))
    top = rank_and_filter(dict(zip(ids, map(float, scores))), fraction)
    ranked = float(np.mean([labels_by_id[i] for i in top.ids]))
    k = math.ceil(fraction * len(ids))
    label_arr = np.asarray(labels, dtype=float)
    fractions = []
    for child in np.random.SeedSequence(seed).spawn(trials):
        pick = np.random.default_rng(child).choice(len(ids), size=k, replace=False)
        fractions.append(float(label_arr[pick].mean()))
    wins = sum(ranked > f for f in fractions)
    return FilteringResult(wins, trials, ranked, tuple(fractions))


def provenance_counts(pairs) -> dict[str, int]:
    counts: dict[str, int] = defaultdict(int)
    for p in pairs:
        counts[p.method or p.provenance.value] += 1
    return dict(sorted(counts.items()))
