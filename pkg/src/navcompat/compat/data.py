"""Training pairs, feature caching, and 2:1:1 minibatch sampling."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..navgraph import NavGraph, Trajectory
from ..pathperturb import UnsatisfiablePerturbation, sample_path_negative
from ..rng import as_rng, choice
from ..textperturb import Instruction, sample_text_negative
from .features import StackedViews, build_view_features, stack_views


class Provenance(str, enum.Enum):
    GroundTruth = "GroundTruth"
    Paraphrase = "Paraphrase"
    TextPerturbed = "TextPerturbed"
    PathPerturbed = "PathPerturbed"
    Generated = "Generated"


UNPERTURBED = frozenset({Provenance.GroundTruth, Provenance.Paraphrase})


@dataclass(frozen=True)
class TrainingPair:
    instruction: Instruction
    trajectory: Trajectory
    provenance: Provenance = Provenance.GroundTruth


def trajectory_key(t: Trajectory) -> tuple:
    return (t.scan, t.nodes, t.initial_heading)


class FeatureCache:
    """Stacked view features per trajectory, built on first use."""

    def __init__(self, graph: NavGraph, image_features: Mapping[str, np.ndarray]):
        self.graph = graph
        self.image_features = image_features
        self._cache: dict[tuple, StackedViews] = {}

    def __call__(self, t: Trajectory) -> StackedViews:
        key = trajectory_key(t)
        views = self._cache.get(key)
        if views is None:
            views = stack_views(build_view_features(self.graph, t, self.image_features))
            self._cache[key] = views
        return views


class TrainingSet:
    """Positive pairs grouped by trajectory; negatives are generated per batch."""

    def __init__(self, graph: NavGraph, image_features: Mapping[str, np.ndarray],
                 pairs: Sequence[TrainingPair]):
        self.graph = graph
        self.views = FeatureCache(graph, image_features)
        self.pairs = list(pairs)
        groups: dict[tuple, list[TrainingPair]] = {}
        for pair in self.pairs:
            if pair.provenance not in UNPERTURBED:
                raise ValueError(f"training positives must be unperturbed, got {pair.provenance}")
            groups.setdefault(trajectory_key(pair.trajectory), []).append(pair)
        self.groups = [groups[k] for k in sorted(groups, key=lambda k: (k[0], k[1], k[2]))]

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class Minibatch:
    instructions: list[Instruction]
    trajectories: list[Trajectory]
    views: list[StackedViews]
    mask: np.ndarray
    provenance: list[Provenance]
    methods: list[str | None]

    def __len__(self) -> int:
        return len(self.instructions)

    def tokens(self) -> list[tuple[str, ...]]:
        return [i.tokens for i in self.instructions]


def mix_counts(n: int, mix: Sequence[int]) -> tuple[int, int, int]:
    total = sum(mix)
    if n % total:
        raise ValueError(f"batch size {n} is not divisible by mix total {total}")
    unit = n // total
    return mix[0] * unit, mix[1] * unit, mix[2] * unit


def sample_minibatch(dataset: TrainingSet, n: int, rng=None, mix: Sequence[int] = (2, 1, 1)) -> Minibatch:
    """Ground truth, text-perturbed and path-perturbed pairs in the given ratio.

    Every pair comes from a different trajectory, so in-batch negatives are
    never accidental positives.
    """
    rng = as_rng(rng)
    n_pos, n_text, n_path = mix_counts(n, mix)
    if len(dataset.groups) < n:
        raise ValueError(f"insufficient data: {len(dataset.groups)} trajectories for batch of {n}")
    order = rng.permutation(len(dataset.groups))
    insts, trajs, prov, methods = [], [], [], []
    want = [(Provenance.GroundTruth, n_pos), (Provenance.TextPerturbed, n_text),
            (Provenance.PathPerturbed, n_path)]
    kind_index = 0
    filled = 0
    for g in order:
        while kind_index < len(want) and filled == want[kind_index][1]:
            kind_index += 1
            filled = 0
        if kind_index == len(want):
            break
        kind = want[kind_index][0]
        pair = choice(rng, dataset.groups[g])
        inst, traj, method = pair.instruction, pair.trajectory, None
        try:
            if kind is Provenance.TextPerturbed:
                out = sample_text_negative(inst, rng)
                inst, method = out.instruction, out.kind.value
            elif kind is Provenance.PathPerturbed:
                out = sample_path_negative(dataset.graph, traj, rng)
                traj, method = out.trajectory, out.kind.value
        except UnsatisfiablePerturbation:
            continue
        insts.append(inst)
        trajs.append(traj)
        prov.append(pair.provenance if kind is Provenance.GroundTruth else kind)
        methods.append(method)
        filled += 1
    if len(insts) < n:
        raise ValueError("insufficient data: could not fill the batch with valid perturbations")
    mask = np.array([1.0 if p in UNPERTURBED else 0.0 for p in prov])
    return Minibatch(insts, trajs, [dataset.views(t) for t in trajs], mask, prov, methods)
