"""Path metrics (NE, SR, SPL, DTW family) and sentence BLEU-4."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .navgraph import NavGraph, Trajectory, path_length, shortest_path_length

PARAPHRASE_BLEU_RANGE = (0.25, 0.7)


@dataclass(frozen=True)
class MetricParams:
    success_threshold: float = 3.0

    def __post_init__(self):
        if not self.success_threshold > 0:
            raise ValueError("success threshold must be positive")


@dataclass(frozen=True)
class PathScore:
    ne: float
    success: int
    spl: float
    ndtw: float
    sdtw: float

    def to_record(self) -> dict:
        return asdict(self)


def navigation_error(graph: NavGraph, taken: Trajectory, ref: Trajectory) -> float:
    return shortest_path_length(graph, taken.nodes[-1], ref.nodes[-1])


def success(graph: NavGraph, taken: Trajectory, ref: Trajectory,
            params: MetricParams = MetricParams()) -> int:
    return int(navigation_error(graph, taken, ref) < params.success_threshold)


def spl(graph: NavGraph, taken: Trajectory, ref: Trajectory,
        params: MetricParams = MetricParams()) -> float:
    if not success(graph, taken, ref, params):
        return 0.0
    shortest = shortest_path_length(graph, ref.nodes[0], ref.nodes[-1])
    taken_len = path_length(graph, taken.nodes)
    denom = max(shortest, taken_len)
    return 1.0 if denom == 0.0 else shortest / denom


def dtw(hyp: Sequence[Sequence[float]], ref: Sequence[Sequence[float]]) -> float:
    """Minimum-cost monotone alignment with Euclidean pair costs."""
    a = np.asarray(hyp, dtype=float)
    b = np.asarray(ref, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("dtw needs non-empty sequences")
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = cost[i - 1, j - 1] + min(acc[i - 1, j], acc[i, j - 1], acc[i - 1, j - 1])
    return float(acc[n, m])


def ndtw(hyp, ref, threshold: float = 3.0) -> float:
    return math.exp(-dtw(hyp, ref) / (len(ref) * threshold))


def sdtw(hyp, ref, succeeded: bool | int, threshold: float = 3.0) -> float:
    return float(bool(succeeded)) * ndtw(hyp, ref, threshold)


def positions(graph: NavGraph, t: Trajectory) -> list[tuple[float, float, float]]:
    return [tuple(graph.position(n)) for n in t.nodes]


def score_path(graph: NavGraph, taken: Trajectory, ref: Trajectory,
               params: MetricParams = MetricParams()) -> PathScore:
    ne = navigation_error(graph, taken, ref)
    ok = int(ne < params.success_threshold)
    nd = ndtw(positions(graph, taken), positions(graph, ref), params.success_threshold)
    return PathScore(ne=ne, success=ok, spl=spl(graph, taken, ref, params), ndtw=nd, sdtw=ok * nd)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """Unsmoothed sentence BLEU with uniform weights over 1..4-grams."""
    if not candidate:
        raise ValueError("empty candidate")
    if not references:
        raise ValueError("no references")
    log_precision = 0.0
    for n in range(1, 5):
        cand = _ngrams(candidate, n)
        total = sum(cand.values())
        if total == 0:
            return 0.0
        max_ref: Counter = Counter()
        for ref in references:
            max_ref |= _ngrams(ref, n)
        clipped = sum(min(count, max_ref[g]) for g, count in cand.items())
        if clipped == 0:
            return 0.0
        log_precision += math.log(clipped / total) / 4
    c = len(candidate)
    r = min((len(ref) for ref in references), key=lambda length: (abs(length - c), length))
    brevity = math.exp(min(0.0, 1.0 - r / c))
    return brevity * math.exp(log_precision)


def paraphrase_filter(original, paraphrase, bleu_range=PARAPHRASE_BLEU_RANGE) -> bool:
    """Keep paraphrases that are neither near-duplicates nor unrelated."""
    if not paraphrase.tokens:
        return False
    lo, hi = bleu_range
    return lo <= bleu4(paraphrase.tokens, [original.tokens]) <= hi
