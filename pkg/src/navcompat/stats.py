"""Rank statistics: ROC AUC, Kendall's tau-b, percentile bootstrap intervals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import kendalltau, rankdata

from .rng import as_rng


@dataclass(frozen=True)
class ScoredLabel:
    id: str
    score: float
    label: int


@dataclass(frozen=True)
class PairedOutcome:
    id: str
    metric_score: float
    human_outcome: float


class StatisticError(ValueError):
    pass


def auc(data: Sequence[ScoredLabel]) -> float:
    """Rank-sum AUC; tied scores count one half."""
    scores = np.array([d.score for d in data], dtype=float)
    labels = np.array([d.label for d in data])
    if not np.all(np.isfinite(scores)):
        raise StatisticError("non-finite score")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise StatisticError("auc needs both positive and negative examples")
    ranks = rankdata(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_from_arrays(scores, labels) -> float:
    return auc([ScoredLabel(str(i), float(s), int(l)) for i, (s, l) in enumerate(zip(scores, labels))])


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise StatisticError("x and y must be 1-D and the same length")
    if len(x) < 2:
        raise StatisticError("need at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise StatisticError("tau-b undefined when one input is constant")
    return float(kendalltau(x, y, variant="b").statistic)


def bootstrap_ci(data: Sequence, statistic: Callable[[Sequence], float], n_resamples: int = 1000,
                 level: float = 0.90, rng=None, max_retries: int = 20) -> tuple[float, float]:
    """Percentile interval over with-replacement resamples.

    Each resample draws from its own child seed, so the result does not depend on
    evaluation order. A resample on which ``statistic`` raises is redrawn, up to
    ``max_retries`` times.
    """
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    data = list(data)
    children = _child_seeds(rng, n_resamples)
    values = np.array([_one_resample(data, statistic, c, max_retries) for c in children])
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [tail, 1.0 - tail])
    return float(lo), float(hi)


def _child_seeds(rng, n: int) -> list[np.random.SeedSequence]:
    root = as_rng(rng).integers(0, 2**63 - 1)
    return np.random.SeedSequence(int(root)).spawn(n)


def _one_resample(data, statistic, seed, max_retries: int) -> float:
    gen = np.random.default_rng(seed)
    for attempt in range(max_retries + 1):
        sample = [data[i] for i in gen.integers(0, len(data), size=len(data))]
        try:
            return float(statistic(sample))
        except StatisticError:
            if attempt == max_retries:
                raise


def tau_of_pairs(pairs: Sequence[PairedOutcome]) -> float:
    return kendall_tau_b([p.metric_score for p in pairs], [p.human_outcome for p in pairs])


@dataclass(frozen=True)
class CorrelationResult:
    tau: float
    ci: tuple[float, float]
    n: int


def system_vs_instance_correlation(groups: Mapping[str, Sequence[PairedOutcome]],
                                   n_resamples: int = 1000, level: float = 0.90,
                                   rng=None) -> dict[str, CorrelationResult]:
    """Instance-level tau over pooled pairs and system-level tau over per-system means.

    System-level intervals resample instances within each system.
    """
    if len(groups) < 2:
        raise StatisticError("need at least two systems")
    rng = as_rng(rng)
    systems = sorted(groups)
    pooled = [p for s in systems for p in groups[s]]
    instance = CorrelationResult(
        tau_of_pairs(pooled),
        bootstrap_ci(pooled, tau_of_pairs, n_resamples, level, rng),
        len(pooled),
    )

    def system_tau(per_system) -> float:
        means_m = [np.mean([p.metric_score for p in g]) for g in per_system]
        means_h = [np.mean([p.human_outcome for p in g]) for g in per_system]
        return kendall_tau_b(means_m, means_h)

    point = system_tau([groups[s] for s in systems])
    children = _child_seeds(rng, n_resamples)
    values = []
    for child in children:
        gen = np.random.default_rng(child)
        for attempt in range(21):
            resampled = []
            for s in systems:
                g = list(groups[s])
                resampled.append([g[i] for i in gen.integers(0, len(g), size=len(g))])
            try:
                values.append(system_tau(resampled))
                break
            except StatisticError:
                if attempt == 20:
                    raise
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [tail, 1.0 - tail])
    system = CorrelationResult(point, (float(lo), float(hi)), len(systems))
    return {"instance": instance, "system": system}
