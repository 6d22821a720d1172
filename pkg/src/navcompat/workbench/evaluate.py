"""Classification AUC, ranked filtering, and metric/outcome correlation reports."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..compat.data import FeatureCache
from ..compat.model import CompatModel
from ..stats import PairedOutcome, ScoredLabel, auc, system_vs_instance_correlation
from .corpus import CorpusPair

OUTCOMES = ("ne", "sr", "spl", "quality")
LEVELS = ("system", "instance")


def score_corpus(model: CompatModel, pairs: Sequence[CorpusPair], views: FeatureCache,
                 workers: int = 1, chunk: int = 64) -> np.ndarray:
    """Scores in corpus order. Chunk boundaries do not depend on ``workers``."""
    tokens = [p.instruction.tokens for p in pairs]
    feats = [views(p.trajectory) for p in pairs]
    starts = list(range(0, len(pairs), chunk))

    def run(start: int) -> np.ndarray:
        return model.score_pairs(tokens[start:start + chunk], feats[start:start + chunk], chunk=chunk)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return np.concatenate(parts) if parts else np.zeros(0)


@dataclass(frozen=True)
class ClassificationResult:
    auc: float
    scores: list[ScoredLabel]

    def records(self) -> list[dict]:
        return [{"id": s.id, "score": s.score, "label": s.label} for s in self.scores]


def classify_instructions(model: CompatModel, pairs: Sequence[CorpusPair], views: FeatureCache,
                          workers: int = 1) -> ClassificationResult:
    missing = [p.id for p in pairs if p.label is None]
    if missing:
        raise ValueError(f"{len(missing)} pairs have no label, e.g. {missing[0]}")
    scores = score_corpus(model, pairs, views, workers)
    scored = [ScoredLabel(p.id, float(s), int(p.label)) for p, s in zip(pairs, scores)]
    return ClassificationResult(auc(scored), scored)


@dataclass(frozen=True)
class RankedSet:
    ids: tuple[str, ...]
    scores: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.ids)

    def records(self) -> list[dict]:
        return [{"id": i, "score": s, "rank": k} for k, (i, s) in enumerate(zip(self.ids, self.scores))]


def rank(scores: Mapping[str, float]) -> RankedSet:
    order = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return RankedSet(tuple(k for k, _ in order), tuple(float(v) for _, v in order))


def rank_and_filter(scores: Mapping[str, float], fraction: float) -> RankedSet:
    """Top ``ceil(fraction * n)`` by descending score, ties broken by id."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    ranked = rank(scores)
    k = math.ceil(fraction * len(ranked))
    return RankedSet(ranked.ids[:k], ranked.scores[:k])


@dataclass(frozen=True)
class CorrelationRow:
    outcome: str
    level: str
    tau: float
    ci_low: float
    ci_high: float
    n: int

    def to_record(self) -> dict:
        return {"outcome": self.outcome, "level": self.level, "tau": self.tau,
                "ci": [self.ci_low, self.ci_high], "n": self.n}


def correlation_report(metric_scores: Mapping[str, float], outcomes: Sequence[Mapping],
                       n_resamples: int = 1000, level: float = 0.90, rng=None,
                       outcome_names: Sequence[str] = OUTCOMES,
                       levels: Sequence[str] = LEVELS) -> list[CorrelationRow]:
    """Kendall tau-b of a metric against each human outcome at both levels.

    ``outcomes`` records carry ``id``, ``system`` and one field per outcome name.
    """
    rows = []
    for name in outcome_names:
        groups: dict[str, list[PairedOutcome]] = {}
        for rec in outcomes:
            if rec["id"] not in metric_scores:
                raise KeyError(f"no metric score for id {rec['id']}")
            groups.setdefault(str(rec["system"]), []).append(
                PairedOutcome(str(rec["id"]), float(metric_scores[rec["id"]]), float(rec[name])))
        result = system_vs_instance_correlation(groups, n_resamples, level, rng)
        for lvl in levels:
            r = result[lvl]
            rows.append(CorrelationRow(name, lvl, r.tau, r.ci[0], r.ci[1], r.n))
    return rows


def render_correlation_table(rows: Sequence[CorrelationRow]) -> str:
    lines = [f"{'outcome':<8} {'level':<9} {'tau':>7}  {'CI':<17} {'n':>5}"]
    for r in rows:
        ci = f"[{r.ci_low:+.3f}, {r.ci_high:+.3f}]"
        lines.append(f"{r.outcome:<8} {r.level:<9} {r.tau:+7.3f}  {ci:<17} {r.n:>5}")
    return "\n".join(lines)
