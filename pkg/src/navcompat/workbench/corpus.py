"""Labeled instruction/trajectory corpora with mined hard negatives."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from ..compat.data import UNPERTURBED, Provenance, TrainingPair
from ..metrics import PARAPHRASE_BLEU_RANGE, paraphrase_filter
from ..navgraph import NavGraph, Trajectory, validate_trajectory
from ..pathperturb import UnsatisfiablePerturbation, sample_path_negative
from ..rng import as_rng
from ..textperturb import Instruction, sample_text_negative


@dataclass(frozen=True)
class CorpusPair:
    id: str
    instruction: Instruction
    trajectory: Trajectory
    provenance: Provenance
    label: int | None = None
    source_id: str | None = None
    method: str | None = None

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "instruction": self.instruction.to_record(),
            "trajectory": self.trajectory.to_record(),
            "provenance": self.provenance.value,
        }
        if self.label is not None:
            rec["label"] = self.label
        if self.source_id is not None:
            rec["source_id"] = self.source_id
        if self.method is not None:
            rec["method"] = self.method
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "CorpusPair":
        label = rec.get("label")
        return cls(
            str(rec["id"]),
            Instruction.from_record(rec["instruction"]),
            Trajectory.from_record(rec["trajectory"]),
            Provenance(rec.get("provenance", "GroundTruth")),
            None if label is None else int(label),
            rec.get("source_id"),
            rec.get("method"),
        )

    def as_training_pair(self) -> TrainingPair:
        return TrainingPair(self.instruction, self.trajectory, self.provenance)


@dataclass
class CorpusConfig:
    bleu_range: tuple[float, float] = PARAPHRASE_BLEU_RANGE
    negatives: bool = True
    mix: tuple[int, int, int] = (2, 1, 1)


@dataclass
class Manifest:
    seed: int | None
    counts: Counter = field(default_factory=Counter)
    rejected_paraphrases: int = 0
    unsatisfiable: int = 0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "counts": {k.value if isinstance(k, Provenance) else k: v for k, v in sorted(self.counts.items())},
            "rejected_paraphrases": self.rejected_paraphrases,
            "unsatisfiable": self.unsatisfiable,
        }


def pair_positives(instructions: Sequence[Instruction], trajectories: Sequence[Trajectory],
                   links: Mapping[str, str] | None = None) -> list[CorpusPair]:
    """Join instructions to trajectories; ``links`` maps instruction id to trajectory id."""
    by_id = {t.id: t for t in trajectories}
    out = []
    for inst in instructions:
        tid = (links or {}).get(inst.id, inst.id)
        if tid not in by_id:
            raise KeyError(f"instruction {inst.id} refers to unknown trajectory {tid}")
        out.append(CorpusPair(inst.id, inst, by_id[tid], Provenance.GroundTruth, 1))
    return out


def build_training_corpus(positives: Sequence[CorpusPair], graph: NavGraph,
                          config: CorpusConfig = CorpusConfig(), rng=None,
                          paraphrases: Iterable[tuple[str, Instruction]] = (),
                          manifest: Manifest | None = None) -> Iterator[CorpusPair]:
    """Positives, accepted paraphrases, then one mined negative per unperturbed pair.

    ``paraphrases`` yields ``(source_id, paraphrase)``. Negatives are split between
    text and path perturbations in the ``mix[1]:mix[2]`` proportion, assigned in
    a seeded shuffled order so the overall ratio matches ``mix``.
    """
    rng = as_rng(rng)
    manifest = manifest if manifest is not None else Manifest(None)
    by_id = {}
    unperturbed = []
    for pair in positives:
        problems = validate_trajectory(graph, pair.trajectory)
        if problems:
            raise ValueError(f"pair {pair.id}: {'; '.join(problems)}")
        if pair.provenance not in UNPERTURBED:
            raise ValueError(f"pair {pair.id} is not a positive ({pair.provenance.value})")
        by_id[pair.id] = pair
        unperturbed.append(pair)
        manifest.counts[pair.provenance] += 1
        yield pair
    for k, (source_id, para) in enumerate(paraphrases):
        src = by_id.get(source_id)
        if src is None:
            raise KeyError(f"paraphrase refers to unknown pair {source_id}")
        if not paraphrase_filter(src.instruction, para, config.bleu_range):
            manifest.rejected_paraphrases += 1
            continue
        out = CorpusPair(f"{source_id}~para{k}", para.annotated(), src.trajectory,
                         Provenance.Paraphrase, 1, source_id)
        unperturbed.append(out)
        manifest.counts[Provenance.Paraphrase] += 1
        yield out
    if not config.negatives:
        return
    _, n_text, n_path = config.mix
    order = rng.permutation(len(unperturbed))
    for rank, idx in enumerate(order):
        pair = unperturbed[idx]
        want_text = (rank % (n_text + n_path)) < n_text if n_text + n_path else False
        kinds = (True, False) if want_text else (False, True)
        for text_side in kinds:
            try:
                neg = _negative(pair, graph, rng, text_side)
            except UnsatisfiablePerturbation:
                continue
            manifest.counts[neg.provenance] += 1
            yield neg
            break
        else:
            manifest.unsatisfiable += 1


def _negative(pair: CorpusPair, graph: NavGraph, rng, text_side: bool) -> CorpusPair:
    if text_side:
        out = sample_text_negative(pair.instruction.annotated(), rng)
        return CorpusPair(f"{pair.id}~{out.kind.value}", out.instruction, pair.trajectory,
                          Provenance.TextPerturbed, 0, pair.id, out.kind.value)
    out = sample_path_negative(graph, pair.trajectory, rng)
    return CorpusPair(f"{pair.id}~{out.kind.value}", pair.instruction, out.trajectory,
                      Provenance.PathPerturbed, 0, pair.id, out.kind.value)
