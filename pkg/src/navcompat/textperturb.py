"""Instruction perturbations: Direction Swap, Entity Swap and Phrase Swap.

Entities and clauses come from corpus annotations when present; otherwise a
rule-based annotator over a small bundled lexicon is used.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .pathperturb import UnsatisfiablePerturbation
from .rng import as_rng, choice

PUNCTUATION = frozenset(".,;!?")
SENTENCE_END = frozenset(".!?")
CLAUSE_BREAK_AFTER = frozenset({",", ";"})
CLAUSE_BREAK_BEFORE = frozenset({"and", "then"})

DIRECTION_SETS: tuple[tuple[str, ...], ...] = (
    ("around", "left", "right"),
    ("bottom", "middle", "top"),
    ("up", "down"),
    ("front", "back"),
    ("above", "under"),
    ("enter", "exit"),
    ("backward", "forward"),
    ("away from", "towards"),
    ("into", "out of"),
    ("inside", "outside"),
)

_TOKEN_RE = re.compile(r"[^\s.,;!?]+|[.,;!?]")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens: Sequence[str]) -> str:
    out = ""
    for tok in tokens:
        if tok in PUNCTUATION or not out:
            out += tok
        else:
            out += " " + tok
    return out


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int
    lemma: str


@dataclass(frozen=True)
class ClauseSpans:
    spans: tuple[tuple[int, int], ...]
    sentence_ids: tuple[int, ...]

    def __post_init__(self):
        if len(self.spans) != len(self.sentence_ids):
            raise ValueError("one sentence id per clause required")

    @property
    def n_sentences(self) -> int:
        return len(set(self.sentence_ids))


@dataclass(frozen=True)
class Instruction:
    id: str
    text: str
    entities: tuple[EntitySpan, ...] | None = None
    clauses: ClauseSpans | None = None
    tokens: tuple[str, ...] = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(tokenize(self.text)))

    @classmethod
    def from_tokens(cls, id: str, tokens: Sequence[str]) -> "Instruction":
        return cls(id, detokenize(tokens))

    def annotated(self) -> "Instruction":
        """Fill in missing annotations with the rule-based annotators."""
        entities = self.entities if self.entities is not None else annotate_entities(self)
        clauses = self.clauses if self.clauses is not None else annotate_clauses(self)
        return replace(self, entities=entities, clauses=clauses)

    def to_record(self) -> dict:
        record = {"id": self.id, "text": self.text}
        if self.entities is not None:
            record["entities"] = [[e.start, e.end, e.lemma] for e in self.entities]
        if self.clauses is not None:
            record["clauses"] = [list(s) for s in self.clauses.spans]
            record["sentences"] = list(self.clauses.sentence_ids)
        return record

    @classmethod
    def from_record(cls, record: dict) -> "Instruction":
        entities = None
        if record.get("entities") is not None:
            entities = tuple(EntitySpan(int(s), int(e), str(l)) for s, e, l in record["entities"])
        clauses = None
        if record.get("clauses") is not None:
            spans = tuple((int(s), int(e)) for s, e in record["clauses"])
            sentences = record.get("sentences") or [0] * len(spans)
            clauses = ClauseSpans(spans, tuple(int(i) for i in sentences))
        return cls(str(record.get("id", "")), str(record["text"]), entities, clauses)


class TextPerturbKind(enum.Enum):
    DirectionSwap = "direction_swap"
    EntitySwap = "entity_swap"
    PhraseSwap = "phrase_swap"


@dataclass(frozen=True)
class PerturbedInstruction:
    instruction: Instruction
    kind: TextPerturbKind
    source_id: str

    def to_record(self) -> dict:
        record = self.instruction.to_record()
        record["kind"] = self.kind.value
        record["source_id"] = self.source_id
        return record


def _result(src: Instruction, tokens, kind: TextPerturbKind) -> PerturbedInstruction:
    new_id = f"{src.id}~{kind.value}" if src.id else ""
    out = Instruction.from_tokens(new_id, tokens)
    if out.text == detokenize(src.tokens):
        raise UnsatisfiablePerturbation(f"{kind.value} left the instruction unchanged")
    return PerturbedInstruction(out, kind, src.id)


# --- lexicon -----------------------------------------------------------------

@dataclass(frozen=True)
class Lexicon:
    determiners: frozenset[str]
    adjectives: frozenset[str]
    nouns: frozenset[str]
    stop_heads: frozenset[str]
    synonyms: dict

    def lemma(self, word: str) -> str:
        if word in self.synonyms:
            return self.synonyms[word]
        stem = word
        if word not in self.nouns:
            if word.endswith("es") and word[:-2] in self.nouns:
                stem = word[:-2]
            elif word.endswith("s") and word[:-1] in self.nouns:
                stem = word[:-1]
            elif word.endswith("es"):
                stem = word[:-2]
            elif word.endswith("s") and len(word) > 1:
                stem = word[:-1]
        return self.synonyms.get(stem, stem)

    def is_noun(self, word: str) -> bool:
        return word in self.nouns or word in self.synonyms or self.lemma(word) in self.nouns


@lru_cache(maxsize=None)
def default_lexicon() -> Lexicon:
    raw = json.loads(resources.files("navcompat").joinpath("data/lexicon.json").read_text())
    return Lexicon(
        determiners=frozenset(raw["determiners"]),
        adjectives=frozenset(raw["adjectives"]),
        nouns=frozenset(raw["nouns"]),
        stop_heads=frozenset(raw["stop_heads"]),
        synonyms=dict(raw["synonyms"]),
    )


# --- annotation ----------------------------------------------------------------

def annotate_entities(inst: Instruction, lexicon: Lexicon | None = None) -> tuple[EntitySpan, ...]:
    """Noun phrases ``det? adj* noun+`` whose head is not on the stop list."""
    lex = lexicon or default_lexicon()
    toks = inst.tokens
    spans = []
    i = 0
    while i < len(toks):
        k = i
        if toks[k] in lex.determiners:
            k += 1
        while k < len(toks) and toks[k] in lex.adjectives and not lex.is_noun(toks[k]):
            k += 1
        head = k
        while k < len(toks) and lex.is_noun(toks[k]):
            k += 1
        if k > head:
            lemma = lex.lemma(toks[k - 1])
            if lemma not in lex.stop_heads and toks[k - 1] not in lex.stop_heads:
                spans.append(EntitySpan(i, k, lemma))
            i = k
        else:
            i += 1
    return tuple(spans)


def annotate_clauses(inst: Instruction) -> ClauseSpans:
    """Split on commas, semicolons, 'and', 'then' and sentence punctuation."""
    toks = inst.tokens
    spans: list[tuple[int, int]] = []
    sentence_ids: list[int] = []
    sentence = 0
    start = 0

    def close(end):
        nonlocal start
        if end > start:
            spans.append((start, end))
            sentence_ids.append(sentence)
        start = end

    for i, tok in enumerate(toks):
        if tok in CLAUSE_BREAK_BEFORE and i > start:
            close(i)
        if tok in SENTENCE_END:
            close(i + 1)
            sentence += 1
        elif tok in CLAUSE_BREAK_AFTER:
            close(i + 1)
    close(len(toks))
    # renumber so that sentence ids are contiguous from 0
    remap = {s: n for n, s in enumerate(dict.fromkeys(sentence_ids))}
    return ClauseSpans(tuple(spans), tuple(remap[s] for s in sentence_ids))


# --- perturbations -------------------------------------------------------------

def _direction_phrases() -> dict[tuple[str, ...], int]:
    phrases = {}
    for set_index, members in enumerate(DIRECTION_SETS):
        for member in members:
            phrases[tuple(member.split())] = set_index
    return phrases


_PHRASES = _direction_phrases()
_MAX_PHRASE = max(len(p) for p in _PHRASES)


def find_direction_phrases(tokens: Sequence[str]) -> list[tuple[int, int, int]]:
    """Longest-match scan. Returns ``(start, end, set_index)`` triples."""
    found = []
    i = 0
    while i < len(tokens):
        for width in range(min(_MAX_PHRASE, len(tokens) - i), 0, -1):
            key = tuple(tokens[i:i + width])
            if key in _PHRASES:
                found.append((i, i + width, _PHRASES[key]))
                i += width
                break
        else:
            i += 1
    return found


def direction_swap(inst: Instruction, rng=None, p_swap: float = 0.5) -> PerturbedInstruction:
    rng = as_rng(rng)
    toks = list(inst.tokens)
    matches = find_direction_phrases(toks)
    if not matches:
        raise UnsatisfiablePerturbation("no directional phrase present")
    chosen = [bool(rng.random() < p_swap) for _ in matches]
    if not any(chosen):
        chosen[int(rng.integers(len(matches)))] = True
    out: list[str] = []
    cursor = 0
    for (start, end, set_index), swap in zip(matches, chosen):
        out.extend(toks[cursor:start])
        phrase = " ".join(toks[start:end])
        if swap:
            options = [m for m in DIRECTION_SETS[set_index] if m != phrase]
            phrase = choice(rng, options)
        out.extend(phrase.split())
        cursor = end
    out.extend(toks[cursor:])
    return _result(inst, out, TextPerturbKind.DirectionSwap)


def entity_swap(inst: Instruction, rng=None, lexicon: Lexicon | None = None) -> PerturbedInstruction:
    """Exchange two entity spans whose lemmas differ."""
    rng = as_rng(rng)
    lex = lexicon or default_lexicon()
    entities = inst.entities if inst.entities is not None else annotate_entities(inst, lex)
    entities = [e for e in entities if e.lemma not in lex.stop_heads]
    pairs = [
        (a, b)
        for i, a in enumerate(entities)
        for b in entities[i + 1:]
        if a.lemma != b.lemma
    ]
    if not pairs:
        raise UnsatisfiablePerturbation("insufficient entities")
    first, second = choice(rng, pairs)
    if first.start > second.start:
        first, second = second, first
    toks = list(inst.tokens)
    out = (
        toks[:first.start]
        + toks[second.start:second.end]
        + toks[first.end:second.start]
        + toks[first.start:first.end]
        + toks[second.end:]
    )
    return _result(inst, out, TextPerturbKind.EntitySwap)


def _remove_clause(toks, spans, sentence_ids, index):
    start, end = spans[index]
    removed = toks[start:end]
    kept = [list(toks[s:e]) for k, (s, e) in enumerate(spans) if k != index]
    same_prev = index > 0 and sentence_ids[index - 1] == sentence_ids[index]
    same_next = index + 1 < len(spans) and sentence_ids[index + 1] == sentence_ids[index]
    if removed[-1] in SENTENCE_END and same_prev:
        # the sentence keeps its terminal punctuation
        prev = kept[index - 1]
        if prev[-1] in CLAUSE_BREAK_AFTER:
            prev[-1] = removed[-1]
        elif prev[-1] not in SENTENCE_END:
            prev.append(removed[-1])
    if not same_prev and same_next and kept[index][0] in CLAUSE_BREAK_BEFORE and len(kept[index]) > 1:
        kept[index] = kept[index][1:]
    return [t for clause in kept for t in clause]


def phrase_swap(inst: Instruction, rng=None) -> PerturbedInstruction:
    """Remove a clause, duplicate a clause, or shuffle all sentences but the last."""
    rng = as_rng(rng)
    clauses = inst.clauses if inst.clauses is not None else annotate_clauses(inst)
    toks = list(inst.tokens)
    spans = list(clauses.spans)
    ids = list(clauses.sentence_ids)
    n_sentences = clauses.n_sentences
    possible = {
        "remove": len(spans) >= 2,
        "duplicate": len(spans) >= 2,
        "shuffle": n_sentences >= 3,
    }
    ops = ["remove", "duplicate", "shuffle"]
    for op in [ops[i] for i in rng.permutation(3)]:
        if not possible[op]:
            continue
        if op == "remove":
            out = _remove_clause(toks, spans, ids, int(rng.integers(len(spans))))
        elif op == "duplicate":
            start, end = spans[int(rng.integers(len(spans)))]
            out = toks[:end] + toks[start:end] + toks[end:]
        else:
            order = list(dict.fromkeys(ids))
            head, identity = order[:-1], list(range(len(order) - 1))
            perm = identity
            while perm == identity:
                perm = [int(p) for p in rng.permutation(len(head))]
            new_order = [head[p] for p in perm] + order[-1:]
            out = [t for sid in new_order
                   for (s, e), cid in zip(spans, ids) if cid == sid
                   for t in toks[s:e]]
        try:
            return _result(inst, out, TextPerturbKind.PhraseSwap)
        except UnsatisfiablePerturbation:
            continue
    raise UnsatisfiablePerturbation("phrase swap impossible: single clause and fewer than 3 sentences")


def perturb_text(inst: Instruction, kind: TextPerturbKind, rng=None) -> PerturbedInstruction:
    if kind is TextPerturbKind.DirectionSwap:
        return direction_swap(inst, rng)
    if kind is TextPerturbKind.EntitySwap:
        return entity_swap(inst, rng)
    return phrase_swap(inst, rng)


def sample_text_negative(inst: Instruction, rng=None) -> PerturbedInstruction:
    rng = as_rng(rng)
    kinds = list(TextPerturbKind)
    for kind in [kinds[i] for i in rng.permutation(len(kinds))]:
        try:
            return perturb_text(inst, kind, rng)
        except UnsatisfiablePerturbation:
            continue
    raise UnsatisfiablePerturbation(f"all perturbations unsatisfiable for {inst.id or inst.text!r}")
