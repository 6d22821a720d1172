from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from navcompat.compat.data import FeatureCache, Provenance
from navcompat.compat.model import CompatModel, ModelConfig
from navcompat.metrics import bleu4
from navcompat.textperturb import Instruction
from navcompat.workbench.corpus import CorpusConfig, CorpusPair, Manifest, build_training_corpus, pair_positives
from navcompat.workbench.evaluate import (classify_instructions, correlation_report, rank,
                                          rank_and_filter, render_correlation_table)
from navcompat.workbench.experiments import filtering_trials, provenance_counts
from navcompat.workbench.synthetic import SyntheticConfig, build_world

ORIGINAL = "turn left and walk past the couch , then stop by the big table ."
PARAPHRASE = "turn left and walk by the couch , then wait near the table ."


@pytest.fixture(scope="module")
def world():
    return build_world(SyntheticConfig(rows=4, cols=4, n_objects=10, n_trajectories=12, d_img=3), 0)


@pytest.fixture(scope="module")
def positives(world):
    insts = [Instruction(t.id, ORIGINAL if k == 0 else f"go to the couch and turn right . stop number {k} .")
             for k, t in enumerate(world.trajectories)]
    return pair_positives(insts, world.trajectories)


def test_pair_positives_links(world):
    t = world.trajectories[0]
    pairs = pair_positives([Instruction("i0", "go")], world.trajectories, {"i0": t.id})
    assert pairs[0].trajectory == t and pairs[0].label == 1
    with pytest.raises(KeyError):
        pair_positives([Instruction("zz", "go")], world.trajectories)


def test_corpus_without_paraphrases(world, positives):
    manifest = Manifest(0)
    corpus = list(build_training_corpus(positives, world.graph, CorpusConfig(), 0, manifest=manifest))
    prov = Counter(p.provenance for p in corpus)
    assert prov[Provenance.GroundTruth] == 12 and Provenance.Paraphrase not in prov
    assert prov[Provenance.TextPerturbed] + prov[Provenance.PathPerturbed] == 12
    assert prov[Provenance.TextPerturbed] == prov[Provenance.PathPerturbed] == 6
    assert manifest.to_dict()["counts"] == {k.value: v for k, v in sorted(prov.items())}
    for p in corpus:
        if p.provenance in (Provenance.TextPerturbed, Provenance.PathPerturbed):
            assert p.label == 0 and p.source_id and p.method
    no_neg = list(build_training_corpus(positives, world.graph, CorpusConfig(negatives=False), 0))
    assert no_neg == positives


def test_corpus_paraphrases(world, positives):
    assert 0.25 <= bleu4(Instruction("", PARAPHRASE).tokens, [Instruction("", ORIGINAL).tokens]) <= 0.7
    src = positives[0].id
    paras = [(src, Instruction("p0", ORIGINAL)), (src, Instruction("p1", PARAPHRASE))]
    manifest = Manifest(0)
    corpus = list(build_training_corpus(positives, world.graph, CorpusConfig(negatives=False), 0,
                                        paras, manifest))
    accepted = [p for p in corpus if p.provenance is Provenance.Paraphrase]
    assert [p.id for p in accepted] == [f"{src}~para1"]
    assert accepted[0].trajectory == positives[0].trajectory and accepted[0].source_id == src
    assert manifest.rejected_paraphrases == 1
    with pytest.raises(KeyError):
        list(build_training_corpus(positives, world.graph, CorpusConfig(), 0, [("nope", Instruction("x", "go"))]))


def test_corpus_deterministic_and_round_trip(world, positives):
    a = list(build_training_corpus(positives, world.graph, CorpusConfig(), 5))
    b = list(build_training_corpus(positives, world.graph, CorpusConfig(), 5))
    assert [p.to_record() for p in a] == [p.to_record() for p in b]
    for p in a:
        assert CorpusPair.from_record(p.to_record()).to_record() == p.to_record()
    assert sum(provenance_counts(a).values()) == len(a)


def test_corpus_rejects_invalid_positive(world, positives):
    bad = positives[0].trajectory.__class__("grid", ("r00c00", "r03c03"), 0.0, id="bad")
    pair = CorpusPair("bad", positives[0].instruction, bad, Provenance.GroundTruth, 1)
    with pytest.raises(ValueError):
        list(build_training_corpus([pair], world.graph))


def test_classify_label_inversion(world, positives):
    corpus = list(build_training_corpus(positives, world.graph, CorpusConfig(), 0))
    vocab = ("<pad>", "<unk>") + tuple(sorted({w for p in corpus for w in p.instruction.tokens}))
    model = CompatModel.initialize(ModelConfig(vocab, d_e=4, d_h=3, d_img=3), 0)
    views = FeatureCache(world.graph, world.features)
    res = classify_instructions(model, corpus, views)
    flipped = [CorpusPair(p.id, p.instruction, p.trajectory, p.provenance, 1 - p.label) for p in corpus]
    assert classify_instructions(model, flipped, views).auc == pytest.approx(1.0 - res.auc, abs=1e-12)
    assert [r["id"] for r in res.records()] == [p.id for p in corpus]
    assert res.scores == classify_instructions(model, corpus, views, workers=3).scores
    with pytest.raises(ValueError, match="no label"):
        classify_instructions(model, [CorpusPair("u", corpus[0].instruction, corpus[0].trajectory,
                                                 Provenance.Generated)], views)


def test_rank_and_filter_examples():
    scores = {"a": 0.1, "b": 0.9, "c": 0.5, "d": 0.5}
    assert rank_and_filter(scores, 1.0) == rank(scores)
    assert rank(scores).ids == ("b", "c", "d", "a")
    assert rank_and_filter(scores, 0.5).ids == ("b", "c")
    assert len(rank_and_filter(scores, 0.1)) == 1
    for bad in (0.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            rank_and_filter(scores, bad)


@given(st.dictionaries(st.text("abcdef", min_size=1, max_size=3), st.integers(0, 5).map(float), min_size=1, max_size=20))
def test_ranked_set_properties(scores):
    ranked = rank(scores)
    assert all(a >= b for a, b in zip(ranked.scores, ranked.scores[1:]))
    n = len(scores)
    prev = set()
    for k in range(1, n + 1):
        top = set(rank_and_filter(scores, k / n).ids)
        assert len(top) == k and prev <= top
        prev = top


def outcome_records(rng, n_systems=4, per_system=12):
    recs = []
    for s in range(n_systems):
        for i in range(per_system):
            base = s + rng.normal()
            recs.append({"id": f"{s}-{i}", "system": f"sys{s}", "ne": -base, "sr": float(base > s),
                         "spl": base + 0.1 * rng.normal(), "quality": base + rng.normal()})
    return recs


def test_correlation_report_exact_metric():
    recs = outcome_records(np.random.default_rng(0))
    for r in recs:
        r["sr"] = r["ne"] = r["quality"] = r["spl"]
    metric = {r["id"]: r["spl"] for r in recs}
    rows = correlation_report(metric, recs, 100, rng=0)
    assert len(rows) == 8
    assert {(r.outcome, r.level) for r in rows} == {(o, l) for o in ("ne", "sr", "spl", "quality")
                                                   for l in ("system", "instance")}
    for r in rows:
        if r.level == "instance":
            assert r.tau == pytest.approx(1.0) and r.n == 48
    table = render_correlation_table(rows)
    assert len(table.splitlines()) == 9 and "instance" in table
    assert set(rows[0].to_record()) == {"outcome", "level", "tau", "ci", "n"}


def test_correlation_report_random_metric_spans_zero():
    rng = np.random.default_rng(1)
    recs = outcome_records(rng, n_systems=2, per_system=60)
    metric = {r["id"]: float(rng.normal()) for r in recs}
    rows = correlation_report(metric, recs, 300, rng=0, levels=("instance",))
    assert len(rows) == 4
    for r in rows:
        assert r.ci_low < 0 < r.ci_high, r
    assert rows == correlation_report(metric, recs, 300, rng=0, levels=("instance",))
    with pytest.raises(KeyError):
        correlation_report({}, recs, 10, rng=0)


def test_filtering_trials():
    ids = [f"x{i}" for i in range(40)]
    labels = [1] * 20 + [0] * 20
    perfect = filtering_trials(ids, [1.0] * 20 + [0.0] * 20, labels, trials=50, seed=0)
    assert perfect.ranked_fraction == 1.0 and perfect.wins == 50
    backwards = filtering_trials(ids, [0.0] * 20 + [1.0] * 20, labels, trials=50, seed=0)
    assert backwards.ranked_fraction == 0.0 and backwards.wins == 0
    assert filtering_trials(ids, list(range(40)), labels, 20, seed=3) == \
        filtering_trials(ids, list(range(40)), labels, 20, seed=3)
