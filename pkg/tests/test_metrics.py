import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from navcompat.metrics import (MetricParams, bleu4, dtw, navigation_error, ndtw, paraphrase_filter,
                               score_path, sdtw, spl, success)
from navcompat.navgraph import NavGraph, Position, Trajectory
from navcompat.textperturb import Instruction, tokenize
from oracles import dtw_brute


@pytest.fixture
def long_line():
    nodes = {f"n{i:02d}": Position(float(i), 0.0, 0.0) for i in range(11)}
    edges = [(f"n{i:02d}", f"n{i + 1:02d}") for i in range(10)]
    nodes["far"] = Position(50.0, 0.0, 0.0)
    return NavGraph(nodes, edges)


def traj(*idx):
    return Trajectory("", tuple(i if isinstance(i, str) else f"n{i:02d}" for i in idx))


def test_navigation_error(long_line):
    ref = traj(0, 1, 2, 3)
    assert navigation_error(long_line, traj(0, 1, 2, 3), ref) == 0.0
    assert navigation_error(long_line, traj(0, 1, 2, 3, 4, 5), ref) == pytest.approx(2.0)
    cut = traj("far", "far")
    assert navigation_error(long_line, cut, ref) == math.inf
    assert success(long_line, cut, ref) == 0


def test_spl_examples(long_line):
    ref = traj(*range(11))
    assert spl(long_line, ref, ref) == 1.0
    # 10 m geodesic, 20 m walked: out to the goal, back 5, and out again
    taken = traj(*range(11), *range(9, 4, -1), *range(6, 11))
    assert spl(long_line, taken, ref) == pytest.approx(0.5)
    assert spl(long_line, traj(0, 1, 2), ref) == 0.0


def test_success_threshold_is_strict(long_line):
    ref = traj(0, 1, 2, 3)
    assert success(long_line, traj(0, 1, 2, 3, 4, 5, 6), ref) == 0
    assert success(long_line, traj(0, 1, 2, 3, 4, 5, 6), ref, MetricParams(3.5)) == 1
    with pytest.raises(ValueError):
        MetricParams(0.0)


def test_dtw_examples():
    a = [(0, 0, 0), (1, 0, 0), (2, 1, 0)]
    assert dtw(a, a) == 0.0 and ndtw(a, a) == 1.0
    ref = [(0, 0, 0), (1, 0, 0)]
    # the one-step example as literally stated has DTW sqrt(2)
    assert dtw([(0, 0, 0), (0, 1, 0)], ref) == pytest.approx(math.sqrt(2))
    assert dtw_brute([(0, 0, 0), (0, 1, 0)], ref) == pytest.approx(math.sqrt(2))
    hyp = [(0, 0, 0), (1, 1, 0)]
    assert dtw(hyp, ref) == pytest.approx(1.0)
    assert ndtw(hyp, ref) == pytest.approx(math.exp(-1 / 6), abs=1e-6)
    assert ndtw(hyp, ref) == pytest.approx(0.8465, abs=1e-4)
    assert sdtw(hyp, ref, False) == 0.0
    assert sdtw(hyp, ref, True) == ndtw(hyp, ref)


def test_dtw_random_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n, m = rng.integers(1, 7, size=2)
        a = rng.normal(size=(n, 3))
        b = rng.normal(size=(m, 3))
        assert dtw(a, b) == pytest.approx(dtw_brute(a, b), abs=1e-9)


points = st.lists(st.tuples(*[st.floats(-5, 5)] * 3), min_size=1, max_size=6)


@given(points, points)
def test_dtw_properties(a, b):
    assert dtw(a, a) == 0.0
    assert dtw(a, b) == pytest.approx(dtw(b, a))
    assert 0.0 < ndtw(a, b) <= 1.0


@given(points, points)
def test_appending_far_point_never_helps(a, b):
    far = [(100.0, 100.0, 100.0)]
    assert ndtw(a + far, b) <= ndtw(a, b)


def test_score_path_invariants(long_line):
    ref = traj(0, 1, 2, 3)
    for taken in (traj(0, 1, 2, 3), traj(0, 1, 2, 3, 4, 5, 6, 7), traj(3, 2, 1), traj("far", "far")):
        s = score_path(long_line, taken, ref)
        assert s.sdtw <= s.ndtw
        assert s.spl <= s.success and s.sdtw <= s.success
        assert set(s.to_record()) == {"ne", "success", "spl", "ndtw", "sdtw"}


def test_bleu_examples():
    cand = "a b c d e".split()
    assert bleu4(cand, [cand]) == 1.0
    assert bleu4("a b c d x".split(), ["x a b y d".split()]) == 0.0
    value = bleu4(cand, ["a b c d f".split()])
    assert value == pytest.approx((4 / 5 * 3 / 4 * 2 / 3 * 1 / 2) ** 0.25)
    assert value == pytest.approx(0.6687, abs=1e-4)


def test_bleu_brevity_penalty():
    cand = "a b c d".split()
    ref = "a b c d e f g h".split()
    assert bleu4(cand, [ref]) == pytest.approx(math.exp(1 - 8 / 4))


def test_bleu_short_candidate_has_no_four_grams():
    assert bleu4(["a", "b", "c"], [["a", "b", "c"]]) == 0.0


def ngram_profile(tokens):
    return [Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)) for n in range(1, 5)]


@given(st.lists(st.sampled_from("ab"), min_size=4, max_size=12),
       st.lists(st.sampled_from("ab"), min_size=1, max_size=12))
def test_bleu_one_characterization(cand, ref):
    value = bleu4(cand, [ref])
    assert 0.0 <= value <= 1.0
    if cand == ref:
        assert value == 1.0
    # a perfect score means the same length and the same n-gram counts up to order 4
    if value == 1.0:
        assert len(cand) == len(ref) and ngram_profile(cand) == ngram_profile(ref)


def test_bleu_one_without_equality():
    # distinct sequences can share every 1..4-gram count
    assert bleu4(list("aaaabaaa"), [list("aaabaaaa")]) == 1.0


def inst(text):
    return Instruction("", text)


def test_paraphrase_filter_examples():
    assert not paraphrase_filter(inst("turn left at the couch"), inst("turn left at the couch"))
    assert not paraphrase_filter(inst("a b c d e"), inst("v w x y z"))
    assert paraphrase_filter(inst("a b c d f"), inst("a b c d e"))


def test_paraphrase_filter_closed_interval():
    ref = tokenize("a b c d f")
    cand = tokenize("a b c d e")
    value = bleu4(cand, [ref])
    assert paraphrase_filter(inst("a b c d f"), inst("a b c d e"), (value, 0.7))
    assert paraphrase_filter(inst("a b c d f"), inst("a b c d e"), (0.25, value))
    assert not paraphrase_filter(inst("a b c d f"), inst("a b c d e"), (0.25, math.nextafter(value, 0)))
    assert not paraphrase_filter(inst("a b c d f"), inst("a b c d e"), (math.nextafter(value, 1), 0.7))
