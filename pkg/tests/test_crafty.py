import json
import math
import re

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import DATA, GOLDEN, pos
from navcompat.crafty import (CraftyHmm, CraftyParams, DirectionType, EnvObject, EnvObjects,
                              build_hmm, build_motion_sequence, compute_idf, default_templates,
                              direction_type, generate, load_objects, realize_instruction,
                              sequence_log_prob, viterbi)
from navcompat.crafty.talker import collapse_repeats
from navcompat.navgraph import NavGraph, Trajectory, load_graph, load_trajectories, read_jsonl
from oracles import viterbi_brute

PI = math.pi


def ten_panos(visible_from):
    nodes = {f"p{i}": pos(i, 0) for i in range(10)}
    g = NavGraph(nodes, [])
    objs = (EnvObject("a", "sofa", pos(0, 1)), EnvObject("b", "tv", pos(5, 1)))
    vis = {f"p{i}": frozenset(o for o, panos in visible_from.items() if i in panos) for i in range(10)}
    return g, EnvObjects(objs, tuple(g.node_ids()), vis)


def test_idf_examples():
    _, env = ten_panos({"a": set(range(10)), "b": {3}})
    idf = compute_idf(env)
    assert idf["sofa"] == 0.0
    assert idf["tv"] == pytest.approx(math.log(5))
    _, env = ten_panos({})
    assert compute_idf(env) == {"sofa": pytest.approx(math.log(10)), "tv": pytest.approx(math.log(10))}


def test_motion_sequence(grid6, env6, fixture_trajectories):
    straight, zigzag = fixture_trajectories[:2]
    m = build_motion_sequence(grid6, env6, straight)
    assert len(m) == 2
    assert all(t.heading_delta == pytest.approx(0.0) for t in m)
    m = build_motion_sequence(grid6, env6, zigzag)
    assert len(m) == len(zigzag.nodes) - 1
    # east, then north (a left turn), then east again
    assert [t.heading_delta for t in m] == pytest.approx([0.0, -PI / 2, PI / 2])
    for a, b in zip(m, m[1:]):
        assert b.entry_heading == a.exit_heading
    assert m[0].entry_heading == zigzag.initial_heading


def test_direction_type_examples():
    assert direction_type(0.0) is DirectionType.Straight
    assert direction_type(PI / 4) is DirectionType.SlightRight
    assert direction_type(-PI / 4) is DirectionType.SlightLeft
    assert direction_type(PI) is DirectionType.Behind
    assert direction_type(PI / 2) is DirectionType.Right
    assert direction_type(-3 * PI / 4) is DirectionType.StrongLeft
    assert direction_type(0.0, 0.5) is DirectionType.Up
    assert direction_type(PI, -0.5) is DirectionType.Down
    # boundaries belong to the inner bin
    assert direction_type(PI / 8) is DirectionType.Straight
    assert direction_type(3 * PI / 8) is DirectionType.SlightRight
    assert direction_type(7 * PI / 8) is DirectionType.StrongRight


@given(st.floats(-PI, PI).filter(lambda d: d > -PI))
def test_direction_wheel_is_total_and_mirrored(delta):
    dt = direction_type(delta)
    assert dt not in (DirectionType.Up, DirectionType.Down)
    mirror = {"Left": "Right", "Right": "Left"}
    name = dt.value
    for a, b in mirror.items():
        if a in name:
            name = name.replace(a, b)
            break
    if delta != PI:
        assert direction_type(-delta).value == name


def test_hmm_single_object():
    g = NavGraph({"p": pos(0, 0), "q": pos(3, 0)}, [("p", "q")])
    env = EnvObjects((EnvObject("o", "bed", pos(1, 0)),), ("p", "q"), {"p": frozenset({"o"})})
    h = build_hmm(g, env, compute_idf(env))
    assert h.initial.tolist() == [1.0]
    assert h.transition.tolist() == [[1.0]]
    assert viterbi(h, ["p", "q", "p"]) == ["o", "o", "o"]


def test_hmm_symmetric_uniform():
    g = NavGraph({"p": pos(0, 0)}, [])
    env = EnvObjects((EnvObject("x", "bed", pos(1, 0)), EnvObject("y", "bed", pos(-1, 0))), ("p",), {})
    h = build_hmm(g, env, compute_idf(env), CraftyParams(kappa_self=0.0, alpha=0.0))
    np.testing.assert_allclose(h.initial, 0.5)
    # the distance kernel still favours staying put (d(o, o) = 0) unless it is flat
    assert h.transition[0, 0] == pytest.approx(1 / (1 + math.exp(-2 / 5.0)))
    flat = build_hmm(g, env, compute_idf(env), CraftyParams(kappa_self=0.0, alpha=0.0, sigma_transition=1e12))
    np.testing.assert_allclose(flat.transition, 0.5, atol=1e-9)


def test_hmm_hand_normalization(grid6, env6):
    p = CraftyParams()
    idf = compute_idf(env6)
    h = build_hmm(grid6, env6, idf, p)
    objs = sorted(env6.objects, key=lambda o: o.id)
    for i, o in enumerate(objs):
        w = np.array([math.exp(p.kappa_self * (o2.id == o.id) - o.center.distance(o2.center) / p.sigma_transition)
                      * (1 + idf[o2.category]) ** p.alpha for o2 in objs])
        np.testing.assert_allclose(h.transition[i], w / w.sum(), rtol=1e-12)
        e = np.array([math.exp(-o.center.distance(grid6.position(n)) / p.sigma_emission)
                      for n in h.panoramas])
        np.testing.assert_allclose(h.emission[i], e / e.sum(), rtol=1e-12)
    init = np.array([(1 + idf[o.category]) ** p.alpha for o in objs])
    np.testing.assert_allclose(h.initial, init / init.sum(), rtol=1e-12)
    for rows in (h.transition, h.emission, h.initial[None]):
        np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-9)
        assert (rows >= 0).all()


def test_empty_objects_error(grid6, fixture_trajectories):
    env = EnvObjects((), tuple(grid6.node_ids()), {})
    with pytest.raises(ValueError, match="at least one object"):
        generate(grid6, env, fixture_trajectories[0], 0)


def random_hmm(rng, n_states, n_panos):
    def rows(r, c):
        x = rng.random((r, c)) + 1e-3
        return x / x.sum(axis=1, keepdims=True)
    return CraftyHmm(tuple(f"s{i}" for i in range(n_states)), tuple(f"p{i}" for i in range(n_panos)),
                     rows(1, n_states)[0], rows(n_states, n_states), rows(n_states, n_panos))


def test_viterbi_textbook_fixture():
    h = CraftyHmm(("H", "L"), ("x", "y"), np.array([0.6, 0.4]),
                  np.array([[0.7, 0.3], [0.4, 0.6]]), np.array([[0.9, 0.1], [0.2, 0.8]]))
    for obs in (["x", "y"], ["y", "y"], ["x", "x"], ["y", "x"]):
        seq, _ = viterbi_brute(h.initial, h.transition, h.emission, [h.panoramas.index(o) for o in obs])
        assert viterbi(h, obs) == [h.states[s] for s in seq]


def test_viterbi_4x5_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        h = random_hmm(rng, 4, 3)
        obs = rng.integers(0, 3, size=5).tolist()
        seq, lp = viterbi_brute(h.initial, h.transition, h.emission, obs)
        got = viterbi(h, [h.panoramas[o] for o in obs])
        assert got == [h.states[s] for s in seq]
        assert sequence_log_prob(h, got, [h.panoramas[o] for o in obs]) == pytest.approx(lp, abs=1e-9)


def test_viterbi_tie_break_lowest_state():
    h = CraftyHmm(("a", "b"), ("p",), np.array([0.5, 0.5]), np.full((2, 2), 0.5), np.ones((2, 1)))
    assert viterbi(h, ["p", "p"]) == ["a", "a"]


def test_viterbi_zero_probability():
    h = CraftyHmm(("a",), ("p", "q"), np.array([1.0]), np.array([[1.0]]), np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError, match="zero probability"):
        viterbi(h, ["q"])


def test_realize_end_of_path(grid6, env6, fixture_trajectories):
    t = fixture_trajectories[3]
    m = build_motion_sequence(grid6, env6, t)
    text = realize_instruction(m, ["o1", "o1"], env6, 0)
    assert re.search(r"\band stop by the couch\.$", text)
    end_moves = "|".join(map(re.escape, default_templates()["move"]["Straight"]))
    assert re.search(rf"(?:{end_moves}) and stop by the couch\.$", text)


def test_realize_start_mentions_first_object(grid6, env6, fixture_trajectories):
    m = build_motion_sequence(grid6, env6, fixture_trajectories[1])
    t = default_templates()
    orients = t["orient_straight"] + t["orient_behind"] + [
        f"{pre} {side}" for pre in t["direction_pre"] for side in ("left", "right")] + [
        f"{side} {post}" for post in t["direction_post"] for side in ("left", "right")]
    for seed in range(20):
        text = realize_instruction(m, ["o2", "o1", "o1", "o3"], env6, seed)
        first = text.split(". ")[0]
        assert "table" in first
        assert any(o in first for o in orients)
        for cat in ("table", "couch", "lamp"):
            assert cat in text


def test_realize_collapses_same_fixation(grid6, env6, fixture_trajectories):
    m = build_motion_sequence(grid6, env6, fixture_trajectories[1])
    text = realize_instruction(m, ["o1", "o2", "o2", "o2"], env6, 0)
    # start sentence plus a single end-of-path sentence covering all three steps
    assert text.count(".") == 2
    assert text.endswith("stop by the table.")


def test_collapse_repeats():
    S, R = DirectionType.Straight, DirectionType.Right
    assert collapse_repeats([S, S, R, S]) == [S, R, S]


def test_realize_fixation_count_checked(grid6, env6, fixture_trajectories):
    m = build_motion_sequence(grid6, env6, fixture_trajectories[0])
    with pytest.raises(ValueError):
        realize_instruction(m, ["o1"], env6, 0)


def test_golden_file():
    g = load_graph(DATA / "grid6.json")
    env = load_objects(DATA / "objects6.json", g)
    trajs = {t.id: t for t in load_trajectories(DATA / "trajectories6.jsonl")}
    golden = (GOLDEN / "crafty_fixture.jsonl").read_bytes()
    lines = []
    for rec in read_jsonl(GOLDEN / "crafty_fixture.jsonl"):
        text = generate(g, env, trajs[rec["id"]], rec["seed"]).text
        lines.append(json.dumps({"id": rec["id"], "seed": rec["seed"], "text": text}, sort_keys=True))
    assert ("\n".join(lines) + "\n").encode() == golden


def test_generate_deterministic(grid6, env6, fixture_trajectories):
    for t in fixture_trajectories:
        assert generate(grid6, env6, t, 5) == generate(grid6, env6, t, 5)


@given(st.integers(0, 2**31))
def test_viterbi_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n_states = int(rng.integers(1, 5))
    n_obs = int(rng.integers(1, 6))
    h = random_hmm(rng, n_states, 3)
    obs = rng.integers(0, 3, size=n_obs).tolist()
    seq, lp = viterbi_brute(h.initial, h.transition, h.emission, obs)
    got = viterbi(h, [h.panoramas[o] for o in obs])
    assert sequence_log_prob(h, got, [h.panoramas[o] for o in obs]) == pytest.approx(lp, abs=1e-9)
