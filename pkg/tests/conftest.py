import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from navcompat.crafty import EnvObject, EnvObjects
from navcompat.navgraph import NavGraph, Position, Trajectory
from navcompat.workbench.synthetic import grid_graph

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", deadline=None, max_examples=20,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def pos(x, y, z=0.0):
    return Position(float(x), float(y), float(z))


@pytest.fixture
def square():
    nodes = {"A": pos(0, 0), "B": pos(1, 0), "C": pos(1, 1), "D": pos(0, 1)}
    return NavGraph(nodes, [("A", "B"), ("B", "C"), ("C", "D"), ("D", "A")], scan="sq")


@pytest.fixture
def line():
    nodes = {n: pos(i, 0) for i, n in enumerate("ABCDE")}
    return NavGraph(nodes, [("A", "B"), ("B", "C"), ("C", "D"), ("D", "E")], scan="line")


@pytest.fixture
def grid6():
    return grid_graph(2, 3, spacing=1.0, scan="g6")


@pytest.fixture
def grid5():
    return grid_graph(5, 5, spacing=1.0, scan="g5")


def fixture_env(graph: NavGraph) -> EnvObjects:
    """Three objects around the 2x3 grid, each visible from the nearest column."""
    objects = (
        EnvObject("o1", "couch", pos(-0.5, 0.5, 0.0)),
        EnvObject("o2", "table", pos(1.0, 1.6, 0.0)),
        EnvObject("o3", "lamp", pos(2.6, 0.4, 0.5)),
    )
    vis = {}
    for n in graph.node_ids():
        p = graph.position(n)
        vis[n] = frozenset(o.id for o in objects if p.distance(o.center) <= 1.8)
    return EnvObjects(objects, tuple(graph.node_ids()), vis, graph.scan)


@pytest.fixture
def env6(grid6):
    return fixture_env(grid6)


@pytest.fixture
def fixture_trajectories(grid6):
    return [
        Trajectory("g6", ("r00c00", "r00c01", "r00c02"), 0.5 * math.pi, id="straight"),
        Trajectory("g6", ("r00c00", "r00c01", "r01c01", "r01c02"), 0.5 * math.pi, id="zigzag"),
        Trajectory("g6", ("r01c02", "r01c01", "r01c00", "r00c00"), 1.5 * math.pi, id="back"),
        Trajectory("g6", ("r00c02", "r01c02"), 0.0, id="short"),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: list[str] = []


def report_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  criterion {number:>2}  {name}: {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[2])):
            terminalreporter.write_line(line)
