"""Synthetic environments: grid graphs, object layouts, image features, trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..crafty import EnvObject, EnvObjects
from ..compat.features import SLOT_DIRECTIONS, unit_vector
from ..navgraph import NavGraph, Position, Trajectory, direction_between_points
from ..rng import as_rng, choice

CATEGORIES = (
    "couch", "table", "chair", "lamp", "tv", "window", "door", "bed", "plant", "sink",
    "mirror", "cabinet", "rug", "fireplace", "desk", "piano", "clock", "vase", "shelf",
    "curtain", "dresser", "bench",
)


@dataclass(frozen=True)
class SyntheticConfig:
    rows: int = 10
    cols: int = 10
    spacing: float = 2.0
    n_objects: int = 60
    visibility_radius: float = 4.5
    n_trajectories: int = 200
    min_nodes: int = 4
    max_nodes: int = 6
    d_img: int = 16
    feature_noise: float = 0.1
    feature_radius: float = 5.0
    scan: str = "grid"


def node_id(r: int, c: int) -> str:
    return f"r{r:02d}c{c:02d}"


def grid_graph(rows: int = 10, cols: int = 10, spacing: float = 2.0, scan: str = "grid") -> NavGraph:
    nodes = {node_id(r, c): Position(c * spacing, r * spacing, 0.0)
             for r in range(rows) for c in range(cols)}
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((node_id(r, c), node_id(r, c + 1)))
            if r + 1 < rows:
                edges.append((node_id(r, c), node_id(r + 1, c)))
    return NavGraph(nodes, edges, scan=scan)


def scatter_objects(graph: NavGraph, n_objects: int, rng=None, radius: float = 4.5,
                    categories=CATEGORIES) -> EnvObjects:
    rng = as_rng(rng)
    pos = np.array([list(p) for p in graph.nodes.values()])
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    objects = []
    for i in range(n_objects):
        x, y = rng.uniform(lo[:2] - 0.5, hi[:2] + 0.5)
        z = rng.uniform(-0.5, 0.5)
        objects.append(EnvObject(f"o{i:03d}", choice(rng, categories), Position(x, y, z)))
    visibility = {}
    for pano in graph.node_ids():
        p = graph.position(pano)
        visibility[pano] = frozenset(o.id for o in objects if p.distance(o.center) <= radius)
    return EnvObjects(tuple(objects), tuple(graph.node_ids()), visibility, graph.scan)


def image_features(graph: NavGraph, env: EnvObjects, d_img: int = 16, rng=None,
                   noise: float = 0.1, radius: float = 5.0) -> dict[str, np.ndarray]:
    """Per-node (36, d_img) arrays built from category codes of nearby objects.

    Each category gets a random code vector; a slot sums the codes of all
    objects within ``radius``, weighted by angular closeness to the slot
    direction and by distance.
    """
    rng = as_rng(rng)
    categories = sorted({o.category for o in env.objects})
    codes = {c: rng.normal(size=d_img) for c in categories}
    slot_vecs = np.array([unit_vector(h, e) for h, e in SLOT_DIRECTIONS])
    feats = {}
    for pano in graph.node_ids():
        p = graph.position(pano)
        f = noise * rng.normal(size=(36, d_img))
        for o in env.objects:
            dist = p.distance(o.center)
            if dist > radius or dist == 0.0:
                continue
            d = direction_between_points(p, o.center)
            cos = slot_vecs @ unit_vector(d.heading, d.pitch)
            weight = np.exp((cos - 1.0) / 0.15) * math.exp(-dist / radius)
            f += weight[:, None] * codes[o.category][None, :]
        feats[pano] = f
    return feats


def random_trajectories(graph: NavGraph, n: int, rng=None, min_nodes: int = 4,
                        max_nodes: int = 6, prefix: str = "t") -> list[Trajectory]:
    """Distinct self-avoiding random walks with uniform initial headings."""
    rng = as_rng(rng)
    ids = graph.node_ids()
    seen = set()
    out = []
    while len(out) < n:
        length = int(rng.integers(min_nodes, max_nodes + 1))
        walk = [choice(rng, ids)]
        while len(walk) < length:
            options = [nb for nb in graph.neighbors(walk[-1]) if nb not in walk]
            if not options:
                break
            walk.append(choice(rng, options))
        key = tuple(walk)
        if len(walk) < length or key in seen or key[::-1] in seen:
            continue
        seen.add(key)
        heading = float(rng.uniform(0.0, 2 * math.pi))
        out.append(Trajectory(graph.scan, key, heading, id=f"{prefix}{len(out):03d}"))
    return out


@dataclass
class SyntheticWorld:
    graph: NavGraph
    env: EnvObjects
    features: dict[str, np.ndarray]
    trajectories: list[Trajectory]


def build_world(config: SyntheticConfig = SyntheticConfig(), seed=0) -> SyntheticWorld:
    rng = as_rng(seed)
    graph = grid_graph(config.rows, config.cols, config.spacing, config.scan)
    env = scatter_objects(graph, config.n_objects, rng, config.visibility_radius)
    feats = image_features(graph, env, config.d_img, rng, config.feature_noise,
                           config.feature_radius)
    trajs = random_trajectories(graph, config.n_trajectories, rng, config.min_nodes,
                                config.max_nodes)
    return SyntheticWorld(graph, env, feats, trajs)
