"""Per-viewpoint visual features for the trajectory encoder.

Each panorama has 36 view slots (3 elevations x 12 headings). A slot feature is
the image feature followed by an 8-value orientation block.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..navgraph import NavGraph, Trajectory, direction_between, wrap_angle

N_SLOTS = 36
ORIENT_DIM = 8
GEOM_DIM = 4
ELEVATIONS = (-math.pi / 6, 0.0, math.pi / 6)
HEADINGS = tuple(j * math.pi / 6 for j in range(12))
SLOT_DIRECTIONS = tuple((h, e) for e in ELEVATIONS for h in HEADINGS)


def encode_orientation(theta_abs: float, phi_abs: float, theta_rel: float, phi_rel: float) -> np.ndarray:
    return np.array([
        math.sin(theta_abs), math.cos(theta_abs), math.sin(phi_abs), math.cos(phi_abs),
        math.sin(theta_rel), math.cos(theta_rel), math.sin(phi_rel), math.cos(phi_rel),
    ])


def unit_vector(heading: float, elevation: float) -> np.ndarray:
    return np.array([math.sin(heading) * math.cos(elevation),
                     math.cos(heading) * math.cos(elevation),
                     math.sin(elevation)])


_SLOT_UNITS = np.array([unit_vector(h, e) for h, e in SLOT_DIRECTIONS])


def nearest_slot(heading: float, pitch: float) -> int:
    """Slot whose centre direction is angularly closest; lowest index on ties."""
    return int(np.argmax(_SLOT_UNITS @ unit_vector(heading, pitch)))


@dataclass(frozen=True)
class ViewFeatures:
    pano: np.ndarray  # (36, F)
    prev: np.ndarray  # (F,)
    next: np.ndarray  # (F,)
    geom: np.ndarray  # (4,): displacement from the previous viewpoint and its length

    @property
    def width(self) -> int:
        return self.pano.shape[1]


def build_view_features(graph: NavGraph, t: Trajectory,
                        image_features: Mapping[str, np.ndarray]) -> list[ViewFeatures]:
    """Relative angles are measured against the agent heading on arrival at each viewpoint."""
    nodes = t.nodes
    for n in nodes:
        if n not in image_features:
            raise KeyError(f"missing image features for node {n}")
    out = []
    heading = t.initial_heading
    for k, node in enumerate(nodes):
        if k > 0:
            heading = direction_between(graph, nodes[k - 1], node).heading
        img = np.asarray(image_features[node], dtype=float)
        if img.shape[0] != N_SLOTS:
            raise ValueError(f"node {node} has {img.shape[0]} view slots, expected {N_SLOTS}")
        orient = np.array([
            encode_orientation(h, e, wrap_angle(h - heading), e) for h, e in SLOT_DIRECTIONS
        ])
        pano = np.concatenate([img, orient], axis=1)
        width = pano.shape[1]
        prev = np.zeros(width)
        nxt = np.zeros(width)
        geom = np.zeros(GEOM_DIM)
        if k > 0:
            d = direction_between(graph, node, nodes[k - 1])
            prev = pano[nearest_slot(d.heading, d.pitch)].copy()
            a, b = graph.position(nodes[k - 1]), graph.position(node)
            delta = np.array([b.x - a.x, b.y - a.y, b.z - a.z])
            geom = np.append(delta, np.linalg.norm(delta))
        if k + 1 < len(nodes):
            d = direction_between(graph, node, nodes[k + 1])
            nxt = pano[nearest_slot(d.heading, d.pitch)].copy()
        out.append(ViewFeatures(pano, prev, nxt, geom))
    return out


@dataclass(frozen=True)
class StackedViews:
    pano: np.ndarray  # (T, 36, F)
    prev: np.ndarray  # (T, F)
    next: np.ndarray  # (T, F)
    geom: np.ndarray  # (T, 4)

    def __len__(self) -> int:
        return self.pano.shape[0]


def stack_views(views: Sequence[ViewFeatures]) -> StackedViews:
    if not views:
        raise ValueError("trajectory needs at least one viewpoint")
    return StackedViews(
        np.stack([v.pano for v in views]),
        np.stack([v.prev for v in views]),
        np.stack([v.next for v in views]),
        np.stack([v.geom for v in views]),
    )


def load_features(path: str | Path) -> dict[str, np.ndarray]:
    feats = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                feats[str(rec["node"])] = np.asarray(rec["views"], dtype=float)
    return feats


def save_features(feats: Mapping[str, np.ndarray], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node in sorted(feats):
            fh.write(json.dumps({"node": node, "views": np.asarray(feats[node]).tolist()}) + "\n")
