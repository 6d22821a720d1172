"""Navigation graphs of panoramic viewpoints.

Headings follow the panoramic-simulator convention: 0 points along +y and
angles increase clockwise, so +x is at pi/2.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

TWO_PI = 2.0 * math.pi


class GraphError(ValueError):
    """Malformed graph, unknown node, or degenerate geometry."""


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, TWO_PI)
    if wrapped <= 0.0:
        wrapped += TWO_PI
    return wrapped - math.pi


def wrap_heading(angle: float) -> float:
    """Wrap an angle to [0, 2*pi)."""
    wrapped = math.fmod(angle, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return wrapped


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise GraphError(f"non-finite position {(self.x, self.y, self.z)}")

    def __iter__(self) -> Iterator[float]:
        return iter((self.x, self.y, self.z))

    def distance(self, other: "Position") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2
        )


@dataclass(frozen=True)
class DirectionTriple:
    """Direction from one point toward another.

    ``heading`` is absolute in [0, 2*pi); ``rel_heading`` is relative to the
    reference heading and lies in (-pi, pi].
    """

    heading: float
    pitch: float
    distance: float
    rel_heading: float = 0.0


class NavGraph:
    """Undirected graph of viewpoints with 3D positions. Immutable after construction."""

    def __init__(
        self,
        nodes: dict[str, Position],
        edges: Iterable[Sequence[str]],
        scan: str = "",
    ):
        self.scan = scan
        self._nodes = dict(nodes)
        adjacency: dict[str, set[str]] = {n: set() for n in self._nodes}
        edge_set: set[frozenset[str]] = set()
        for edge in edges:
            if len(edge) != 2:
                raise GraphError(f"edge {list(edge)} must have exactly two endpoints")
            a, b = edge
            for end in (a, b):
                if end not in self._nodes:
                    raise GraphError(f"dangling endpoint {end} in edge [{a}, {b}]")
            if a == b:
                raise GraphError(f"self-loop at {a}")
            edge_set.add(frozenset((a, b)))
            adjacency[a].add(b)
            adjacency[b].add(a)
        self._edges = frozenset(edge_set)
        self._adj = {n: tuple(sorted(ns)) for n, ns in adjacency.items()}

    @property
    def nodes(self) -> dict[str, Position]:
        return dict(self._nodes)

    @property
    def edges(self) -> frozenset[frozenset[str]]:
        return self._edges

    def node_ids(self) -> list[str]:
        return sorted(self._nodes)

    def __contains__(self, node: str) -> bool:
        return node in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def position(self, node: str) -> Position:
        try:
            return self._nodes[node]
        except KeyError:
            raise GraphError(f"unknown node {node}") from None

    def neighbors(self, node: str) -> tuple[str, ...]:
        """Neighbors in lexicographic order."""
        if node not in self._adj:
            raise GraphError(f"unknown node {node}")
        return self._adj[node]

    def has_edge(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self._edges

    def edge_length(self, a: str, b: str) -> float:
        return self.position(a).distance(self.position(b))

    def to_dict(self) -> dict:
        return {
            "scan": self.scan,
            "nodes": {n: {"pos": list(p)} for n, p in sorted(self._nodes.items())},
            "edges": sorted(sorted(e) for e in self._edges),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NavGraph":
        try:
            raw_nodes = data["nodes"]
            raw_edges = data.get("edges", [])
        except (KeyError, TypeError, AttributeError) as exc:
            raise GraphError(f"graph JSON missing field: {exc}") from None
        nodes = {}
        for node_id, spec in raw_nodes.items():
            try:
                x, y, z = (float(v) for v in spec["pos"])
            except (KeyError, TypeError, ValueError):
                raise GraphError(f"node {node_id} has malformed pos") from None
            nodes[str(node_id)] = Position(x, y, z)
        return cls(nodes, [tuple(map(str, e)) for e in raw_edges], scan=str(data.get("scan", "")))


def load_graph(path: str | Path) -> NavGraph:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphError(f"cannot parse graph file {path}: {exc}") from None
    return NavGraph.from_dict(data)


def save_graph(graph: NavGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph.to_dict()), encoding="utf-8")


@dataclass(frozen=True)
class Trajectory:
    scan: str
    nodes: tuple[str, ...]
    initial_heading: float = 0.0
    id: str = ""
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    def to_record(self) -> dict:
        record = {"id": self.id, "scan": self.scan, "nodes": list(self.nodes),
                  "heading": self.initial_heading}
        record.update(self.extra)
        return record

    @classmethod
    def from_record(cls, record: dict) -> "Trajectory":
        extra = {k: v for k, v in record.items() if k not in ("id", "scan", "nodes", "heading")}
        return cls(
            scan=str(record.get("scan", "")),
            nodes=tuple(str(n) for n in record["nodes"]),
            initial_heading=float(record.get("heading", 0.0)),
            id=str(record.get("id", "")),
            extra=extra,
        )


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise GraphError(f"{path}:{lineno}: {exc}") from None
    return records


def write_jsonl(records: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_trajectories(path: str | Path) -> list[Trajectory]:
    return [Trajectory.from_record(r) for r in read_jsonl(path)]


def shortest_path(graph: NavGraph, a: str, b: str) -> tuple[float, list[str]]:
    """Dijkstra over Euclidean edge weights.

    Ties are broken by lexicographic node id. Returns ``(inf, [])`` when ``b``
    is unreachable.
    """
    graph.position(a)
    graph.position(b)
    if a == b:
        return 0.0, [a]
    dist = {a: 0.0}
    parent: dict[str, str] = {}
    heap = [(0.0, a)]
    done = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        if node == b:
            break
        done.add(node)
        for nb in graph.neighbors(node):
            if nb in done:
                continue
            nd = d + graph.edge_length(node, nb)
            if nd < dist.get(nb, math.inf):
                dist[nb] = nd
                parent[nb] = node
                heapq.heappush(heap, (nd, nb))
    if b not in dist:
        return math.inf, []
    path = [b]
    while path[-1] != a:
        path.append(parent[path[-1]])
    return dist[b], path[::-1]


def shortest_path_length(graph: NavGraph, a: str, b: str) -> float:
    return shortest_path(graph, a, b)[0]


def direction_between(
    graph: NavGraph, src: str, dst: str, ref_heading: float = 0.0
) -> DirectionTriple:
    return direction_between_points(graph.position(src), graph.position(dst), ref_heading)


def direction_between_points(
    src: Position, dst: Position, ref_heading: float = 0.0
) -> DirectionTriple:
    dx, dy, dz = dst.x - src.x, dst.y - src.y, dst.z - src.z
    horizontal = math.hypot(dx, dy)
    distance = math.sqrt(horizontal * horizontal + dz * dz)
    if distance == 0.0:
        raise GraphError("coincident nodes")
    heading = wrap_heading(math.atan2(dx, dy)) if horizontal > 0.0 else 0.0
    pitch = math.atan2(dz, horizontal)
    return DirectionTriple(heading, pitch, distance, wrap_angle(heading - ref_heading))


def path_length(graph: NavGraph, nodes: Sequence[str]) -> float:
    return sum(graph.edge_length(a, b) for a, b in zip(nodes, nodes[1:]))


def validate_trajectory(graph: NavGraph, traj: Trajectory) -> list[str]:
    """Every violated trajectory invariant, as a message. Empty means valid."""
    problems = []
    nodes = traj.nodes
    if len(nodes) < 2:
        problems.append("length < 2")
    for n in nodes:
        if n not in graph:
            problems.append(f"unknown node {n}")
    if graph.scan and traj.scan and traj.scan != graph.scan:
        problems.append(f"scan mismatch {traj.scan} != {graph.scan}")
    for a, b in zip(nodes, nodes[1:]):
        if a == b:
            problems.append(f"repeated node {a}")
        elif a in graph and b in graph and not graph.has_edge(a, b):
            problems.append(f"non-edge hop {a}->{b}")
    if not (0.0 <= traj.initial_heading < TWO_PI) or not math.isfinite(traj.initial_heading):
        problems.append(f"initial heading {traj.initial_heading} outside [0, 2pi)")
    return problems
