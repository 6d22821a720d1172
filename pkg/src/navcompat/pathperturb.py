"""Trajectory perturbations used as hard negatives."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .navgraph import NavGraph, Trajectory, direction_between
from .rng import as_rng, choice

MAX_ATTEMPTS = 1000


class UnsatisfiablePerturbation(RuntimeError):
    pass


class PathPerturbKind(enum.Enum):
    RandomWalk = "random_walk"
    PathReversal = "path_reversal"
    ViewpointSwap = "viewpoint_swap"


@dataclass(frozen=True)
class PerturbedTrajectory:
    trajectory: Trajectory
    kind: PathPerturbKind
    source_id: str

    def to_record(self) -> dict:
        record = self.trajectory.to_record()
        record["kind"] = self.kind.value
        record["source_id"] = self.source_id
        return record


def _derived(t: Trajectory, nodes, heading: float, kind: PathPerturbKind) -> PerturbedTrajectory:
    new = Trajectory(
        scan=t.scan, nodes=tuple(nodes), initial_heading=heading,
        id=f"{t.id}~{kind.value}" if t.id else "",
    )
    return PerturbedTrajectory(new, kind, t.id)


def _start_heading(graph: NavGraph, nodes) -> float:
    return direction_between(graph, nodes[0], nodes[1]).heading


def random_walk(graph: NavGraph, t: Trajectory, rng=None,
                max_attempts: int = MAX_ATTEMPTS) -> PerturbedTrajectory:
    """Keep the first (or last) two viewpoints and resample the rest.

    Each attempt draws which end to keep and a target length in
    ``{L-1, L, L+1}``, then extends by uniform non-revisiting edge
    traversals. Walks that dead-end before the target are rejected.
    """
    rng = as_rng(rng)
    nodes = t.nodes
    n = len(nodes)
    if n < 4:
        raise UnsatisfiablePerturbation("random walk needs at least 4 viewpoints")
    original = set(nodes)
    for _ in range(max_attempts):
        keep_start = bool(rng.random() < 0.5)
        target = n + int(rng.integers(-1, 2))
        base = nodes if keep_start else nodes[::-1]
        walk = [base[0], base[1]]
        visited = set(walk)
        while len(walk) < target:
            options = [nb for nb in graph.neighbors(walk[-1]) if nb not in visited]
            if not options:
                break
            step = choice(rng, options)
            walk.append(step)
            visited.add(step)
        if len(walk) < target:
            continue
        if not keep_start:
            walk.reverse()
        if tuple(walk) == nodes or len(original.intersection(walk)) < 2:
            continue
        heading = t.initial_heading if keep_start else _start_heading(graph, walk)
        return _derived(t, walk, heading, PathPerturbKind.RandomWalk)
    raise UnsatisfiablePerturbation(
        f"unsatisfiable perturbation: no random walk for {t.id or nodes} "
        f"after {max_attempts} attempts"
    )


def path_reversal(graph: NavGraph, t: Trajectory) -> PerturbedTrajectory:
    """Reverse the viewpoint order; the new start faces its first hop."""
    nodes = t.nodes[::-1]
    if len(nodes) < 2:
        raise UnsatisfiablePerturbation("path reversal needs at least 2 viewpoints")
    if nodes == t.nodes:
        raise UnsatisfiablePerturbation("unsatisfiable perturbation: palindromic path")
    return _derived(t, nodes, _start_heading(graph, nodes), PathPerturbKind.PathReversal)


def swap_candidates(graph: NavGraph, t: Trajectory) -> dict[int, list[str]]:
    """Interior index -> replacement nodes adjacent to both neighbours of that index."""
    nodes = t.nodes
    used = set(nodes)
    out = {}
    for i in range(1, len(nodes) - 1):
        common = set(graph.neighbors(nodes[i - 1])) & set(graph.neighbors(nodes[i + 1]))
        options = sorted(common - used)
        if options:
            out[i] = options
    return out


def viewpoint_swap(graph: NavGraph, t: Trajectory, rng=None) -> PerturbedTrajectory:
    rng = as_rng(rng)
    if len(t.nodes) < 3:
        raise UnsatisfiablePerturbation("viewpoint swap needs at least 3 viewpoints")
    candidates = swap_candidates(graph, t)
    if not candidates:
        raise UnsatisfiablePerturbation(
            f"unsatisfiable perturbation: no swappable viewpoint in {t.id or t.nodes}"
        )
    index = choice(rng, sorted(candidates))
    nodes = list(t.nodes)
    nodes[index] = choice(rng, candidates[index])
    return _derived(t, nodes, t.initial_heading, PathPerturbKind.ViewpointSwap)


def perturb_path(graph: NavGraph, t: Trajectory, kind: PathPerturbKind, rng=None):
    if kind is PathPerturbKind.RandomWalk:
        return random_walk(graph, t, rng)
    if kind is PathPerturbKind.PathReversal:
        return path_reversal(graph, t)
    return viewpoint_swap(graph, t, rng)


def sample_path_negative(graph: NavGraph, t: Trajectory, rng=None) -> PerturbedTrajectory:
    """Uniform over the three kinds, falling back to the others if one is impossible."""
    rng = as_rng(rng)
    kinds = list(PathPerturbKind)
    order = [kinds[i] for i in rng.permutation(len(kinds))]
    for kind in order:
        try:
            return perturb_path(graph, t, kind, rng)
        except UnsatisfiablePerturbation:
            continue
    raise UnsatisfiablePerturbation(f"all perturbations unsatisfiable for {t.id or t.nodes}")
