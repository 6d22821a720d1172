"""Object annotations, per-category IDF, and the object-fixation HMM."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from ..navgraph import GraphError, NavGraph, Position


@dataclass(frozen=True)
class EnvObject:
    id: str
    category: str
    center: Position


@dataclass(frozen=True)
class EnvObjects:
    objects: tuple[EnvObject, ...]
    panoramas: tuple[str, ...]
    visibility: dict  # pano id -> frozenset of object ids
    scan: str = ""

    def __post_init__(self):
        ids = {o.id for o in self.objects}
        if len(ids) != len(self.objects):
            raise GraphError("duplicate object id")
        panos = set(self.panoramas)
        for pano, visible in self.visibility.items():
            if pano not in panos:
                raise GraphError(f"visibility references unknown panorama {pano}")
            missing = set(visible) - ids
            if missing:
                raise GraphError(f"panorama {pano} sees unknown objects {sorted(missing)}")

    def by_id(self) -> dict[str, EnvObject]:
        return {o.id: o for o in self.objects}

    def visible_from(self, pano: str) -> frozenset:
        return self.visibility.get(pano, frozenset())

    def to_dict(self) -> dict:
        return {
            "scan": self.scan,
            "objects": [
                {"id": o.id, "category": o.category, "center": list(o.center)}
                for o in self.objects
            ],
            "visibility": {p: sorted(v) for p, v in sorted(self.visibility.items())},
        }

    @classmethod
    def from_dict(cls, data: dict, graph: NavGraph | None = None) -> "EnvObjects":
        objects = tuple(
            EnvObject(str(o["id"]), str(o["category"]), Position(*map(float, o["center"])))
            for o in data["objects"]
        )
        visibility = {str(p): frozenset(map(str, v)) for p, v in data.get("visibility", {}).items()}
        if graph is not None:
            panoramas = tuple(graph.node_ids())
        else:
            panoramas = tuple(sorted(visibility))
        return cls(objects, panoramas, visibility, str(data.get("scan", "")))


def load_objects(path: str | Path, graph: NavGraph | None = None) -> EnvObjects:
    return EnvObjects.from_dict(json.loads(Path(path).read_text(encoding="utf-8")), graph)


def compute_idf(env: EnvObjects) -> dict[str, float]:
    """Panoramas are documents, visible object categories are words.

    ``idf(c) = max(0, ln(N / (1 + df(c))))``; categories never seen get ``ln N``.
    """
    n = len(env.panoramas)
    if n == 0:
        raise GraphError("idf needs at least one panorama")
    category = {o.id: o.category for o in env.objects}
    df = {c: 0 for c in category.values()}
    for pano in env.panoramas:
        for c in {category[o] for o in env.visible_from(pano)}:
            df[c] += 1
    return {c: max(0.0, math.log(n / (1 + d))) for c, d in sorted(df.items())}


@dataclass(frozen=True)
class CraftyParams:
    sigma_emission: float = 3.0
    sigma_transition: float = 5.0
    kappa_self: float = 2.0
    alpha: float = 1.0


@dataclass(frozen=True)
class CraftyHmm:
    states: tuple[str, ...]
    panoramas: tuple[str, ...]
    initial: np.ndarray  # (S,)
    transition: np.ndarray  # (S, S), rows sum to 1
    emission: np.ndarray  # (S, P), P(pano | object)

    def emission_for(self, state: str) -> dict[str, float]:
        row = self.emission[self.states.index(state)]
        return dict(zip(self.panoramas, row.tolist()))


def _normalize_log(logits: np.ndarray, what: str) -> np.ndarray:
    norm = logsumexp(logits, axis=-1, keepdims=True)
    if not np.all(np.isfinite(norm)):
        raise ValueError(f"degenerate normalization in {what}")
    return np.exp(logits - norm)


def build_hmm(graph: NavGraph, env: EnvObjects, idf: dict[str, float],
              params: CraftyParams = CraftyParams()) -> CraftyHmm:
    if not env.objects:
        raise ValueError("build_hmm needs at least one object")
    if not env.panoramas:
        raise ValueError("build_hmm needs at least one panorama")
    objects = sorted(env.objects, key=lambda o: o.id)
    centers = np.array([list(o.center) for o in objects])
    panos = np.array([list(graph.position(p)) for p in env.panoramas])
    saliency = np.array([math.log1p(idf.get(o.category, 0.0)) for o in objects]) * params.alpha

    pano_dist = np.linalg.norm(centers[:, None, :] - panos[None, :, :], axis=-1)
    emission = _normalize_log(-pano_dist / params.sigma_emission, "emission")

    obj_dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    logits = (params.kappa_self * np.eye(len(objects))
              - obj_dist / params.sigma_transition
              + saliency[None, :])
    transition = _normalize_log(logits, "transition")
    initial = _normalize_log(saliency, "initial distribution")
    return CraftyHmm(tuple(o.id for o in objects), tuple(env.panoramas),
                     initial, transition, emission)


def viterbi(hmm: CraftyHmm, observations) -> list[str]:
    """Most probable state sequence; ties resolve to the lowest state index."""
    index = {p: i for i, p in enumerate(hmm.panoramas)}
    try:
        obs = [index[o] for o in observations]
    except KeyError as exc:
        raise GraphError(f"observation {exc.args[0]} is not a panorama of the HMM") from None
    if not obs:
        return []
    with np.errstate(divide="ignore"):
        log_init = np.log(hmm.initial)
        log_trans = np.log(hmm.transition)
        log_emit = np.log(hmm.emission)
    score = log_init + log_emit[:, obs[0]]
    back = []
    for o in obs[1:]:
        cand = score[:, None] + log_trans  # prev x next
        best = np.argmax(cand, axis=0)
        score = cand[best, np.arange(len(best))] + log_emit[:, o]
        back.append(best)
    if not np.isfinite(score.max()):
        raise ValueError("observation sequence has zero probability")
    state = int(np.argmax(score))
    path = [state]
    for best in reversed(back):
        state = int(best[state])
        path.append(state)
    return [hmm.states[s] for s in reversed(path)]


def sequence_log_prob(hmm: CraftyHmm, states, observations) -> float:
    """Joint log-probability of a state path and observations."""
    s_idx = [hmm.states.index(s) for s in states]
    o_idx = [hmm.panoramas.index(o) for o in observations]
    with np.errstate(divide="ignore"):
        total = np.log(hmm.initial[s_idx[0]]) + np.log(hmm.emission[s_idx[0], o_idx[0]])
        for prev, cur, o in zip(s_idx, s_idx[1:], o_idx[1:]):
            total += np.log(hmm.transition[prev, cur]) + np.log(hmm.emission[cur, o])
    return float(total)
