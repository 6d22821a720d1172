"""Template-based instruction generator.

Appraiser (IDF saliency) -> Walker (motion tuples) -> Observer (HMM +
Viterbi fixations) -> Talker (templates).
"""

from ..navgraph import NavGraph, Trajectory
from ..textperturb import Instruction
from .observer import (CraftyHmm, CraftyParams, EnvObject, EnvObjects, build_hmm, compute_idf,
                       load_objects, sequence_log_prob, viterbi)
from .talker import default_templates, load_templates, realize_instruction
from .walker import DirectionType, MotionTuple, build_motion_sequence, direction_type


def generate(graph: NavGraph, env: EnvObjects, t: Trajectory, seed=None,
             params: CraftyParams = CraftyParams(), templates: dict | None = None,
             hmm: CraftyHmm | None = None) -> Instruction:
    """Full pipeline for one trajectory. Pass a prebuilt ``hmm`` to reuse it."""
    if hmm is None:
        hmm = build_hmm(graph, env, compute_idf(env), params)
    motions = build_motion_sequence(graph, env, t)
    fixations = viterbi(hmm, t.nodes)
    text = realize_instruction(motions, fixations, env, seed, templates)
    return Instruction(t.id, text)


__all__ = [
    "CraftyHmm", "CraftyParams", "DirectionType", "EnvObject", "EnvObjects", "MotionTuple",
    "build_hmm", "build_motion_sequence", "compute_idf", "default_templates", "direction_type",
    "generate", "load_objects", "load_templates", "realize_instruction", "sequence_log_prob",
    "viterbi",
]
