"""Motion tuples along a trajectory and the orientation wheel."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from ..navgraph import DirectionTriple, NavGraph, Position, Trajectory, direction_between, \
    direction_between_points, wrap_angle
from .observer import EnvObjects

PITCH_THRESHOLD = math.pi / 8


class DirectionType(enum.Enum):
    Straight = "Straight"
    SlightLeft = "SlightLeft"
    SlightRight = "SlightRight"
    Left = "Left"
    Right = "Right"
    StrongLeft = "StrongLeft"
    StrongRight = "StrongRight"
    Behind = "Behind"
    Up = "Up"
    Down = "Down"


def direction_type(heading_delta: float, pitch_delta: float = 0.0) -> DirectionType:
    """Bin a relative heading on the wheel; demarcations at odd multiples of pi/8.

    Positive deltas turn clockwise (to the right). Pitch beyond pi/8 wins.
    """
    if pitch_delta > PITCH_THRESHOLD:
        return DirectionType.Up
    if pitch_delta < -PITCH_THRESHOLD:
        return DirectionType.Down
    mag = abs(heading_delta)
    right = heading_delta > 0
    if mag <= math.pi / 8:
        return DirectionType.Straight
    if mag <= 3 * math.pi / 8:
        return DirectionType.SlightRight if right else DirectionType.SlightLeft
    if mag <= 5 * math.pi / 8:
        return DirectionType.Right if right else DirectionType.Left
    if mag <= 7 * math.pi / 8:
        return DirectionType.StrongRight if right else DirectionType.StrongLeft
    return DirectionType.Behind


@dataclass(frozen=True)
class MotionTuple:
    source: str
    goal: str
    entry_heading: float
    exit_heading: float
    heading_delta: float
    pitch_delta: float
    visible: dict  # object id -> DirectionTriple from source, relative to exit heading
    source_position: Position
    goal_position: Position

    @property
    def direction(self) -> DirectionType:
        return direction_type(self.heading_delta, self.pitch_delta)


def build_motion_sequence(graph: NavGraph, env: EnvObjects, t: Trajectory) -> list[MotionTuple]:
    objects = env.by_id()
    motions = []
    entry = t.initial_heading
    for src, dst in zip(t.nodes, t.nodes[1:]):
        step = direction_between(graph, src, dst)
        exit_heading = step.heading
        src_pos = graph.position(src)
        visible: dict[str, DirectionTriple] = {}
        for oid in sorted(env.visible_from(src)):
            try:
                visible[oid] = direction_between_points(src_pos, objects[oid].center, exit_heading)
            except ValueError:
                # object centred exactly on the panorama
                visible[oid] = DirectionTriple(exit_heading, 0.0, 0.0, 0.0)
        motions.append(MotionTuple(
            source=src, goal=dst,
            entry_heading=entry, exit_heading=exit_heading,
            heading_delta=wrap_angle(exit_heading - entry), pitch_delta=step.pitch,
            visible=visible, source_position=src_pos, goal_position=graph.position(dst),
        ))
        entry = exit_heading
    return motions
