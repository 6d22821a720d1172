"""Template realization of motions and fixated objects."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from itertools import groupby
from pathlib import Path

from ..navgraph import Position, direction_between_points
from ..rng import as_rng, choice
from .observer import EnvObjects
from .walker import DirectionType, MotionTuple, direction_type

SLIGHT = {DirectionType.SlightLeft, DirectionType.SlightRight}
LEFTISH = {DirectionType.Left, DirectionType.SlightLeft, DirectionType.StrongLeft}


@lru_cache(maxsize=None)
def default_templates() -> dict:
    text = resources.files("navcompat").joinpath("data/crafty_templates.json").read_text()
    return json.loads(text)


def load_templates(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def article(word: str) -> str:
    return "an" if word[:1] in "aeiou" else "a"


def object_direction(position: Position, heading: float, center: Position) -> DirectionType:
    try:
        rel = direction_between_points(position, center, heading).rel_heading
    except ValueError:
        return DirectionType.Straight
    return direction_type(rel, 0.0)


def orient_phrase(dt: DirectionType, templates: dict, rng) -> str:
    if dt is DirectionType.Straight:
        return choice(rng, templates["orient_straight"])
    if dt is DirectionType.Behind:
        return choice(rng, templates["orient_behind"])
    side = "left" if dt in LEFTISH else "right"
    if rng.random() < 0.5:
        phrase = f"{choice(rng, templates['direction_pre'])} {side}"
    else:
        phrase = f"{side} {choice(rng, templates['direction_post'])}"
    if dt in SLIGHT:
        phrase = f"{choice(rng, templates['slight'])} {phrase}"
    return phrase


def collapse_repeats(directions: list[DirectionType]) -> list[DirectionType]:
    return [d for d, _ in groupby(directions)]


class _Talker:
    def __init__(self, env: EnvObjects, templates: dict, rng):
        self.objects = env.by_id()
        self.t = templates
        self.rng = rng

    def pick(self, slot: str) -> str:
        return choice(self.rng, self.t[slot])

    def move(self, dt: DirectionType) -> str:
        return choice(self.rng, self.t["move"][dt.value])

    def moves(self, dts: list[DirectionType]) -> str:
        return " and ".join(self.move(d) for d in collapse_repeats(dts))

    def category(self, oid: str) -> str:
        return self.objects[oid].category

    def orient(self, oid: str, position: Position, heading: float) -> tuple[DirectionType, str]:
        dt = object_direction(position, heading, self.objects[oid].center)
        return dt, orient_phrase(dt, self.t, self.rng)

    def start(self, oid: str, motion: MotionTuple) -> str:
        _, orient = self.orient(oid, motion.source_position, motion.entry_heading)
        obj = self.category(oid)
        return self.pick("start").format(a=article(obj), obj=obj, orient=orient)

    def single(self, oid: str, motion: MotionTuple) -> str:
        _, orient = self.orient(oid, motion.source_position, motion.exit_heading)
        obj = self.category(oid)
        slot = "inter" if motion.direction is DirectionType.Straight else "intra"
        return self.pick(slot).format(move=self.move(motion.direction), a=article(obj),
                                      obj=obj, orient=orient)

    def multi(self, oid: str, motions: list[MotionTuple]) -> str:
        last = motions[-1]
        dt, orient = self.orient(oid, last.source_position, last.exit_heading)
        if dt is DirectionType.Straight:
            slot = "multi_straight"
        elif dt in SLIGHT:
            slot = "multi_slight"
        else:
            slot = "multi_other"
        obj_phrase = self.pick(slot).format(obj=self.category(oid), orient=orient)
        moves = self.moves([m.direction for m in motions])
        return self.pick("multi").format(moves=moves, object=obj_phrase)

    def end(self, oid: str, motions: list[MotionTuple]) -> str:
        moves = self.moves([m.direction for m in motions])
        return self.pick("end").format(move=moves, obj=self.category(oid))


def realize_instruction(motions: list[MotionTuple], fixations: list[str], env: EnvObjects,
                        rng=None, templates: dict | None = None) -> str:
    """Start sentence, then one sentence per run of steps sharing a fixation.

    ``fixations[k]`` is the object fixated at panorama ``k``; step ``k`` moves
    toward panorama ``k + 1`` and is described with ``fixations[k + 1]``. The
    final run uses the end-of-path template.
    """
    if len(fixations) != len(motions) + 1:
        raise ValueError("need one fixation per visited panorama")
    if not motions:
        raise ValueError("need at least one motion")
    talker = _Talker(env, templates or default_templates(), as_rng(rng))
    sentences = [talker.start(fixations[0], motions[0])]
    steps = list(zip(motions, fixations[1:]))
    runs = [(oid, [m for m, _ in grp]) for oid, grp in groupby(steps, key=lambda s: s[1])]
    for oid, run in runs[:-1]:
        sentences.append(talker.single(oid, run[0]) if len(run) == 1 else talker.multi(oid, run))
    oid, run = runs[-1]
    sentences.append(talker.end(oid, run))
    return " ".join(sentences)
