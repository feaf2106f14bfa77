"""Scenario catalog: wall placements, ball spawn distributions and add/remove schedules.

Wall placements and spawn ranges are fixed artifact constants. They were
chosen so that a single wall can redirect most balls into the basket, while no
single fixed action works for most spawns, which makes the scenes worth
learning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import physics
from .errors import ConfigError
from .objects import Scene

BALL_ATTRIBUTES = dict(v_x=0.0, v_y=0.0, spin=0.0, theta_b=0.0, f_b=0.5, e_b=0.6, m_b=10.0)


@dataclass(frozen=True)
class WallSpec:
    class_id: str
    attributes: dict
    placement: dict


@dataclass(frozen=True)
class Spawn:
    wall: WallSpec
    object_id: int | None = None


@dataclass(frozen=True)
class Remove:
    object_id: int


@dataclass(frozen=True)
class ScheduleEvent:
    """Changes to the scene applied just before episode ``episode`` starts."""

    episode: int
    changes: tuple[Spawn | Remove, ...]


@dataclass
class Scenario:
    name: str
    walls: list[WallSpec]
    spawn: physics.SpawnSpec | physics.AimedSpawn
    episodes: int = 2000
    schedule: list[ScheduleEvent] = field(default_factory=list)
    ball: dict = field(default_factory=lambda: dict(BALL_ATTRIBUTES))

    def active_classes(self) -> list[str]:
        ids = [w.class_id for w in self.walls]
        ids += [c.wall.class_id for e in self.schedule for c in e.changes if isinstance(c, Spawn)]
        return sorted(set(ids))

    def build_scene(self) -> Scene:
        """Fresh scene with every class registered, the neutral ball (id 0) and
        the initial walls (ids ``1..n``)."""
        scene = Scene()
        for cls in physics.basketball_classes():
            scene.register_class(cls)
        scene.spawn_object(physics.NEUTRAL_BALL, self.ball, False, object_id=BALL_ID)
        for wall in self.walls:
            scene.spawn_object(wall.class_id, wall.attributes, True, wall.placement)
        return scene

    def object_ids(self) -> list[int]:
        """Every wall id that exists at some point of a run, in spawn order."""
        ids = list(range(1, len(self.walls) + 1))
        nxt = len(self.walls) + 1
        for event in self.schedule:
            for change in event.changes:
                if isinstance(change, Spawn):
                    oid = change.object_id if change.object_id is not None else nxt
                    ids.append(oid)
                    nxt = max(nxt, oid + 1)
        return ids


BALL_ID = 0


def _rotating(anchor, half_length=60.0, f=0.5, e=0.8) -> WallSpec:
    return WallSpec(
        physics.ROTATING_WALL,
        dict(f_w=f, e_w=e, theta_w=0.0),
        {"anchor": anchor, "half_length": half_length},
    )


def _arc(anchor, rest_angle=math.pi / 2, radius=60.0, f=0.6, e=0.8) -> WallSpec:
    return WallSpec(
        physics.ARC_WALL,
        dict(f_a=f, e_a=e, sweep=0.0),
        {"anchor": anchor, "radius": radius, "span": math.pi, "rest_angle": rest_angle},
    )


def single_rotating_wall() -> Scenario:
    return Scenario(
        "single-rotating-wall",
        [_rotating((130.0, 250.0))],
        physics.AimedSpawn(target=(130.0, 262.0)),
    )


def single_arc_wall() -> Scenario:
    return Scenario(
        "single-arc-wall",
        [_arc((130.0, 200.0))],
        physics.AimedSpawn(target=(130.0, 270.0), dx=(-35.0, 35.0), vx=(-150.0, 150.0), vy=(-400.0, -150.0)),
    )


def two_rotating_walls() -> Scenario:
    return Scenario(
        "two-rotating-walls",
        [_rotating((130.0, 250.0)), _rotating((300.0, 300.0))],
        physics.AimedSpawn(target=(215.0, 262.0), dx=(-120.0, 120.0)),
    )


def two_arc_walls() -> Scenario:
    return Scenario(
        "two-arc-walls",
        [_arc((90.0, 200.0)), _arc((220.0, 280.0))],
        physics.AimedSpawn(target=(155.0, 300.0), dx=(-100.0, 100.0), vx=(-150.0, 150.0), vy=(-400.0, -150.0)),
    )


def add_remove() -> Scenario:
    base = single_arc_wall()
    extra = [_arc((230.0, 330.0)), _arc((60.0, 110.0)), _arc((350.0, 110.0))]
    schedule = [
        ScheduleEvent(1000, (Spawn(extra[0]),)),
        ScheduleEvent(2000, (Spawn(extra[1]),)),
        ScheduleEvent(3000, (Spawn(extra[2]),)),
        ScheduleEvent(4000, (Remove(2), Remove(3))),
    ]
    return Scenario("add-remove", base.walls, base.spawn, 5000, schedule)


CATALOG = {
    "single-rotating-wall": single_rotating_wall,
    "single-arc-wall": single_arc_wall,
    "two-rotating-walls": two_rotating_walls,
    "two-arc-walls": two_arc_walls,
    "add-remove": add_remove,
}


def get_scenario(name: str) -> Scenario:
    try:
        return CATALOG[name]()
    except KeyError:
        raise ConfigError("scenario", f"unknown scenario {name!r}; known: {sorted(CATALOG)}") from None


def validate_schedule(schedule: list[ScheduleEvent], scene: Scene) -> None:
    """Episode indices must strictly increase and every spawned class must be registered."""
    last = -1
    for i, event in enumerate(schedule):
        if event.episode <= last:
            raise ConfigError(f"schedule[{i}].episode", "episode indices must be non-negative and strictly increasing")
        last = event.episode
        for j, change in enumerate(event.changes):
            if isinstance(change, Spawn) and change.wall.class_id not in scene.classes:
                raise ConfigError(f"schedule[{i}].changes[{j}].class", f"unknown class {change.wall.class_id!r}")
