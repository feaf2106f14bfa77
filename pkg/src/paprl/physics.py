"""Deterministic 2D physics for the basket-ball platform.

One neutral ball falls under gravity through a 500 x 500 arena and bounces off
active walls (straight segments that can be tilted, or circular arcs whose
surface spins about their centre like a drum). An episode ends when the ball enters the basket on the floor, leaves
the arena, or the time limit passes. Integration is semi-implicit Euler with
automatic sub-stepping so the ball never moves more than half a radius per
sub-step.

Collision response works in the contact frame: the normal component of the
velocity relative to the surface is reflected and scaled by ``e_ball * e_wall``,
the tangential component is scaled by ``1 - f_ball * f_wall``. A sweeping arc
contributes its tangential surface velocity at the contact point. The arc's
outline stays put while its surface moves, so where the ball meets it never
depends on an earlier episode's spin setting.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Callable

import numpy as np

from .errors import ContactFault, NoActiveObjects
from .objects import ActionSpec, ObjectClass, ObjectInstance, Scene, make_schema

ROTATING_WALL = "rotating-wall"
ARC_WALL = "arc-wall"
NEUTRAL_BALL = "neutral-ball"

TRACE_FORMAT_VERSION = 1


@dataclass
class PhysicsConfig:
    gravity: float = 300.0
    ball_radius: float = 10.0
    dt: float = 1.0 / 60.0
    time_limit: float = 10.0
    contact_eps: float = 0.5
    arena_width: float = 500.0
    arena_height: float = 500.0
    basket_x: float = 250.0
    basket_half_width: float = 20.0
    basket_depth: float = 40.0
    spin_coupling: float = 0.1
    # rad/s per unit of the arc's sweep attribute; +-50 units is +-5 rad/s.
    sweep_scale: float = 0.1

    @property
    def basket_center(self) -> tuple[float, float]:
        return (self.basket_x, 0.5 * self.basket_depth)


def basketball_classes() -> list[ObjectClass]:
    """The three object classes of the basket-ball platform."""
    tenth_pi = math.pi / 10
    rotating = ObjectClass(
        ROTATING_WALL,
        "Rotating wall",
        make_schema(
            ("f_w", 0.4, 0.9, "friction"),
            ("e_w", 0.4, 0.9, "elasticity"),
            ("theta_w", -tenth_pi, tenth_pi, "rad"),
        ),
        ActionSpec(("theta_w",), ((-tenth_pi, tenth_pi),)),
        shape="segment",
    )
    arc = ObjectClass(
        ARC_WALL,
        "Arc wall",
        make_schema(
            ("f_a", 0.4, 0.9, "friction"),
            ("e_a", 0.4, 0.9, "elasticity"),
            ("sweep", -50.0, 50.0, "0.1 rad/s"),
        ),
        ActionSpec(("sweep",), ((-50.0, 50.0),)),
        shape="arc",
    )
    ball = ObjectClass(
        NEUTRAL_BALL,
        "Neutral ball",
        make_schema(
            ("v_x", -1500.0, 1500.0, "units/s"),
            ("v_y", -1500.0, 1500.0, "units/s"),
            ("spin", -300.0, 300.0, "rad/s"),
            ("theta_b", -math.pi, math.pi, "rad"),
            ("f_b", 0.4, 0.9, "friction"),
            ("e_b", 0.4, 0.9, "elasticity"),
            ("m_b", 5.0, 25.0, "mass"),
        ),
        ActionSpec(),
        shape="ball",
    )
    return [rotating, arc, ball]


# -- state types ---------------------------------------------------------------------


@dataclass
class BallState:
    x: float
    y: float
    vx: float
    vy: float
    spin: float = 0.0
    f: float = 0.5
    e: float = 0.6
    m: float = 10.0

    @property
    def theta(self) -> float:
        """Movement angle; 0 for a ball at rest."""
        if self.vx == 0.0 and self.vy == 0.0:
            return 0.0
        return math.atan2(self.vy, self.vx)

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    def dynamic_vector(self) -> np.ndarray:
        """``[v_x, v_y, spin, theta]``, the part of the ball state a collision changes."""
        return np.array([self.vx, self.vy, self.spin, self.theta])

    def attribute_vector(self) -> np.ndarray:
        """Full attribute vector in schema order ``[v_x, v_y, spin, theta, f, e, m]``."""
        return np.array([self.vx, self.vy, self.spin, self.theta, self.f, self.e, self.m])

    def constants(self) -> np.ndarray:
        return np.array([self.f, self.e, self.m])

    def copy(self) -> "BallState":
        return BallState(**asdict(self))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PostInteractionState:
    vx: float
    vy: float
    spin: float

    @property
    def theta(self) -> float:
        if self.vx == 0.0 and self.vy == 0.0:
            return 0.0
        return math.atan2(self.vy, self.vx)

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    def vector(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.spin, self.theta])

    def to_dict(self) -> dict:
        return {"vx": self.vx, "vy": self.vy, "spin": self.spin, "theta": self.theta}


@dataclass
class WallGeometry:
    """A wall in world coordinates.

    ``angle`` is the segment orientation, or for an arc the direction of the
    middle of its span. ``sweep`` is the angular velocity of the arc's surface
    in rad/s; the outline itself does not move.
    """

    kind: str
    anchor: tuple[float, float]
    f: float
    e: float
    half_length: float = 0.0
    angle: float = 0.0
    radius: float = 0.0
    span: float = 0.0
    sweep: float = 0.0

    def copy(self) -> "WallGeometry":
        return WallGeometry(**asdict(self))


@dataclass
class InteractionRecord:
    object_id: int
    pre: BallState
    action: list[float] | None
    post: PostInteractionState
    time: float
    attrs_before: list[float]
    attrs_after: list[float]
    offset: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "pre": self.pre.to_dict(),
            "action": self.action,
            "post": self.post.to_dict(),
            "time": self.time,
            "attrs_before": self.attrs_before,
            "attrs_after": self.attrs_after,
            "offset": list(self.offset),
        }


IN_BASKET = "InBasket"
OUT_OF_BOUNDS = "OutOfBounds"
TIME_LIMIT = "TimeLimit"


@dataclass
class EpisodeRecord:
    interactions: list[InteractionRecord] = field(default_factory=list)
    min_basket_distance: float = math.inf
    outcome: str = TIME_LIMIT
    reward: float | None = None
    spawn: BallState | None = None
    duration: float = 0.0
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {
            "interactions": [i.to_dict() for i in self.interactions],
            "min_basket_distance": self.min_basket_distance,
            "outcome": self.outcome,
            "reward": self.reward,
            "spawn": self.spawn.to_dict() if self.spawn else None,
            "duration": self.duration,
            "diagnostic": self.diagnostic,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class Interaction:
    object_id: int
    wall_index: int
    pre: BallState
    post: PostInteractionState
    time: float
    offset: tuple[float, float]


@dataclass(frozen=True)
class BasketEntry:
    time: float


@dataclass(frozen=True)
class BoundaryExit:
    time: float
    reason: str


# -- geometry ----------------------------------------------------------------------


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def nearest_point(wall: WallGeometry, x: float, y: float) -> tuple[float, float]:
    ax, ay = wall.anchor
    rx, ry = x - ax, y - ay
    if wall.kind == "segment":
        ux, uy = math.cos(wall.angle), math.sin(wall.angle)
        s = min(max(rx * ux + ry * uy, -wall.half_length), wall.half_length)
        return ax + s * ux, ay + s * uy
    psi = math.atan2(ry, rx) if (rx or ry) else wall.angle
    if abs(_wrap(psi - wall.angle)) <= 0.5 * wall.span:
        return ax + wall.radius * math.cos(psi), ay + wall.radius * math.sin(psi)
    best = None
    for sign in (-1.0, 1.0):
        end = wall.angle + sign * 0.5 * wall.span
        px, py = ax + wall.radius * math.cos(end), ay + wall.radius * math.sin(end)
        d = (x - px) ** 2 + (y - py) ** 2
        if best is None or d < best[0]:
            best = (d, px, py)
    return best[1], best[2]


def surface_distance(ball: BallState, wall: WallGeometry) -> float:
    px, py = nearest_point(wall, ball.x, ball.y)
    return math.hypot(ball.x - px, ball.y - py)


def contact_normal(ball: BallState, wall: WallGeometry) -> tuple[float, float]:
    """Unit normal at the contact, pointing from the wall surface to the ball centre."""
    px, py = nearest_point(wall, ball.x, ball.y)
    dx, dy = ball.x - px, ball.y - py
    d = math.hypot(dx, dy)
    if d > 1e-12:
        return dx / d, dy / d
    if wall.kind == "segment":
        nx, ny = -math.sin(wall.angle), math.cos(wall.angle)
    else:
        nx, ny = math.cos(wall.angle), math.sin(wall.angle)
        rx, ry = px - wall.anchor[0], py - wall.anchor[1]
        r = math.hypot(rx, ry)
        if r > 1e-12:
            nx, ny = rx / r, ry / r
    if nx * ball.vx + ny * ball.vy > 0:
        nx, ny = -nx, -ny
    return nx, ny


def surface_velocity(wall: WallGeometry, px: float, py: float) -> tuple[float, float]:
    if wall.kind != "arc" or wall.sweep == 0.0:
        return 0.0, 0.0
    rx, ry = px - wall.anchor[0], py - wall.anchor[1]
    return -wall.sweep * ry, wall.sweep * rx


def detect_interaction(
    ball: BallState, wall: WallGeometry, radius: float = 10.0, eps: float = 0.5
) -> bool:
    return surface_distance(ball, wall) <= radius + eps


def _collide(
    ball: BallState, wall: WallGeometry, radius: float, kappa: float, normal: tuple[float, float] | None = None
) -> PostInteractionState:
    nx, ny = normal if normal is not None else contact_normal(ball, wall)
    tx, ty = -ny, nx
    px, py = nearest_point(wall, ball.x, ball.y)
    sx, sy = surface_velocity(wall, px, py)
    # Only the tangential part of the surface motion enters the contact frame.
    s_t = sx * tx + sy * ty
    v_n = ball.vx * nx + ball.vy * ny
    v_t = ball.vx * tx + ball.vy * ty - s_t
    e_eff = ball.e * wall.e
    mu_eff = ball.f * wall.f
    new_n = -e_eff * v_n if v_n < 0.0 else v_n
    new_t = (1.0 - mu_eff) * v_t
    vx = new_n * nx + (new_t + s_t) * tx
    vy = new_n * ny + (new_t + s_t) * ty
    spin = ball.spin * (1.0 - mu_eff) + kappa * v_t / radius
    return PostInteractionState(vx, vy, spin)


def resolve_collision(
    ball: BallState,
    wall: WallGeometry,
    radius: float = 10.0,
    eps: float = 0.5,
    kappa: float = 0.1,
) -> PostInteractionState:
    """Post-contact velocity and spin of a ball touching ``wall``."""
    if not detect_interaction(ball, wall, radius, eps):
        raise ContactFault(f"ball at ({ball.x:.3f}, {ball.y:.3f}) is not touching the wall")
    return _collide(ball, wall, radius, kappa)


def compute_reward(record: EpisodeRecord) -> float:
    """1 in the basket, otherwise the inverse of the closest approach, capped at 1."""
    if record.outcome == IN_BASKET:
        return 1.0
    d = record.min_basket_distance
    if not d > 1.0:
        return 1.0
    return min(1.0, max(0.0, 1.0 / d))


# -- world stepping -------------------------------------------------------------------


def wall_from_instance(obj: ObjectInstance, cls: ObjectClass, config: PhysicsConfig) -> WallGeometry:
    attrs = obj.attributes
    pl = obj.placement
    anchor = (float(pl["anchor"][0]), float(pl["anchor"][1]))
    if cls.shape == "segment":
        return WallGeometry(
            "segment", anchor, f=float(attrs[0]), e=float(attrs[1]),
            half_length=float(pl.get("half_length", 60.0)), angle=float(attrs[2]),
        )
    if cls.shape == "arc":
        return WallGeometry(
            "arc", anchor, f=float(attrs[0]), e=float(attrs[1]),
            radius=float(pl.get("radius", 60.0)), span=float(pl.get("span", math.pi)),
            angle=float(pl.get("rest_angle", math.pi / 2)), sweep=float(attrs[2]) * config.sweep_scale,
        )
    raise ValueError(f"class {cls.class_id!r} has no wall shape")


def apply_attributes(wall: WallGeometry, obj: ObjectInstance, config: PhysicsConfig) -> None:
    """Refresh a wall's material and action-controlled fields from its object."""
    wall.f = float(obj.attributes[0])
    wall.e = float(obj.attributes[1])
    if wall.kind == "segment":
        wall.angle = float(obj.attributes[2])
    else:
        wall.sweep = float(obj.attributes[2]) * config.sweep_scale


@dataclass
class World:
    ball: BallState
    walls: list[WallGeometry]
    wall_ids: list[int]
    config: PhysicsConfig = field(default_factory=PhysicsConfig)
    t: float = 0.0
    done: bool = False
    outcome: str = TIME_LIMIT
    diagnostic: str = ""
    min_d: float = math.inf
    in_contact: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if not self.in_contact:
            self.in_contact = [False] * len(self.walls)
        self._sample_distance()

    def _sample_distance(self) -> None:
        bx, by = self.config.basket_center
        self.min_d = min(self.min_d, math.hypot(self.ball.x - bx, self.ball.y - by))

    def in_basket(self) -> bool:
        c = self.config
        return abs(self.ball.x - c.basket_x) <= c.basket_half_width and 0.0 <= self.ball.y <= c.basket_depth

    def out_of_bounds(self) -> bool:
        c = self.config
        return self.ball.x < 0.0 or self.ball.x > c.arena_width or self.ball.y < 0.0


ContactHook = Callable[[int, BallState], None]


def step(world: World, dt: float, on_contact: ContactHook | None = None) -> list:
    """Advance ``world`` by ``dt``. Returns events in the order they happened.

    ``on_contact(wall_index, pre_state)`` runs at the start of every new
    approaching contact, before the collision is resolved, so a caller can
    change that wall's attributes first.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    events: list = []
    if world.done:
        return events
    c = world.config
    b = world.ball
    r = c.ball_radius
    if world.in_basket():
        world.done, world.outcome = True, IN_BASKET
        return [BasketEntry(world.t)]
    if not all(math.isfinite(v) for v in (b.x, b.y, b.vx, b.vy, b.spin)):
        world.done, world.outcome = True, OUT_OF_BOUNDS
        world.diagnostic = f"simulation fault: non-finite ball state at t={world.t:.4f}"
        return [BoundaryExit(world.t, "fault")]
    reach = b.speed * dt + c.gravity * dt * dt
    n_sub = max(1, math.ceil(reach / (0.5 * r)))
    h = dt / n_sub
    for _ in range(n_sub):
        b.vy -= c.gravity * h
        b.x += b.vx * h
        b.y += b.vy * h
        world.t += h
        for idx, w in enumerate(world.walls):
            dist = surface_distance(b, w)
            if dist > r + c.contact_eps:
                world.in_contact[idx] = False
                continue
            nx, ny = contact_normal(b, w)
            approaching = b.vx * nx + b.vy * ny < 0.0
            if not world.in_contact[idx]:
                world.in_contact[idx] = True
                if not approaching:
                    continue
                pre = b.copy()
                offset = (b.x - w.anchor[0], b.y - w.anchor[1])
                if on_contact is not None:
                    on_contact(idx, pre)
                    nx, ny = _side_normal(b, w, (nx, ny))
                post = _collide(b, w, r, c.spin_coupling, (nx, ny))
                b.vx, b.vy, b.spin = post.vx, post.vy, post.spin
                _push_out(b, w, r, (nx, ny))
                events.append(Interaction(world.wall_ids[idx], idx, pre, post, world.t, offset))
            elif approaching:
                # Sustained contact: drop the approaching normal velocity, no new event.
                v_n = b.vx * nx + b.vy * ny
                b.vx -= v_n * nx
                b.vy -= v_n * ny
                _push_out(b, w, r)
        if not all(math.isfinite(v) for v in (b.x, b.y, b.vx, b.vy, b.spin)):
            world.done, world.outcome = True, OUT_OF_BOUNDS
            world.diagnostic = f"simulation fault: non-finite ball state at t={world.t:.4f}"
            events.append(BoundaryExit(world.t, "fault"))
            return events
        if world.in_basket():
            world._sample_distance()
            world.done, world.outcome = True, IN_BASKET
            events.append(BasketEntry(world.t))
            return events
        if world.out_of_bounds():
            world.done, world.outcome = True, OUT_OF_BOUNDS
            events.append(BoundaryExit(world.t, "arena"))
            break
    world._sample_distance()
    return events


def _side_normal(b: BallState, w: WallGeometry, before: tuple[float, float]) -> tuple[float, float]:
    """Contact normal after the wall may have just turned under the ball.

    If the turn swept the wall past the ball's centre, the ball still counts as
    being on the side it came from, so the face normal on that side is used.
    """
    nx, ny = contact_normal(b, w)
    if nx * before[0] + ny * before[1] > 0.0 or w.kind != "segment":
        return nx, ny
    fx, fy = -math.sin(w.angle), math.cos(w.angle)
    if fx * before[0] + fy * before[1] < 0.0:
        fx, fy = -fx, -fy
    return fx, fy


def _push_out(b: BallState, w: WallGeometry, r: float, side: tuple[float, float] | None = None) -> None:
    px, py = nearest_point(w, b.x, b.y)
    if side is not None and (b.x - px) * side[0] + (b.y - py) * side[1] < r:
        # Put the ball back on its own side of the wall.
        depth = (b.x - px) * side[0] + (b.y - py) * side[1]
        b.x += (r - depth) * side[0]
        b.y += (r - depth) * side[1]
        return
    dx, dy = b.x - px, b.y - py
    d = math.hypot(dx, dy)
    if d < r:
        if d > 1e-12:
            nx, ny = dx / d, dy / d
        else:
            nx, ny = contact_normal(b, w)
        b.x, b.y = px + nx * r, py + ny * r


# -- episodes ----------------------------------------------------------------------


@dataclass
class SpawnSpec:
    """Uniform ranges for the ball's starting position and motion."""

    x: tuple[float, float] = (100.0, 160.0)
    y: tuple[float, float] = (380.0, 460.0)
    vx: tuple[float, float] = (-20.0, 20.0)
    vy: tuple[float, float] = (0.0, 0.0)
    spin: tuple[float, float] = (0.0, 0.0)

    def sample(self, rng: np.random.Generator) -> tuple[float, ...]:
        return tuple(float(rng.uniform(lo, hi)) for lo, hi in (self.x, self.y, self.vx, self.vy, self.spin))


@dataclass
class AimedSpawn:
    """Spawn on a ballistic arc that reaches ``target + (dx, 0)`` with velocity
    ``(vx, vy)`` after ``flight`` seconds. Keeps contacts with a wall likely
    while giving wide variety in the incoming velocity."""

    target: tuple[float, float] = (130.0, 260.0)
    dx: tuple[float, float] = (-45.0, 45.0)
    vx: tuple[float, float] = (-150.0, 150.0)
    vy: tuple[float, float] = (-400.0, -150.0)
    flight: tuple[float, float] = (0.3, 0.8)
    gravity: float = 300.0

    def sample(self, rng: np.random.Generator) -> tuple[float, ...]:
        xc = self.target[0] + rng.uniform(*self.dx)
        yc = self.target[1]
        vcx, vcy = rng.uniform(*self.vx), rng.uniform(*self.vy)
        t = rng.uniform(*self.flight)
        v0y = vcy + self.gravity * t
        x0 = xc - vcx * t
        y0 = yc - v0y * t + 0.5 * self.gravity * t * t
        return (float(x0), float(y0), float(vcx), float(v0y), 0.0)


@dataclass
class EpisodeConfig:
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    spawn: SpawnSpec | AimedSpawn = field(default_factory=SpawnSpec)


PolicyHook = Callable[[ObjectInstance, object], object]


def build_world(scene: Scene, ball: BallState, physics: PhysicsConfig) -> World:
    walls, ids = [], []
    for obj in scene.active_objects():
        cls = scene.classes[obj.class_id]
        walls.append(wall_from_instance(obj, cls, physics))
        ids.append(obj.object_id)
    return World(ball, walls, ids, physics)


def spawn_ball(scene: Scene, config: EpisodeConfig, rng: np.random.Generator) -> BallState:
    neutrals = [o for o in scene.neutral_objects() if scene.classes[o.class_id].shape == "ball"]
    if len(neutrals) != 1:
        raise ValueError(f"scene needs exactly one neutral ball, found {len(neutrals)}")
    schema = scene.classes[neutrals[0].class_id].schema
    obj = neutrals[0]
    x, y, vx, vy, spin = config.spawn.sample(rng)
    return BallState(
        x, y, vx, vy, spin,
        f=obj.attribute("f_b", schema), e=obj.attribute("e_b", schema), m=obj.attribute("m_b", schema),
    )


def simulate(
    scene: Scene,
    policy_hook: PolicyHook | None,
    config: EpisodeConfig,
    ball: BallState,
    trace: IO[str] | None = None,
) -> EpisodeRecord:
    """Run one episode without computing a reward.

    On the first approaching contact between the ball and an active object that
    has not acted yet, ``policy_hook(object, observation)`` picks the action,
    which overwrites the object's attributes before the collision is resolved.
    Later contacts with that object use its fixed attributes.
    """
    if scene.n_active == 0:
        raise NoActiveObjects("an episode needs at least one active object")
    phys = config.physics
    world = build_world(scene, ball, phys)
    record = EpisodeRecord(spawn=ball.copy())
    acted: dict[int, tuple] = {}

    def on_contact(idx: int, pre: BallState) -> None:
        obj = scene.objects[world.wall_ids[idx]]
        before = obj.attributes.tolist()
        action = None
        if policy_hook is not None and obj.active and not obj.has_acted_this_episode:
            obs = scene.observation(obj.object_id, pre.attribute_vector(), (pre.x, pre.y))
            raw = policy_hook(obj, obs)
            obj.has_acted_this_episode = True
            if raw is not None:
                cls = scene.classes[obj.class_id]
                spec = cls.action_spec
                action = spec.clip(raw)
                scene.set_attributes(obj.object_id, dict(zip(spec.attributes, action.tolist())))
                apply_attributes(world.walls[idx], obj, phys)
                action = action.tolist()
        acted[idx] = (action, before, obj.attributes.tolist())

    try:
        while not world.done and world.t < phys.time_limit - 1e-12:
            events = step(world, phys.dt, on_contact)
            for ev in events:
                if isinstance(ev, Interaction):
                    action, before, after = acted.pop(ev.wall_index)
                    record.interactions.append(
                        InteractionRecord(ev.object_id, ev.pre, action, ev.post, ev.time, before, after, ev.offset)
                    )
            if trace is not None:
                trace.write(_trace_line(world, events) + "\n")
    finally:
        scene.reset_episode_flags()
    record.outcome = world.outcome if world.done else TIME_LIMIT
    record.min_basket_distance = world.min_d
    record.duration = world.t
    record.diagnostic = world.diagnostic
    return record


def run_episode(
    scene: Scene,
    policy_hook: PolicyHook | None,
    config: EpisodeConfig,
    rng: np.random.Generator,
    trace: IO[str] | None = None,
) -> EpisodeRecord:
    """Spawn the ball at a random position, simulate, and score the episode."""
    if scene.n_active == 0:
        raise NoActiveObjects("an episode needs at least one active object")
    ball = spawn_ball(scene, config, rng)
    record = simulate(scene, policy_hook, config, ball, trace)
    record.reward = compute_reward(record)
    return record


def _trace_line(world: World, events: list) -> str:
    evs = []
    for ev in events:
        if isinstance(ev, Interaction):
            evs.append({"type": "Interaction", "object_id": ev.object_id, "time": ev.time})
        elif isinstance(ev, BasketEntry):
            evs.append({"type": "BasketEntry", "time": ev.time})
        else:
            evs.append({"type": "BoundaryExit", "time": ev.time, "reason": ev.reason})
    return json.dumps(
        {"format_version": TRACE_FORMAT_VERSION, "t": world.t, "ball": world.ball.to_dict(), "events": evs},
        sort_keys=True,
    )

