"""Per-class local transition models.

A transition model maps the ball's dynamic state just before touching an
active object, ``[v_x, v_y, spin, theta]``, to its state just after. Inputs are
conditioned on the ball's constant attributes, the acting object's attributes
at contact and the ball's offset from the object's anchor::

    input  = [v_x, v_y, spin, theta | f_b, e_b, m_b | attr_1, attr_2, attr_3 | dx, dy]
    output = [v_x', v_y', spin']            (theta' is re-derived from v')
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import physics
from .errors import ColdModel, InsufficientData, NonFiniteState
from .nn import AffineNormalizer, Mlp, dump_json, load_json, make_optimizer, train_minibatch
from .objects import ObjectClass, Scene

# Velocity, spin and offset scales used by the fixed input/output normalisation.
VELOCITY_SCALE = 600.0
SPIN_SCALE = 10.0
OFFSET_SCALE = 100.0
DYNAMIC_DIM = 4


def conditioning_vector(ball_constants, attributes, offset) -> np.ndarray:
    return np.concatenate(
        [np.asarray(ball_constants, float), np.asarray(attributes, float), np.asarray(offset, float)]
    )


def conditioning_bounds(obj_class: ObjectClass, ball_class: ObjectClass) -> tuple[np.ndarray, np.ndarray]:
    b_lo, b_hi = ball_class.schema.ranges()
    a_lo, a_hi = obj_class.schema.ranges()
    lo = np.concatenate([b_lo[4:7], a_lo, [-OFFSET_SCALE, -OFFSET_SCALE]])
    hi = np.concatenate([b_hi[4:7], a_hi, [OFFSET_SCALE, OFFSET_SCALE]])
    return lo, hi


def dynamic_bounds() -> tuple[np.ndarray, np.ndarray]:
    v, s = VELOCITY_SCALE, SPIN_SCALE
    return np.array([-v, -v, -s, -math.pi]), np.array([v, v, s, math.pi])


@dataclass
class TransitionDataset:
    class_id: str
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)
    cond: list[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pre)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.array(self.pre), np.array(self.post), np.array(self.cond)


def record_interaction(dataset: TransitionDataset, pre, post, cond) -> None:
    pre = np.asarray(pre, dtype=float)
    post = np.asarray(post, dtype=float)
    cond = np.asarray(cond, dtype=float)
    if pre.shape != (DYNAMIC_DIM,) or post.shape != (DYNAMIC_DIM,):
        raise ValueError("pre and post must be 4-vectors [v_x, v_y, spin, theta]")
    for v in (pre, post, cond):
        if not np.isfinite(v).all():
            raise NonFiniteState(f"non-finite state {v}")
    dataset.pre.append(pre)
    dataset.post.append(post)
    dataset.cond.append(cond)


def record_episode(datasets: dict[str, TransitionDataset], scene: Scene, record: physics.EpisodeRecord) -> int:
    """Append every interaction of an episode to its acting class's dataset."""
    n = 0
    for inter in record.interactions:
        class_id = scene.class_of(inter.object_id)
        ds = datasets.setdefault(class_id, TransitionDataset(class_id))
        cond = conditioning_vector([inter.pre.f, inter.pre.e, inter.pre.m], inter.attrs_after, inter.offset)
        record_interaction(ds, inter.pre.dynamic_vector(), inter.post.vector(), cond)
        n += 1
    return n


class TransitionModel:
    def __init__(
        self,
        class_id: str,
        net: Mlp,
        in_norm: AffineNormalizer,
        out_norm: AffineNormalizer,
        trained_samples: int = 0,
        strict: bool = True,
    ):
        self.class_id = class_id
        self.net = net
        self.in_norm = in_norm
        self.out_norm = out_norm
        self.trained_samples = trained_samples
        self.strict = strict
        self.train_steps = 0
        self.predict_calls = 0
        self.optimizer = None

    @classmethod
    def create(
        cls,
        obj_class: ObjectClass,
        ball_class: ObjectClass,
        rng: np.random.Generator,
        hidden: tuple[int, ...] = (64, 64),
    ) -> "TransitionModel":
        d_lo, d_hi = dynamic_bounds()
        c_lo, c_hi = conditioning_bounds(obj_class, ball_class)
        in_norm = AffineNormalizer(np.concatenate([d_lo, c_lo]), np.concatenate([d_hi, c_hi]))
        out_norm = AffineNormalizer(d_lo[:3], d_hi[:3])
        net = Mlp.xavier_init([len(in_norm), *hidden, 3], rng)
        return cls(obj_class.class_id, net, in_norm, out_norm)

    @property
    def cold(self) -> bool:
        return self.trained_samples == 0

    def encode_inputs(self, pre, cond) -> np.ndarray:
        pre = np.atleast_2d(np.asarray(pre, dtype=float))
        cond = np.atleast_2d(np.asarray(cond, dtype=float))
        n = max(len(pre), len(cond))
        X = np.empty((n, pre.shape[1] + cond.shape[1]))
        X[:, : pre.shape[1]] = pre
        X[:, pre.shape[1]:] = cond
        return self.in_norm.encode(X)

    def predict_batch(self, pre, cond, dtype=np.float64) -> np.ndarray:
        """Rows of ``[v_x', v_y', spin', theta']``; ``pre``/``cond`` broadcast over rows."""
        if self.cold and self.strict:
            raise ColdModel(f"transition model for {self.class_id!r} has not been trained")
        self.predict_calls += 1
        out = self.out_norm.decode(self.net.forward(self.encode_inputs(pre, cond), dtype))
        theta = np.arctan2(out[:, 1], out[:, 0])
        return np.column_stack([out, theta])

    def predict(self, pre, cond) -> physics.PostInteractionState:
        vx, vy, spin, _ = self.predict_batch(pre, cond)[0]
        return physics.PostInteractionState(float(vx), float(vy), float(spin))

    def _targets(self, post: np.ndarray) -> np.ndarray:
        return self.out_norm.encode(np.atleast_2d(post)[:, :3])

    def train_step(self, dataset: TransitionDataset, rng, lr=1e-3, batch_size=32, optimizer="sgd") -> float:
        """One minibatch update sampled uniformly from ``dataset``."""
        pre, post, cond = dataset.arrays()
        idx = rng.integers(0, len(pre), size=batch_size)
        if self.optimizer is None:
            self.optimizer = make_optimizer(optimizer)
        loss = train_minibatch(
            self.net, self.encode_inputs(pre[idx], cond[idx]), self._targets(post[idx]), lr, self.optimizer
        )
        self.train_steps += 1
        self.trained_samples = max(self.trained_samples, len(dataset))
        return loss

    def copy(self) -> "TransitionModel":
        return TransitionModel.from_dict(self.to_dict())

    def to_dict(self) -> dict:
        d = self.net.to_dict()
        d.update(
            {
                "normalization": {"input": self.in_norm.to_dict(), "output": self.out_norm.to_dict()},
                "class_id": self.class_id,
                "conditioning_layout": ["f_b", "e_b", "m_b", "attr_1", "attr_2", "attr_3", "dx", "dy"],
                "trained_samples": self.trained_samples,
            }
        )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TransitionModel":
        norm = d["normalization"]
        return cls(
            d["class_id"],
            Mlp.from_dict(d),
            AffineNormalizer.from_dict(norm["input"]),
            AffineNormalizer.from_dict(norm["output"]),
            int(d["trained_samples"]),
        )

    def save(self, path: str | Path) -> None:
        dump_json(self.to_dict(), path)

    @classmethod
    def load(cls, path: str | Path) -> "TransitionModel":
        return cls.from_dict(load_json(path))


def fit(
    model: TransitionModel,
    dataset: TransitionDataset,
    epochs: int,
    rng: np.random.Generator,
    lr: float = 1e-3,
    batch_size: int = 32,
    optimizer: str = "adam",
    holdout: float = 0.1,
) -> float:
    """Train on 90% of ``dataset``; return MSE on the held-out 10% (normalised outputs)."""
    n = len(dataset)
    if n < max(batch_size, 2):
        raise InsufficientData(f"{n} pairs, need at least {max(batch_size, 2)}")
    pre, post, cond = dataset.arrays()
    order = rng.permutation(n)
    n_test = max(1, int(round(holdout * n)))
    test, train = order[:n_test], order[n_test:]
    X = model.encode_inputs(pre, cond)
    Y = model._targets(post)
    opt = make_optimizer(optimizer)
    for _ in range(epochs):
        perm = rng.permutation(train)
        for start in range(0, len(perm), batch_size):
            b = perm[start: start + batch_size]
            train_minibatch(model.net, X[b], Y[b], lr, opt)
            model.train_steps += 1
    model.trained_samples += len(train)
    return model.net.loss(X[test], Y[test])


def r2_scores(model: TransitionModel, dataset: TransitionDataset) -> np.ndarray:
    """Coefficient of determination per output dimension.

    The angle dimension uses residuals wrapped to ``(-pi, pi]``.
    """
    pre, post, cond = dataset.arrays()
    pred = model.predict_batch(pre, cond)
    resid = pred - post
    resid[:, 3] = (resid[:, 3] + math.pi) % (2 * math.pi) - math.pi
    ss_res = np.sum(resid**2, axis=0)
    ss_tot = np.sum((post - post.mean(axis=0)) ** 2, axis=0)
    return 1.0 - ss_res / np.where(ss_tot > 0, ss_tot, 1.0)


# -- reward-free pretraining -------------------------------------------------------


@dataclass
class PretrainConfig:
    """Randomised single-wall trials used to learn a class's dynamics.

    Each trial aims the ball at a random point along the wall with an incoming
    velocity drawn from ``vx`` x ``vy``. With ``random_actions`` the wall takes
    a uniform random action at first contact, as it would under a policy, so
    the data covers walls that change just before the bounce. Nothing about any
    task is involved.
    """

    physics: physics.PhysicsConfig = field(default_factory=lambda: physics.PhysicsConfig(time_limit=3.0))
    anchor: tuple[float, float] = (250.0, 250.0)
    placement: dict = field(default_factory=dict)
    vx: tuple[float, float] = (-200.0, 200.0)
    vy: tuple[float, float] = (-450.0, -20.0)
    flight: tuple[float, float] = (0.1, 0.6)
    spin: tuple[float, float] = (-5.0, 5.0)
    rest_angle_jitter: float = 0.6
    spawn_fraction: float = 0.95
    random_actions: bool = True
    epochs: int = 200
    lr: float = 1e-3
    batch_size: int = 32
    optimizer: str = "adam"
    hidden: tuple[int, ...] = (64, 64)


def default_placement(shape: str) -> dict:
    if shape == "segment":
        return {"half_length": 60.0}
    return {"radius": 60.0, "span": math.pi, "rest_angle": math.pi / 2}


def collect_interactions(
    class_id: str, n_interactions: int, config: PretrainConfig, rng: np.random.Generator
) -> TransitionDataset:
    """Simulate randomised single-wall trials until ``n_interactions`` pairs are recorded.

    Nothing here scores an episode.
    """
    classes = {c.class_id: c for c in physics.basketball_classes()}
    obj_class = classes[class_id]
    ball_class = classes[physics.NEUTRAL_BALL]
    placement = default_placement(obj_class.shape) | dict(config.placement)
    extent = placement.get("half_length", placement.get("radius", 60.0))
    dataset = TransitionDataset(class_id)
    ax, ay = config.anchor
    # Aim at the top of the wall: a segment's centre line, or an arc's crown.
    top = ay + config.physics.ball_radius + (placement["radius"] if obj_class.shape == "arc" else 0.0)
    reach = config.spawn_fraction * extent
    aim = physics.AimedSpawn(
        (ax, top), (-reach, reach), config.vx, config.vy, config.flight, config.physics.gravity
    )
    ep_config = physics.EpisodeConfig(physics=config.physics)
    spec = obj_class.action_spec
    hook = None
    if config.random_actions and spec.dim:
        hook = lambda obj, obs: rng.uniform(spec.low, spec.high)  # noqa: E731
    while len(dataset) < n_interactions:
        scene = Scene()
        for c in classes.values():
            scene.register_class(c)
        lo, hi = obj_class.schema.ranges()
        attrs = dict(zip(obj_class.schema.names, rng.uniform(lo, hi).tolist()))
        pl = dict(placement, anchor=(ax, ay))
        if obj_class.shape == "arc":
            pl["rest_angle"] = placement["rest_angle"] + rng.uniform(-1, 1) * config.rest_angle_jitter
        scene.spawn_object(class_id, attrs, True, pl)
        b_lo, b_hi = ball_class.schema.ranges()
        f_b, e_b, m_b = rng.uniform(b_lo[4:7], b_hi[4:7])
        scene.spawn_object(
            physics.NEUTRAL_BALL,
            dict(v_x=0.0, v_y=0.0, spin=0.0, theta_b=0.0, f_b=f_b, e_b=e_b, m_b=m_b),
            False,
        )
        x, y, vx, vy, _ = aim.sample(rng)
        ball = physics.BallState(x, y, vx, vy, rng.uniform(*config.spin), f_b, e_b, m_b)
        record = physics.simulate(scene, hook, ep_config, ball)
        record_episode({class_id: dataset}, scene, record)
    del dataset.pre[n_interactions:], dataset.post[n_interactions:], dataset.cond[n_interactions:]
    return dataset


def pretrain_offline(
    class_id: str,
    n_interactions: int,
    config: PretrainConfig | None = None,
    rng: np.random.Generator | None = None,
) -> TransitionModel:
    """Learn a class's transition model in a reward-free randomised simulator."""
    if n_interactions <= 0:
        raise ValueError("n_interactions must be positive")
    config = config or PretrainConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    dataset = collect_interactions(class_id, n_interactions, config, rng)
    classes = {c.class_id: c for c in physics.basketball_classes()}
    model = TransitionModel.create(classes[class_id], classes[physics.NEUTRAL_BALL], rng, config.hidden)
    fit(model, dataset, config.epochs, rng, config.lr, config.batch_size, config.optimizer)
    return model
