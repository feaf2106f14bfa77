"""Per-object reward models, sampled-argmax action selection and trust factors.

A reward model regresses the episode reward on ``(ball state, conditioning,
action)``. There is no bootstrapping: an object acts at most once per episode,
so the target is the observed reward itself.

Every active object holds its own model and, when its class publishes one, a
private copy of the class model. The trust factor over the last ``K``
residuals decides which of the two is in use::

    TF = 1 / (1 + sum_k |r_k - Q_k|)

and a value at or below the threshold ``h`` switches to the other model.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InactiveObject, RewardOutOfRange, WindowNotFull
from .nn import AffineNormalizer, Mlp, ReplayBuffer, make_optimizer, sample_minibatch, train_minibatch
from .objects import ActionSpec, ObjectInstance

log = logging.getLogger(__name__)

OWN_MODEL = "own"
CLASS_MODEL = "class"


class QModel:
    def __init__(self, net: Mlp, action_spec: ActionSpec, in_norm: AffineNormalizer, state_dim: int = 4):
        self.net = net
        self.action_spec = action_spec
        self.in_norm = in_norm
        self.state_dim = state_dim
        self.calls = 0
        self.updates = 0
        self.optimizer = None

    @classmethod
    def fresh(
        cls,
        state_bounds: tuple[np.ndarray, np.ndarray],
        cond_bounds: tuple[np.ndarray, np.ndarray],
        action_spec: ActionSpec,
        rng: np.random.Generator,
        hidden: tuple[int, ...] = (64, 64),
        init_scale: float = 0.1,
    ) -> "QModel":
        lo = np.concatenate([state_bounds[0], cond_bounds[0], action_spec.low])
        hi = np.concatenate([state_bounds[1], cond_bounds[1], action_spec.high])
        net = Mlp.uniform_init([len(lo), *hidden, 1], rng, init_scale)
        return cls(net, action_spec, AffineNormalizer(lo, hi), len(state_bounds[0]))

    def encode(self, state, cond, actions) -> np.ndarray:
        actions = np.asarray(actions, dtype=float).reshape(-1, self.action_spec.dim)
        state = np.atleast_2d(np.asarray(state, dtype=float))
        cond = np.atleast_2d(np.asarray(cond, dtype=float))
        n = max(len(actions), len(state), len(cond))
        X = np.empty((n, self.net.n_inputs))
        s, c = state.shape[1], cond.shape[1]
        X[:, :s] = state
        X[:, s: s + c] = cond
        X[:, s + c:] = actions
        return self.in_norm.encode(X)

    def values(self, state, cond, actions, dtype=np.float64) -> np.ndarray:
        self.calls += 1
        return self.net.forward(self.encode(state, cond, actions), dtype)[:, 0]

    def value(self, state, cond, action) -> float:
        return float(self.values(state, cond, action)[0])

    def copy(self) -> "QModel":
        return QModel(self.net.copy(), self.action_spec, self.in_norm, self.state_dim)

    def to_dict(self) -> dict:
        d = self.net.to_dict()
        d["normalization"] = {"input": self.in_norm.to_dict()}
        d["state_dim"] = self.state_dim
        d["action_spec"] = {
            "attributes": list(self.action_spec.attributes),
            "bounds": [list(b) for b in self.action_spec.bounds],
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QModel":
        spec = ActionSpec(tuple(d["action_spec"]["attributes"]), tuple(tuple(b) for b in d["action_spec"]["bounds"]))
        return cls(Mlp.from_dict(d), spec, AffineNormalizer.from_dict(d["normalization"]["input"]), d["state_dim"])


@dataclass
class TrustState:
    window: int = 20
    threshold: float = 0.25
    in_use: str = OWN_MODEL
    residuals: deque = field(default_factory=deque)
    evaluations: int = 0
    since_evaluation: int = 0
    swaps: int = 0
    missing_class_model: int = 0
    last_tf: float | None = None

    def __post_init__(self):
        if self.window <= 0 or not 0 < self.threshold <= 1:
            raise ValueError("need window > 0 and threshold in (0, 1]")
        self.residuals = deque(self.residuals, maxlen=self.window)

    @property
    def full(self) -> bool:
        return len(self.residuals) == self.window

    @property
    def due(self) -> bool:
        return self.full and self.since_evaluation >= self.window

    def to_dict(self) -> dict:
        return {"K": self.window, "h": self.threshold, "in_use": self.in_use}


def record_residual(trust: TrustState, residual: float) -> None:
    trust.residuals.append(abs(float(residual)))
    trust.since_evaluation += 1


def trust_factor(trust: TrustState) -> float:
    if not trust.full:
        raise WindowNotFull(f"{len(trust.residuals)} of {trust.window} residuals")
    return 1.0 / (1.0 + sum(trust.residuals))


def active_q(obj: ObjectInstance) -> QModel:
    if obj.trust is not None and obj.trust.in_use == CLASS_MODEL and obj.class_q_copy is not None:
        return obj.class_q_copy
    return obj.own_q


def maybe_swap(obj: ObjectInstance, class_q: QModel | None = None) -> bool:
    """Evaluate the trust factor and switch models when it is at or below ``h``.

    Switching to the class model takes a fresh private copy of ``class_q`` (or
    keeps the copy made at spawn when none is given). Without any class model
    the call only counts a warning.
    """
    trust = obj.trust
    if trust is None or not trust.full:
        return False
    tf = trust_factor(trust)
    trust.last_tf = tf
    trust.evaluations += 1
    trust.since_evaluation = 0
    if tf > trust.threshold:
        return False
    if trust.in_use == OWN_MODEL:
        if class_q is not None:
            obj.class_q_copy = class_q.copy()
        if obj.class_q_copy is None:
            trust.missing_class_model += 1
            log.debug("object %s: no class reward model to switch to", obj.object_id)
            return False
        trust.in_use = CLASS_MODEL
    else:
        trust.in_use = OWN_MODEL
    trust.residuals.clear()
    trust.swaps += 1
    return True


def sample_actions(spec: ActionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(spec.low, spec.high, size=(n, spec.dim))


def select_action(
    obj: ObjectInstance,
    predicted_post: np.ndarray | Callable[[np.ndarray], np.ndarray],
    cond: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
    dtype=np.float64,
) -> tuple[np.ndarray, float]:
    """Sample ``n_samples`` actions uniformly and return the best under the model in use.

    ``predicted_post`` is either one state vector shared by every candidate, or
    a function mapping the ``(n, action_dim)`` candidates to per-candidate
    states. Ties go to the lowest sample index. The returned value is always
    evaluated in float64, whatever ``dtype`` the candidates were scored in.
    """
    if not obj.active:
        raise InactiveObject(f"object {obj.object_id} is neutral")
    q = active_q(obj)
    actions = sample_actions(q.action_spec, n_samples, rng)
    states = predicted_post(actions) if callable(predicted_post) else predicted_post
    values = q.values(states, cond, actions, dtype)
    best = int(np.argmax(values))
    if dtype == np.float64:
        return actions[best].copy(), float(values[best])
    state = states[best] if np.ndim(states) == 2 else states
    return actions[best].copy(), q.value(state, cond, actions[best])


def update_q(
    obj: ObjectInstance,
    triplet: tuple,
    buffer: ReplayBuffer,
    rng: np.random.Generator,
    lr: float = 1e-3,
    batch_size: int = 32,
    steps: int = 1,
    optimizer: str = "sgd",
) -> float:
    """Store ``(state, cond, action, reward)`` and train the model in use.

    Returns the loss of the first minibatch.
    """
    state, cond, action, reward = triplet
    if not 0.0 <= reward <= 1.0:
        raise RewardOutOfRange(f"reward {reward} outside [0, 1]")
    buffer.append((state, cond, action, [reward]))
    q = active_q(obj)
    if q.optimizer is None:
        q.optimizer = make_optimizer(optimizer)
    first = None
    for _ in range(steps):
        s, c, a, r = sample_minibatch(buffer, batch_size, rng)
        loss = train_minibatch(q.net, q.encode(s, c, a), r, lr, q.optimizer)
        q.updates += 1
        if first is None:
            first = loss
    return first
