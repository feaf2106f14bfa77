"""Runnable agents: plug-and-play (offline/online transition models) and DQN baselines.

Every agent exposes the same hooks so the harness does not care which one it
drives::

    agent.attach(scene)
    agent.begin_episode(index)
    action = agent.act(obj, observation)     # policy hook for run_episode
    info = agent.end_episode(record)
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from . import physics
from .errors import ColdModel, ConfigError
from .nn import ReplayBuffer
from .objects import ObjectClass, ObjectInstance, Observation, Scene
from .reward import (
    CLASS_MODEL,
    QModel,
    TrustState,
    active_q,
    maybe_swap,
    record_residual,
    sample_actions,
    select_action,
    update_q,
)
from .transition import (
    TransitionDataset,
    TransitionModel,
    conditioning_bounds,
    conditioning_vector,
    dynamic_bounds,
    record_episode,
)

PAP_OFFLINE = "PaPOffline"
PAP_ONLINE = "PaPOnline"
DQN = "Dqn"
MO_DQN = "MoDqn"
AGENT_KINDS = (PAP_OFFLINE, PAP_ONLINE, DQN, MO_DQN)


@dataclass
class AgentParams:
    n_action_samples: int = 10_000
    q_hidden: tuple[int, ...] = (64, 64)
    q_lr: float = 1e-3
    q_batch: int = 32
    q_steps: int = 4
    q_optimizer: str = "adam"
    q_init_scale: float = 0.1
    buffer_capacity: int = 10_000
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_decay_fraction: float = 0.25
    trust_window: int = 20
    trust_threshold: float = 0.25
    transition_hidden: tuple[int, ...] = (64, 64)
    transition_lr: float = 1e-3
    transition_batch: int = 32
    transition_optimizer: str = "sgd"
    cold_threshold: int = 64
    # "action": predict the post-contact state for every candidate action;
    # "literal": one prediction from the object's pre-action attributes.
    prediction_mode: str = "action"
    # Precision used to score the sampled candidates ("float32" or "float64").
    score_precision: str = "float32"

    @classmethod
    def from_dict(cls, d: dict) -> "AgentParams":
        known = {f.name for f in fields(cls)}
        for key in d:
            if key not in known:
                raise ConfigError(f"agent.params.{key}", "unknown key")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        params = cls(**kw)
        if params.prediction_mode not in ("action", "literal"):
            raise ConfigError("agent.params.prediction_mode", "must be 'action' or 'literal'")
        if params.score_precision not in ("float32", "float64"):
            raise ConfigError("agent.params.score_precision", "must be 'float32' or 'float64'")
        return params

    @property
    def score_dtype(self):
        return np.float32 if self.score_precision == "float32" else np.float64


def seed_streams(seed: int) -> list[np.random.SeedSequence]:
    """Independent streams for one seed: action sampling, training, model
    initialisation and the environment, in that order."""
    return np.random.SeedSequence(seed).spawn(4)


@dataclass
class Decision:
    state: np.ndarray
    cond: np.ndarray
    action: np.ndarray
    predicted_post: np.ndarray | None
    predicted_reward: float | None


def conditioning(obs: Observation) -> np.ndarray:
    """Ball constants, the object's own (pre-action) attributes and the ball offset."""
    return conditioning_vector(obs.neutral[4:7], obs.own, obs.offset)


class BaseAgent:
    kind = ""

    def __init__(self, params: AgentParams, seed: int, total_episodes: int):
        self.params = params
        self.seed = seed
        self.total_episodes = max(1, total_episodes)
        act_ss, train_ss, init_ss, _ = seed_streams(seed)
        self.act_rng = np.random.default_rng(act_ss)
        self.train_rng = np.random.default_rng(train_ss)
        self.init_entropy = int(init_ss.generate_state(1)[0])
        self.scene: Scene | None = None
        self.buffers: dict[int, ReplayBuffer] = {}
        self.pending: dict[int, Decision] = {}
        self.epsilon = params.eps_start
        self.decisions = 0
        self.explorations = 0

    # -- wiring -------------------------------------------------------------------

    def attach(self, scene: Scene) -> None:
        self.scene = scene
        scene.model_factory = self._fresh_q
        scene.trust_factory = self._fresh_trust
        for obj in scene.active_objects():
            if obj.own_q is None:
                scene.init_models(obj)

    def _ball_class(self) -> ObjectClass:
        return self.scene.classes[physics.NEUTRAL_BALL]

    def _fresh_q(self, cls: ObjectClass, object_id: int) -> QModel:
        rng = np.random.default_rng([self.init_entropy, object_id])
        return QModel.fresh(
            dynamic_bounds(),
            conditioning_bounds(cls, self._ball_class()),
            cls.action_spec,
            rng,
            self.params.q_hidden,
            self.params.q_init_scale,
        )

    def _fresh_trust(self, inherited: bool):
        return None

    def before_spawn(self, class_id: str) -> None:
        """Called just before a new object of ``class_id`` joins the scene."""

    def forget(self, object_id: int) -> None:
        """Drop per-object state of a removed object."""
        self.buffers.pop(object_id, None)
        self.pending.pop(object_id, None)

    def buffer_for(self, object_id: int) -> ReplayBuffer:
        if object_id not in self.buffers:
            self.buffers[object_id] = ReplayBuffer(self.params.buffer_capacity)
        return self.buffers[object_id]

    # -- episode hooks ----------------------------------------------------------

    def begin_episode(self, episode: int) -> None:
        p = self.params
        horizon = p.eps_decay_fraction * self.total_episodes
        frac = min(1.0, episode / horizon) if horizon > 0 else 1.0
        self.epsilon = p.eps_start + (p.eps_end - p.eps_start) * frac
        self.pending.clear()

    def _explore(self) -> bool:
        return self.act_rng.random() < self.epsilon

    def act(self, obj: ObjectInstance, obs: Observation) -> np.ndarray:
        raise NotImplementedError

    def end_episode(self, record: physics.EpisodeRecord) -> dict[int, dict]:
        raise NotImplementedError

    def _acting(self, record: physics.EpisodeRecord):
        for inter in record.interactions:
            if inter.action is not None and inter.object_id in self.pending:
                yield inter, self.pending.pop(inter.object_id)


class PaPAgent(BaseAgent):
    """Reward models over post-contact states predicted by per-class transition models."""

    def __init__(
        self,
        params: AgentParams,
        seed: int,
        total_episodes: int,
        transitions: dict[str, TransitionModel] | None = None,
        online: bool = False,
    ):
        super().__init__(params, seed, total_episodes)
        self.online = online
        self.kind = PAP_ONLINE if online else PAP_OFFLINE
        self.transitions: dict[str, TransitionModel] = dict(transitions or {})
        self.datasets: dict[str, TransitionDataset] = {}
        self.cold_fallbacks = 0
        self.transition_steps = 0

    def _fresh_trust(self, inherited: bool) -> TrustState:
        trust = TrustState(self.params.trust_window, self.params.trust_threshold)
        if inherited:
            trust.in_use = CLASS_MODEL
        return trust

    def attach(self, scene: Scene) -> None:
        super().attach(scene)
        for obj in scene.active_objects():
            if obj.trust is None:
                obj.trust = self._fresh_trust(obj.class_q_copy is not None)

    def before_spawn(self, class_id: str) -> None:
        """Publish the most trained reward model of the class so the newcomer
        starts from it instead of from scratch."""
        peers = [o for o in self.scene.active_objects() if o.class_id == class_id and o.own_q is not None]
        if not peers:
            return
        best = max(peers, key=lambda o: (active_q(o).updates, -o.object_id))
        self.scene.classes[class_id].class_q = active_q(best).copy()

    def transition_for(self, class_id: str) -> TransitionModel:
        if class_id not in self.transitions:
            if not self.online:
                raise ConfigError(f"agent.params.checkpoints.{class_id}", "offline agent has no transition model")
            cls = self.scene.classes[class_id]
            rng = np.random.default_rng([self.init_entropy, 1_000_003, len(self.transitions)])
            self.transitions[class_id] = TransitionModel.create(
                cls, self._ball_class(), rng, self.params.transition_hidden
            )
        return self.transitions[class_id]

    def _post_predictor(
        self, model: TransitionModel, obj: ObjectInstance, pre: np.ndarray, cond: np.ndarray, dtype=np.float64
    ):
        """Map candidate actions to predicted post-contact states."""
        spec = self.scene.classes[obj.class_id].action_spec
        schema = self.scene.classes[obj.class_id].schema
        cols = [3 + schema.index(name) for name in spec.attributes]

        def predict(actions: np.ndarray) -> np.ndarray:
            c = np.repeat(cond[None, :], len(actions), axis=0)
            c[:, cols] = actions
            return model.predict_batch(pre, c, dtype)

        return predict

    def act(self, obj: ObjectInstance, obs: Observation) -> np.ndarray:
        p = self.params
        self.decisions += 1
        model = self.transition_for(obj.class_id)
        spec = self.scene.classes[obj.class_id].action_spec
        cond = conditioning(obs)
        pre = obs.neutral[:4]
        explore = self._explore()
        try:
            if p.prediction_mode == "action":
                predictor = self._post_predictor(model, obj, pre, cond)
                fast = self._post_predictor(model, obj, pre, cond, p.score_dtype)
            else:
                literal = model.predict_batch(pre, cond)[0]
                predictor = fast = lambda actions: literal  # noqa: E731
            if explore:
                self.explorations += 1
                action = sample_actions(spec, 1, self.act_rng)[0]
            else:
                action, _ = select_action(obj, fast, cond, p.n_action_samples, self.act_rng, p.score_dtype)
            post = predictor(action[None, :])
            post = post[0] if post.ndim == 2 else post
            value = active_q(obj).value(post, cond, action)
        except ColdModel:
            self.cold_fallbacks += 1
            action = sample_actions(spec, 1, self.act_rng)[0]
            post, value = None, None
        self.pending[obj.object_id] = Decision(pre, cond, action, post, value)
        return action

    def end_episode(self, record: physics.EpisodeRecord) -> dict[int, dict]:
        p = self.params
        r = float(record.reward)
        info: dict[int, dict] = {}
        for inter, d in self._acting(record):
            obj = self.scene.objects.get(inter.object_id)
            if obj is None:
                continue
            observed = inter.post.vector()
            q = active_q(obj)
            residual_state = d.predicted_post if d.predicted_post is not None else observed
            residual = abs(r - q.value(residual_state, d.cond, d.action))
            update_q(
                obj, (observed, d.cond, d.action, r), self.buffer_for(obj.object_id), self.train_rng,
                p.q_lr, p.q_batch, p.q_steps, p.q_optimizer,
            )
            record_residual(obj.trust, residual)
            tf = None
            if obj.trust.due:
                maybe_swap(obj, self.scene.classes[obj.class_id].class_q)
                tf = obj.trust.last_tf
            info[obj.object_id] = {
                "action": float(d.action[0]),
                "predicted_reward": d.predicted_reward,
                "tf": tf,
                "model": obj.trust.in_use,
            }
        if self.online:
            self._train_transitions(record)
        self.pending.clear()
        return info

    def _train_transitions(self, record: physics.EpisodeRecord) -> None:
        p = self.params
        for inter in record.interactions:
            class_id = self.scene.class_of(inter.object_id)
            ds = self.datasets.setdefault(class_id, TransitionDataset(class_id))
            single = physics.EpisodeRecord(interactions=[inter])
            record_episode({class_id: ds}, self.scene, single)
            if len(ds) >= p.cold_threshold:
                self.transition_for(class_id).train_step(
                    ds, self.train_rng, p.transition_lr, p.transition_batch, p.transition_optimizer
                )
                self.transition_steps += 1


class DqnAgent(BaseAgent):
    """Reward models over the pre-contact ball state; no transition model anywhere.

    With several active objects each keeps an independent network (MO-DQN).
    """

    def __init__(self, params: AgentParams, seed: int, total_episodes: int, multi_object: bool = False):
        super().__init__(params, seed, total_episodes)
        self.kind = MO_DQN if multi_object else DQN

    def act(self, obj: ObjectInstance, obs: Observation) -> np.ndarray:
        p = self.params
        self.decisions += 1
        spec = self.scene.classes[obj.class_id].action_spec
        cond = conditioning(obs)
        pre = obs.neutral[:4]
        if self._explore():
            self.explorations += 1
            action = sample_actions(spec, 1, self.act_rng)[0]
            value = obj.own_q.value(pre, cond, action)
        else:
            action, value = select_action(obj, pre, cond, p.n_action_samples, self.act_rng, p.score_dtype)
        self.pending[obj.object_id] = Decision(pre, cond, action, None, value)
        return action

    def end_episode(self, record: physics.EpisodeRecord) -> dict[int, dict]:
        p = self.params
        r = float(record.reward)
        info: dict[int, dict] = {}
        for inter, d in self._acting(record):
            obj = self.scene.objects.get(inter.object_id)
            if obj is None:
                continue
            update_q(
                obj, (d.state, d.cond, d.action, r), self.buffer_for(obj.object_id), self.train_rng,
                p.q_lr, p.q_batch, p.q_steps, p.q_optimizer,
            )
            info[obj.object_id] = {
                "action": float(d.action[0]),
                "predicted_reward": d.predicted_reward,
                "tf": None,
                "model": "own",
            }
        self.pending.clear()
        return info


def make_agent(
    kind: str,
    params: AgentParams,
    seed: int,
    total_episodes: int,
    transitions: dict[str, TransitionModel] | None = None,
) -> BaseAgent:
    if kind == PAP_OFFLINE:
        return PaPAgent(params, seed, total_episodes, transitions, online=False)
    if kind == PAP_ONLINE:
        return PaPAgent(params, seed, total_episodes, transitions, online=True)
    if kind in (DQN, MO_DQN):
        return DqnAgent(params, seed, total_episodes, multi_object=kind == MO_DQN)
    raise ConfigError("agent.kind", f"unknown agent kind {kind!r}")
