"""Experiment runner: run configs, seed sweeps, add/remove schedules and CSV logs.

A run executes one agent kind on one scenario for every listed seed. Each seed
gets its own scene, models and random streams (see ``agents.seed_streams``),
so seeds are independent and a re-run with the same config writes
byte-identical CSVs. Layout under the output directory::

    <out>/<scenario>/<agent>/seed_<n>.csv
    <out>/<scenario>/<agent>/aggregate.csv
    <out>/<scenario>/<agent>/summary.json
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats

from . import physics
from .agents import AGENT_KINDS, PAP_OFFLINE, AgentParams, BaseAgent, make_agent, seed_streams
from .errors import ConfigError, SchemaMismatch
from .objects import Scene
from .scenarios import Remove, Scenario, ScheduleEvent, Spawn, WallSpec, get_scenario, validate_schedule
from .transition import TransitionModel

CONFIG_VERSION = 1
CSV_VERSION = 1
CSV_MAGIC = f"# paprl episode log v{CSV_VERSION}"
BASE_COLUMNS = ("episode", "seed", "agent", "reward", "outcome", "n_active_objects")
OBJECT_FIELDS = ("action", "pred", "tf", "model")
AGGREGATE_COLUMNS = ("episode", "agent", "n_seeds", "mean", "ci95_low", "ci95_high")
FINAL_WINDOW = 500


@dataclass
class RunConfig:
    scenario: str
    agent: str
    seeds: list[int] = field(default_factory=lambda: [0])
    episodes: int | None = None
    params: AgentParams = field(default_factory=AgentParams)
    checkpoints: dict[str, str] = field(default_factory=dict)
    schedule: list[ScheduleEvent] | None = None
    physics: dict = field(default_factory=dict)
    output_dir: str = "runs"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        allowed = {"format_version", "scenario", "agent", "seeds", "episodes", "schedule", "physics", "output_dir"}
        for key in d:
            if key not in allowed:
                raise ConfigError(key, "unknown key")
        if d.get("format_version") != CONFIG_VERSION:
            raise ConfigError("format_version", f"expected {CONFIG_VERSION}, got {d.get('format_version')!r}")
        if "scenario" not in d:
            raise ConfigError("scenario", "missing")
        get_scenario(d["scenario"])
        agent = d.get("agent")
        if not isinstance(agent, dict) or "kind" not in agent:
            raise ConfigError("agent.kind", "missing")
        for key in agent:
            if key not in ("kind", "params", "checkpoints"):
                raise ConfigError(f"agent.{key}", "unknown key")
        if agent["kind"] not in AGENT_KINDS:
            raise ConfigError("agent.kind", f"unknown agent kind {agent['kind']!r}; known: {list(AGENT_KINDS)}")
        seeds = d.get("seeds", [0])
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
            raise ConfigError("seeds", "must be a non-empty list of non-negative integers")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seeds", "duplicate seeds")
        episodes = d.get("episodes")
        if episodes is not None and (not isinstance(episodes, int) or episodes <= 0):
            raise ConfigError("episodes", "must be a positive integer")
        phys = d.get("physics", {})
        known_phys = {f.name for f in fields(physics.PhysicsConfig)}
        for key in phys:
            if key not in known_phys:
                raise ConfigError(f"physics.{key}", "unknown key")
        schedule = None
        if d.get("schedule") is not None:
            schedule = [_parse_event(i, e) for i, e in enumerate(d["schedule"])]
        return cls(
            scenario=d["scenario"],
            agent=agent["kind"],
            seeds=list(seeds),
            episodes=episodes,
            params=AgentParams.from_dict(agent.get("params", {})),
            checkpoints=dict(agent.get("checkpoints", {})),
            schedule=schedule,
            physics=dict(phys),
            output_dir=str(d.get("output_dir", "runs")),
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError("--config", f"no such file {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)


def _parse_event(i: int, e: dict) -> ScheduleEvent:
    where = f"schedule[{i}]"
    if not isinstance(e, dict) or not isinstance(e.get("episode"), int):
        raise ConfigError(f"{where}.episode", "each event needs an integer episode")
    changes = []
    for key, value in e.items():
        if key == "episode":
            continue
        if key == "spawn":
            for j, w in enumerate(value if isinstance(value, list) else [value]):
                if "class" not in w:
                    raise ConfigError(f"{where}.spawn[{j}].class", "missing")
                changes.append(Spawn(WallSpec(w["class"], dict(w.get("attributes", {})), dict(w.get("placement", {})))))
        elif key == "remove":
            for oid in value if isinstance(value, list) else [value]:
                changes.append(Remove(int(oid)))
        else:
            raise ConfigError(f"{where}.{key}", "unknown key")
    if not changes:
        raise ConfigError(where, "event has neither spawn nor remove")
    return ScheduleEvent(e["episode"], tuple(changes))


@dataclass
class SeedResult:
    seed: int
    rewards: np.ndarray
    n_active: np.ndarray
    path: Path | None
    wall_clock: float


@dataclass
class RunSummary:
    scenario: str
    agent: str
    seeds: list[int]
    csv_paths: list[Path]
    aggregate_path: Path | None
    final_means: dict[int, float]
    wall_clock: float


def output_root(config: RunConfig) -> Path:
    return Path(os.environ.get("PAPRL_OUT") or config.output_dir)


def load_transitions(config: RunConfig, scenario: Scenario) -> dict[str, TransitionModel]:
    models = {}
    for class_id, path in sorted(config.checkpoints.items()):
        try:
            model = TransitionModel.load(path)
        except FileNotFoundError:
            raise ConfigError(f"agent.checkpoints.{class_id}", f"no such file {path}") from None
        if model.class_id != class_id:
            raise ConfigError(f"agent.checkpoints.{class_id}", f"checkpoint is for class {model.class_id!r}")
        models[class_id] = model
    if config.agent == PAP_OFFLINE:
        for class_id in scenario.active_classes():
            if class_id not in models:
                raise ConfigError(f"agent.checkpoints.{class_id}", "PaPOffline needs a checkpoint for every active class")
    return models


def apply_changes(scene: Scene, event: ScheduleEvent, agent: BaseAgent) -> None:
    """Apply one schedule event between two episodes."""
    for change in event.changes:
        if isinstance(change, Spawn):
            agent.before_spawn(change.wall.class_id)
            scene.spawn_object(
                change.wall.class_id, change.wall.attributes, True, change.wall.placement, change.object_id
            )
        else:
            scene.remove_object(change.object_id)
            agent.forget(change.object_id)


def run_seed(
    config: RunConfig,
    seed: int,
    transitions: dict[str, TransitionModel] | None = None,
    out_path: Path | None = None,
    progress: bool = False,
) -> SeedResult:
    """Run every episode of one seed and optionally write its CSV."""
    scenario = get_scenario(config.scenario)
    schedule = scenario.schedule if config.schedule is None else config.schedule
    scenario.schedule = schedule
    episodes = config.episodes or scenario.episodes
    scene = scenario.build_scene()
    validate_schedule(schedule, scene)
    if transitions is None:
        transitions = load_transitions(config, scenario)
    agent = make_agent(config.agent, config.params, seed, episodes, {k: m.copy() for k, m in transitions.items()})
    agent.attach(scene)
    ep_config = physics.EpisodeConfig(physics.PhysicsConfig(**config.physics), scenario.spawn)
    env_rng = np.random.default_rng(seed_streams(seed)[3])
    object_ids = scenario.object_ids()
    events = {e.episode: e for e in schedule}

    header = list(BASE_COLUMNS) + [f"o{oid}_{f}" for oid in object_ids for f in OBJECT_FIELDS]
    buf = io.StringIO()
    buf.write(CSV_MAGIC + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    rewards = np.empty(episodes)
    n_active = np.empty(episodes, dtype=int)
    start = time.perf_counter()
    for ep in range(episodes):
        if ep in events:
            apply_changes(scene, events[ep], agent)
        agent.begin_episode(ep)
        record = physics.run_episode(scene, agent.act, ep_config, env_rng)
        info = agent.end_episode(record)
        rewards[ep] = record.reward
        n_active[ep] = scene.n_active
        row = [ep, seed, config.agent, _num(record.reward), record.outcome, scene.n_active]
        for oid in object_ids:
            d = info.get(oid)
            if d is None:
                row += ["", "", "", ""]
            else:
                row += [_num(d["action"]), _num(d["predicted_reward"]), _num(d["tf"]), d["model"]]
        writer.writerow(row)
        if progress and (ep + 1) % max(1, episodes // 10) == 0:
            print(
                f"[{config.scenario} {config.agent} seed {seed}] episode {ep + 1}/{episodes} "
                f"mean reward (last 100) {rewards[max(0, ep - 99): ep + 1].mean():.3f}",
                file=sys.stderr,
            )
    elapsed = time.perf_counter() - start
    if out_path is not None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(buf.getvalue())
    return SeedResult(seed, rewards, n_active, out_path, elapsed)


def _num(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def run_experiment(config: RunConfig, quiet: bool = True, seed_offset: int = 0) -> RunSummary:
    """Run all seeds, write one CSV per seed plus the aggregate and a summary."""
    scenario = get_scenario(config.scenario)
    if config.schedule is not None:
        validate_schedule(config.schedule, scenario.build_scene())
    transitions = load_transitions(config, scenario)
    out_dir = output_root(config) / config.scenario / config.agent
    seeds = [s + seed_offset for s in config.seeds]
    results = []
    start = time.perf_counter()
    for seed in seeds:
        path = out_dir / f"seed_{seed}.csv"
        results.append(run_seed(config, seed, transitions, path, progress=not quiet))
    agg = out_dir / "aggregate.csv"
    write_aggregate(agg, config.agent, [r.rewards for r in results])
    finals = {r.seed: float(r.rewards[-min(FINAL_WINDOW, len(r.rewards)):].mean()) for r in results}
    (out_dir / "summary.json").write_text(
        json.dumps(
            {
                "format_version": CSV_VERSION,
                "scenario": config.scenario,
                "agent": config.agent,
                "seeds": seeds,
                "final_window": FINAL_WINDOW,
                "final_means": {str(k): v for k, v in finals.items()},
            },
            indent=1,
            sort_keys=True,
        )
        + "\n"
    )
    return RunSummary(
        config.scenario, config.agent, seeds, [r.path for r in results], agg, finals, time.perf_counter() - start
    )


def confidence_band(curves: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean and Student-t 95% interval across rows of ``curves`` (seeds x episodes)."""
    curves = np.atleast_2d(curves)
    n = curves.shape[0]
    mean = curves.mean(axis=0)
    if n < 2:
        return mean, mean.copy(), mean.copy()
    half = stats.t.ppf(0.975, n - 1) * curves.std(axis=0, ddof=1) / math.sqrt(n)
    return mean, mean - half, mean + half


def write_aggregate(path: Path, agent: str, curves: list[np.ndarray]) -> None:
    length = min(len(c) for c in curves)
    mean, lo, hi = confidence_band(np.array([c[:length] for c in curves]))
    buf = io.StringIO()
    buf.write(CSV_MAGIC + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGGREGATE_COLUMNS)
    for ep in range(length):
        writer.writerow([ep, agent, len(curves), _num(mean[ep]), _num(lo[ep]), _num(hi[ep])])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def read_episode_log(path: str | Path) -> tuple[list[str], list[dict]]:
    """Header and rows of a per-seed CSV; raises ``SchemaMismatch`` on a foreign file."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0] != CSV_MAGIC:
        raise SchemaMismatch(f"{path}: missing '{CSV_MAGIC}' line")
    reader = csv.DictReader(lines[1:])
    header = reader.fieldnames or []
    if tuple(header[: len(BASE_COLUMNS)]) != BASE_COLUMNS:
        raise SchemaMismatch(f"{path}: header {header[:len(BASE_COLUMNS)]} is not {list(BASE_COLUMNS)}")
    rows = list(reader)
    if not rows:
        raise SchemaMismatch(f"{path}: no episodes")
    return header, rows
