import csv
import json
import math

import numpy as np
import pytest

from paprl import physics
from paprl.errors import ConfigError, SchemaMismatch
from paprl.harness import (
    AGGREGATE_COLUMNS,
    BASE_COLUMNS,
    CSV_MAGIC,
    RunConfig,
    confidence_band,
    read_episode_log,
    run_experiment,
    run_seed,
)
from paprl.scenarios import CATALOG, Remove, ScheduleEvent, Spawn, get_scenario, validate_schedule

FAST = {"n_action_samples": 100, "q_hidden": [8], "transition_hidden": [8]}


def _config(tmp_path, **overrides) -> dict:
    d = {
        "format_version": 1,
        "scenario": "single-rotating-wall",
        "agent": {"kind": "Dqn", "params": FAST},
        "seeds": [0, 1],
        "episodes": 30,
        "output_dir": str(tmp_path / "runs"),
    }
    d.update(overrides)
    return d


# -- configs ------------------------------------------------------------------------


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"scenario": "moon-base"}, "scenario"),
        ({"format_version": 2}, "format_version"),
        ({"colour": "red"}, "colour"),
        ({"agent": {"kind": "Sarsa"}}, "agent.kind"),
        ({"agent": {"kind": "Dqn", "extra": 1}}, "agent.extra"),
        ({"agent": {"kind": "Dqn", "params": {"gamma": 0.9}}}, "agent.params.gamma"),
        ({"seeds": []}, "seeds"),
        ({"seeds": [1, 1]}, "seeds"),
        ({"episodes": 0}, "episodes"),
        ({"physics": {"gravity": 9.8, "wind": 1}}, "physics.wind"),
        ({"schedule": [{"episode": 5, "teleport": 1}]}, "schedule[0].teleport"),
        ({"schedule": [{"episode": 5}]}, "schedule[0]"),
        ({"schedule": [{"episode": 5, "spawn": {"attributes": {}}}]}, "schedule[0].spawn[0].class"),
    ],
)
def test_config_errors_name_the_field(tmp_path, patch, field):
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(_config(tmp_path, **patch))
    assert err.value.field == field
    assert str(err.value).startswith(field)


def test_config_load_errors(tmp_path):
    with pytest.raises(ConfigError) as err:
        RunConfig.load(tmp_path / "missing.json")
    assert err.value.field == "--config"
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError):
        RunConfig.load(bad)


def test_schedule_must_increase(tmp_path):
    config = RunConfig.from_dict(
        _config(tmp_path, schedule=[{"episode": 5, "remove": 1}, {"episode": 5, "remove": 2}])
    )
    with pytest.raises(ConfigError) as err:
        run_experiment(config)
    assert err.value.field == "schedule[1].episode"


def test_schedule_rejects_unknown_class():
    scenario = get_scenario("single-rotating-wall")
    wall = scenario.walls[0]
    bad = type(wall)("catapult", {}, {})
    with pytest.raises(ConfigError) as err:
        validate_schedule([ScheduleEvent(3, (Spawn(bad),))], scenario.build_scene())
    assert err.value.field == "schedule[0].changes[0].class"


def test_offline_run_needs_checkpoints(tmp_path):
    config = RunConfig.from_dict(_config(tmp_path, agent={"kind": "PaPOffline"}))
    with pytest.raises(ConfigError) as err:
        run_experiment(config)
    assert err.value.field == "agent.checkpoints.rotating-wall"


def test_checkpoint_class_must_match(tmp_path, checkpoints):
    config = RunConfig.from_dict(
        _config(tmp_path, agent={"kind": "PaPOffline", "checkpoints": {"rotating-wall": checkpoints["arc-wall"]}})
    )
    with pytest.raises(ConfigError) as err:
        run_experiment(config)
    assert err.value.field == "agent.checkpoints.rotating-wall"


# -- runs ---------------------------------------------------------------------------


def test_run_writes_csvs_aggregate_and_summary(tmp_path):
    summary = run_experiment(RunConfig.from_dict(_config(tmp_path)))
    out = tmp_path / "runs" / "single-rotating-wall" / "Dqn"
    assert sorted(p.name for p in out.iterdir()) == ["aggregate.csv", "seed_0.csv", "seed_1.csv", "summary.json"]
    header, rows = read_episode_log(out / "seed_0.csv")
    assert tuple(header[:6]) == BASE_COLUMNS
    assert header[6:] == ["o1_action", "o1_pred", "o1_tf", "o1_model"]
    assert [int(r["episode"]) for r in rows] == list(range(30))
    assert all(0.0 <= float(r["reward"]) <= 1.0 for r in rows)
    agg = (out / "aggregate.csv").read_text().splitlines()
    assert agg[0] == CSV_MAGIC and tuple(agg[1].split(",")) == AGGREGATE_COLUMNS
    assert len(agg) == 32
    data = json.loads((out / "summary.json").read_text())
    assert data["seeds"] == [0, 1] and set(data["final_means"]) == {"0", "1"}
    assert summary.final_means[0] == pytest.approx(np.mean([float(r["reward"]) for r in rows]))


def test_rerun_is_byte_identical(tmp_path):
    config = RunConfig.from_dict(_config(tmp_path, seeds=[3]))
    first = run_experiment(config).csv_paths[0].read_bytes()
    second = run_experiment(config).csv_paths[0].read_bytes()
    assert first == second


def test_seeds_are_independent(tmp_path):
    alone = run_seed(RunConfig.from_dict(_config(tmp_path)), 1)
    both = run_experiment(RunConfig.from_dict(_config(tmp_path, seeds=[0, 1])))
    rows = read_episode_log(both.csv_paths[1])[1]
    np.testing.assert_array_equal(alone.rewards, [float(r["reward"]) for r in rows])


def test_seed_offset(tmp_path):
    summary = run_experiment(RunConfig.from_dict(_config(tmp_path, seeds=[0])), seed_offset=5)
    assert summary.seeds == [5]
    assert summary.csv_paths[0].name == "seed_5.csv"


def test_output_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("PAPRL_OUT", str(tmp_path / "elsewhere"))
    summary = run_experiment(RunConfig.from_dict(_config(tmp_path, seeds=[0])))
    assert summary.csv_paths[0].parent == tmp_path / "elsewhere" / "single-rotating-wall" / "Dqn"


def test_schedule_changes_apply_at_episode_boundaries(tmp_path):
    schedule = [
        {"episode": 4, "spawn": {"class": "rotating-wall", "attributes": {"f_w": 0.5, "e_w": 0.8, "theta_w": 0.0},
                                 "placement": {"anchor": [300, 300], "half_length": 60}}},
        {"episode": 9, "remove": [1]},
        {"episode": 12, "spawn": [{"class": "arc-wall", "attributes": {"f_a": 0.6, "e_a": 0.8, "sweep": 0.0},
                                   "placement": {"anchor": [200, 150], "radius": 60, "span": math.pi}}]},
    ]
    config = RunConfig.from_dict(_config(tmp_path, schedule=schedule, episodes=16, seeds=[0]))
    result = run_seed(config, 0, {})
    assert result.n_active.tolist() == [1] * 4 + [2] * 5 + [1] * 3 + [2] * 4


def test_add_remove_scenario_schedule():
    scenario = get_scenario("add-remove")
    assert scenario.episodes == 5000
    assert [e.episode for e in scenario.schedule] == [1000, 2000, 3000, 4000]
    assert scenario.schedule[-1].changes == (Remove(2), Remove(3))
    assert scenario.object_ids() == [1, 2, 3, 4]
    assert scenario.active_classes() == [physics.ARC_WALL]


def test_removing_every_wall_stops_the_run(tmp_path, checkpoints):
    schedule = [
        {"episode": 3, "spawn": {"class": "arc-wall", "attributes": {"f_a": 0.6, "e_a": 0.8, "sweep": 0.0},
                                 "placement": {"anchor": [230, 330], "radius": 60, "span": math.pi}}},
        {"episode": 6, "remove": [1, 2]},
    ]
    config = RunConfig.from_dict(
        _config(
            tmp_path, scenario="single-arc-wall", schedule=schedule, episodes=9, seeds=[0],
            agent={"kind": "PaPOffline", "params": FAST, "checkpoints": checkpoints},
        )
    )
    with pytest.raises(physics.NoActiveObjects):
        run_experiment(config)


def test_every_catalog_scenario_builds():
    for name in CATALOG:
        scenario = get_scenario(name)
        scene = scenario.build_scene()
        assert scene.n_active == len(scenario.walls)
        assert scene.get(0).class_id == physics.NEUTRAL_BALL
        validate_schedule(scenario.schedule, scene)


def test_single_wall_scenarios_reward_learning():
    """Some fixed action is better than another, so the action matters."""
    scenario = get_scenario("single-rotating-wall")
    config = physics.EpisodeConfig(spawn=scenario.spawn)
    means = []
    for theta in (-math.pi / 10, 0.0, math.pi / 10):
        scene = scenario.build_scene()
        rng = np.random.default_rng(0)
        rewards = [physics.run_episode(scene, lambda o, obs: [theta], config, rng).reward for _ in range(150)]
        means.append(np.mean(rewards))
    assert max(means) - min(means) > 0.05


# -- logs and bands -----------------------------------------------------------------


def test_confidence_band():
    curves = np.array([[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]])
    mean, lo, hi = confidence_band(curves)
    np.testing.assert_allclose(mean, [1.0, 1.0])
    half = 4.302652729911275 * 1.0 / math.sqrt(3)
    np.testing.assert_allclose([lo[0], hi[0]], [1.0 - half, 1.0 + half])
    assert lo[1] == hi[1] == 1.0
    single_mean, single_lo, single_hi = confidence_band(np.array([[0.2, 0.4]]))
    np.testing.assert_array_equal(single_lo, single_mean)


def test_read_episode_log_rejects_foreign_files(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(SchemaMismatch):
        read_episode_log(empty)
    no_rows = tmp_path / "header_only.csv"
    no_rows.write_text(CSV_MAGIC + "\n" + ",".join(BASE_COLUMNS) + "\n")
    with pytest.raises(SchemaMismatch):
        read_episode_log(no_rows)
    wrong = tmp_path / "wrong.csv"
    with wrong.open("w", newline="") as fh:
        fh.write(CSV_MAGIC + "\n")
        csv.writer(fh).writerows([["step", "reward"], [0, 0.5]])
    with pytest.raises(SchemaMismatch):
        read_episode_log(wrong)


def test_pap_logs_trust_columns(tmp_path, checkpoints):
    config = RunConfig.from_dict(
        _config(tmp_path, agent={"kind": "PaPOffline", "params": dict(FAST, trust_window=3), "checkpoints": checkpoints},
                seeds=[0], episodes=40)
    )
    rows = read_episode_log(run_experiment(config).csv_paths[0])[1]
    acted = [r for r in rows if r["o1_action"]]
    assert acted and all(r["o1_model"] in ("own", "class") for r in acted)
    assert all(r["o1_pred"] for r in acted)
    assert any(r["o1_tf"] for r in acted) and any(not r["o1_tf"] for r in acted)
    assert all(not r["o1_model"] for r in rows if not r["o1_action"])
