import math

import numpy as np
import pytest

from paprl import physics
from paprl.objects import Scene
from paprl.transition import PretrainConfig, pretrain_offline

BALL = dict(v_x=0.0, v_y=0.0, spin=0.0, theta_b=0.0, f_b=0.5, e_b=0.6, m_b=10.0)


def registered_scene() -> Scene:
    scene = Scene()
    for cls in physics.basketball_classes():
        scene.register_class(cls)
    return scene


def rotating_attrs(theta=0.0, f=0.5, e=0.8) -> dict:
    return dict(f_w=f, e_w=e, theta_w=theta)


def arc_attrs(sweep=0.0, f=0.6, e=0.8) -> dict:
    return dict(f_a=f, e_a=e, sweep=sweep)


def segment_placement(x=130.0, y=250.0) -> dict:
    return {"anchor": (x, y), "half_length": 60.0}


def arc_placement(x=130.0, y=200.0) -> dict:
    return {"anchor": (x, y), "radius": 60.0, "span": math.pi, "rest_angle": math.pi / 2}


@pytest.fixture
def scene() -> Scene:
    return registered_scene()


@pytest.fixture(scope="session")
def quick_models():
    """Small pretrained transition models, enough to exercise the pipeline."""
    config = PretrainConfig(epochs=30)
    return {
        physics.ROTATING_WALL: pretrain_offline(physics.ROTATING_WALL, 1000, config, np.random.default_rng(0)),
        physics.ARC_WALL: pretrain_offline(physics.ARC_WALL, 1000, config, np.random.default_rng(1)),
    }


@pytest.fixture(scope="session")
def checkpoints(tmp_path_factory, quick_models):
    root = tmp_path_factory.mktemp("ckpt")
    paths = {}
    for class_id, model in quick_models.items():
        path = root / f"{class_id}.json"
        model.save(path)
        paths[class_id] = str(path)
    return paths
