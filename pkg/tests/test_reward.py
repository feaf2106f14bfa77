import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import registered_scene, rotating_attrs, segment_placement
from paprl import physics
from paprl.errors import InactiveObject, RewardOutOfRange, WindowNotFull
from paprl.nn import ReplayBuffer
from paprl.objects import ActionSpec
from paprl.reward import (
    CLASS_MODEL,
    OWN_MODEL,
    QModel,
    TrustState,
    active_q,
    maybe_swap,
    record_residual,
    select_action,
    trust_factor,
    update_q,
)
from paprl.transition import conditioning_bounds, dynamic_bounds

TENTH_PI = math.pi / 10
SPEC = ActionSpec(("theta_w",), ((-TENTH_PI, TENTH_PI),))


class FnQ:
    """Reward model backed by a plain function of the action, with a call counter."""

    def __init__(self, fn, spec=SPEC):
        self.fn = fn
        self.action_spec = spec
        self.calls = 0

    def values(self, state, cond, actions, dtype=np.float64):
        self.calls += 1
        return np.asarray(self.fn(np.asarray(actions)[:, 0]), dtype=dtype)

    def value(self, state, cond, action):
        return float(self.values(state, cond, np.atleast_2d(action))[0])


def _fresh_q(seed=0) -> QModel:
    classes = {c.class_id: c for c in physics.basketball_classes()}
    cond = conditioning_bounds(classes[physics.ROTATING_WALL], classes[physics.NEUTRAL_BALL])
    return QModel.fresh(dynamic_bounds(), cond, SPEC, np.random.default_rng(seed), (16,))


def _wall(scene=None, own=None, class_copy=None, window=20, threshold=0.25, in_use=OWN_MODEL):
    scene = scene or registered_scene()
    obj = scene.spawn_object(physics.ROTATING_WALL, rotating_attrs(), True, segment_placement())
    obj.own_q = own if own is not None else _fresh_q(obj.object_id)
    obj.class_q_copy = class_copy
    obj.trust = TrustState(window, threshold, in_use)
    return obj


STATE = np.array([10.0, -150.0, 0.0, -1.5])
COND = np.array([0.5, 0.6, 10.0, 0.5, 0.8, 0.0, 5.0, 12.0])


# -- trust factor -------------------------------------------------------------------


@pytest.mark.parametrize(
    "residuals, expected",
    [([0.0] * 20, 1.0), ([1.0], 0.5), ([0.1, 0.2, 0.3, 0.4], 0.5)],
)
def test_trust_factor_vectors(residuals, expected):
    t = TrustState(window=len(residuals))
    for r in residuals:
        record_residual(t, r)
    assert trust_factor(t) == pytest.approx(expected, abs=1e-15)


def test_trust_factor_needs_full_window():
    t = TrustState(window=3)
    record_residual(t, 0.1)
    with pytest.raises(WindowNotFull):
        trust_factor(t)


def test_residual_window_slides():
    t = TrustState(window=3)
    for r in (5.0, 0.1, 0.2, -0.3):
        record_residual(t, r)
    assert list(t.residuals) == [0.1, 0.2, 0.3]


@settings(max_examples=200)
@given(
    st.lists(st.floats(0.0, 1e3), min_size=1, max_size=30),
    st.integers(0, 29),
    st.floats(1e-3, 10.0),
)
def test_trust_factor_range_and_monotonicity(residuals, index, bump):
    t = TrustState(window=len(residuals))
    t.residuals = deque(residuals, maxlen=len(residuals))
    tf = trust_factor(t)
    assert 0.0 < tf <= 1.0
    worse = list(residuals)
    worse[index % len(worse)] += bump
    t.residuals = deque(worse, maxlen=len(worse))
    assert trust_factor(t) < tf


# -- swapping -----------------------------------------------------------------------


def _fill(obj, value, n=None):
    for _ in range(n or obj.trust.window):
        record_residual(obj.trust, value)


def test_swap_at_threshold_exactly():
    obj = _wall(class_copy=_fresh_q(9), window=4, threshold=0.25)
    _fill(obj, 0.75)
    assert trust_factor(obj.trust) == 0.25
    assert maybe_swap(obj)
    assert obj.trust.in_use == CLASS_MODEL
    assert len(obj.trust.residuals) == 0 and obj.trust.swaps == 1


def test_no_swap_above_threshold_keeps_window():
    obj = _wall(class_copy=_fresh_q(9), window=4, threshold=0.25)
    _fill(obj, 0.5)
    assert not maybe_swap(obj)
    assert obj.trust.in_use == OWN_MODEL
    assert len(obj.trust.residuals) == 4
    assert obj.trust.last_tf == pytest.approx(1 / 3)


def test_two_bad_windows_return_to_original_model():
    obj = _wall(class_copy=_fresh_q(9), window=5)
    for expected in (CLASS_MODEL, OWN_MODEL):
        _fill(obj, 2.0)
        assert maybe_swap(obj)
        assert obj.trust.in_use == expected
    assert obj.trust.swaps == 2


def test_swap_without_class_model_only_warns():
    obj = _wall(window=3)
    _fill(obj, 5.0)
    assert not maybe_swap(obj)
    assert obj.trust.in_use == OWN_MODEL and obj.trust.missing_class_model == 1


def test_swap_takes_private_copy_of_class_model():
    registry = _fresh_q(5)
    obj = _wall(window=3)
    _fill(obj, 5.0)
    assert maybe_swap(obj, registry)
    assert obj.class_q_copy is not registry
    assert obj.class_q_copy.net.param_bytes() == registry.net.param_bytes()


def test_selection_follows_swapped_handle():
    own, cls = FnQ(lambda a: -a), FnQ(lambda a: a)
    obj = _wall(own=own, class_copy=cls, window=2)
    rng = np.random.default_rng(0)
    a, _ = select_action(obj, STATE, COND, 100, rng)
    assert (own.calls, cls.calls) == (1, 0) and a[0] < -0.3
    _fill(obj, 3.0)
    assert maybe_swap(obj)
    a, _ = select_action(obj, STATE, COND, 100, rng)
    assert (own.calls, cls.calls) == (1, 1) and a[0] > 0.3


def test_forced_residuals_one_swap_per_window():
    obj = _wall(class_copy=_fresh_q(9), window=4)
    swaps = []
    for episode in range(40):
        record_residual(obj.trust, 2.0)
        if obj.trust.due:
            swaps.append((episode, maybe_swap(obj)))
    assert swaps == [(e, True) for e in range(3, 40, 4)]
    assert obj.trust.swaps == 10


# -- action selection ---------------------------------------------------------------


def test_constant_model_returns_first_sample():
    obj = _wall(own=FnQ(lambda a: np.full(len(a), 0.3)))
    rng = np.random.default_rng(4)
    first = np.random.default_rng(4).uniform(SPEC.low, SPEC.high, size=(10, 1))[0]
    action, value = select_action(obj, STATE, COND, 10, rng)
    np.testing.assert_array_equal(action, first)
    assert value == pytest.approx(0.3)


def test_sampled_argmax_finds_peak():
    obj = _wall(own=FnQ(lambda a: -((a - 0.3) ** 2)))
    hits = 0
    for seed in range(100):
        action, _ = select_action(obj, STATE, COND, 10_000, np.random.default_rng(seed))
        assert SPEC.low[0] <= action[0] <= SPEC.high[0]
        hits += abs(action[0] - 0.3) <= 2e-4
    assert hits >= 97


def test_selection_evaluates_every_sample():
    seen = []
    obj = _wall(own=FnQ(lambda a: seen.append(len(a)) or np.zeros(len(a))))
    select_action(obj, STATE, COND, 10_000, np.random.default_rng(0))
    assert seen == [10_000]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_argmax_invariant_to_positive_scaling(seed, scale):
    q = _fresh_q(seed % 1000)
    scaled = _fresh_q(seed % 1000)
    scaled.net.weights[-1] *= scale
    scaled.net.biases[-1] *= scale
    a, _ = select_action(_wall(own=q), STATE, COND, 500, np.random.default_rng(seed))
    b, _ = select_action(_wall(own=scaled), STATE, COND, 500, np.random.default_rng(seed))
    np.testing.assert_array_equal(a, b)


def test_float32_scoring_reports_float64_value():
    q = _fresh_q(3)
    obj = _wall(own=q)
    action, value = select_action(obj, STATE, COND, 2000, np.random.default_rng(1), np.float32)
    assert value == q.value(STATE, COND, action)
    ref, _ = select_action(obj, STATE, COND, 2000, np.random.default_rng(1))
    assert abs(q.value(STATE, COND, ref) - value) < 1e-5


def test_per_candidate_states():
    obj = _wall(own=FnQ(lambda a: a))
    calls = []

    def predict(actions):
        calls.append(actions.shape)
        return np.repeat(STATE[None, :], len(actions), axis=0)

    select_action(obj, predict, COND, 50, np.random.default_rng(0))
    assert calls == [(50, 1)]


def test_neutral_object_cannot_select():
    scene = registered_scene()
    ball = scene.spawn_object(physics.NEUTRAL_BALL, dict(v_x=0, v_y=0, spin=0, theta_b=0, f_b=0.5, e_b=0.5, m_b=10), False)
    with pytest.raises(InactiveObject):
        select_action(ball, STATE, COND, 10, np.random.default_rng(0))


# -- updates ------------------------------------------------------------------------


def test_update_rejects_out_of_range_reward():
    obj = _wall()
    buf = ReplayBuffer(10)
    with pytest.raises(RewardOutOfRange):
        update_q(obj, (STATE, COND, [0.1], 1.2), buf, np.random.default_rng(0))
    assert len(buf) == 0


def test_update_fits_constant_target():
    obj = _wall()
    buf = ReplayBuffer(100)
    rng = np.random.default_rng(0)
    for _ in range(400):
        update_q(obj, (STATE, COND, [0.1], 0.62), buf, rng, lr=1e-2, steps=2, optimizer="adam")
    assert obj.own_q.value(STATE, COND, [0.1]) == pytest.approx(0.62, abs=1e-2)
    assert len(buf) == 100


def test_perfect_predictor_has_zero_loss():
    obj = _wall(own=_fresh_q(1))
    target = obj.own_q.value(STATE, COND, [0.05])
    assert update_q(obj, (STATE, COND, [0.05], target), ReplayBuffer(4), np.random.default_rng(0)) == pytest.approx(0.0, abs=1e-24)


def test_update_touches_only_the_model_in_use():
    scene = registered_scene()
    registry = _fresh_q(7)
    scene.get_class(physics.ROTATING_WALL).class_q = registry
    a = _wall(scene, class_copy=registry.copy(), in_use=CLASS_MODEL)
    b = _wall(scene)
    snapshot = {
        "a_own": a.own_q.net.param_bytes(),
        "b_own": b.own_q.net.param_bytes(),
        "registry": registry.net.param_bytes(),
        "a_class": a.class_q_copy.net.param_bytes(),
    }
    buf = ReplayBuffer(10)
    update_q(a, (STATE, COND, [0.1], 0.9), buf, np.random.default_rng(0))
    assert len(buf) == 1
    assert active_q(a) is a.class_q_copy
    assert a.class_q_copy.net.param_bytes() != snapshot["a_class"]
    assert a.own_q.net.param_bytes() == snapshot["a_own"]
    assert b.own_q.net.param_bytes() == snapshot["b_own"]
    assert registry.net.param_bytes() == snapshot["registry"]


def test_q_model_round_trip():
    q = _fresh_q(2)
    again = QModel.from_dict(q.to_dict())
    actions = np.linspace(-0.3, 0.3, 7)[:, None]
    np.testing.assert_array_equal(again.values(STATE, COND, actions), q.values(STATE, COND, actions))
    assert again.action_spec == q.action_spec
