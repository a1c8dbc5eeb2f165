import numpy as np
import pytest

from helpers import double_pendulum
from inertial_muscles.dynamics import Model, Options
from inertial_muscles.paths import Anchor
from inertial_muscles.skeleton import ReducedState
from inertial_muscles.stability import divergence_threshold, flick, impulse_controls

TIP = Anchor(2, [0.01, 0.0, 0.0])
UP = [0.0, 1.0, 0.0]


def test_impulse_torques_do_virtual_work(rng):
    # tau . v must equal F . (point velocity), the latter by FD of the point position
    model = Model(double_pendulum())
    point = Anchor(1, [0.02, -0.1, 0.0])
    force = rng.normal(size=3)
    ctl = impulse_controls(model, point, force, impulse_steps=3, dt=1e-3)
    q, v = rng.uniform(-1, 1, 2), rng.normal(size=2)
    tau = ctl(0.0, ReducedState(q, v)).torques
    h = 1e-6
    sk = model.skeleton
    xp = sk.kinematics(q + h * v).point(point.body, point.local_pos)
    xm = sk.kinematics(q - h * v).point(point.body, point.local_pos)
    assert tau @ v == pytest.approx(force @ (xp - xm) / (2 * h), rel=1e-8)
    assert ctl(2e-3, ReducedState(q, v)).torques is not None
    assert ctl(3e-3, ReducedState(q, v)).torques is None


def test_small_flick_stays_bounded_on_free_pendulum():
    model = Model(double_pendulum(), gravity=[0, 0, 0])
    st = ReducedState(np.array([0.3, -0.2]), np.zeros(2))
    r = flick(model, st, Anchor(1, [0.0, -0.15, 0.0]), [1.0, 0, 0], 1.0, duration=0.1)
    assert not r.diverged and np.isfinite(r.peak_kinetic)


def test_threshold_is_infinite_when_nothing_diverges():
    model = Model(double_pendulum(), gravity=[0, 0, 0])
    st = ReducedState(np.zeros(2), np.zeros(2))
    th, res = divergence_threshold(model, st, Anchor(1, [0.0, -0.15, 0.0]), [1.0, 0, 0], [0.5, 1.0], duration=0.05)
    assert th == float("inf") and len(res) == 2 and not any(r.diverged for r in res)


def test_finger_inertial_survives_flicks_that_break_lumped(scenes):
    sc = scenes("finger")
    lumped, inertial = Options(True, 0.0), Options(True, 1.0)
    assert not flick(sc.model, sc.initial_state, TIP, UP, 7.0, options=lumped).diverged
    assert flick(sc.model, sc.initial_state, TIP, UP, 10.0, options=lumped).diverged
    # twice the lumped divergence force is still stable with distributed muscle mass
    assert not flick(sc.model, sc.initial_state, TIP, UP, 20.0, options=inertial).diverged
