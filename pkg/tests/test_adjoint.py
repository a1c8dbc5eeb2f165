import numpy as np
import pytest

from helpers import rod
from inertial_muscles.adjoint import (
    ReachTask,
    adjoint_gradient,
    coordinate_search,
    discrete_adjoint,
    fd_gradient,
    optimize_reach,
    rollout,
)
from inertial_muscles.dynamics import Controls, Model, simulate
from inertial_muscles.paths import Anchor
from inertial_muscles.skeleton import WORLD, Joint, ReducedState, Skeleton
from inertial_muscles.spatial import Transform

L = 0.3


def single_link(gravity=(0.0, 0.0, 0.0)):
    sk = Skeleton([rod("link", 1.0, L)], [Joint("revolute", WORLD, Transform.identity(), axis=[0, 0, 1.0])])
    return Model(sk, [], gravity=gravity)


TIP = Anchor(0, [0.0, -L / 2, 0.0])  # anchors live in the COM frame


def scene_task(scenes, name, **kw):
    sc = scenes(name)
    r = sc.reach
    horizon = kw.pop("horizon", r.horizon)
    args = dict(integrator=r.integrator, q0=sc.initial_state.q, qdot0=sc.initial_state.qdot)
    args.update(kw)
    return ReachTask(sc.model, r.effector, r.target, horizon, r.dt, **args)


# -- rollout --------------------------------------------------------------------


def test_rollout_zero_objective_at_rest_target():
    task = ReachTask(single_link(), TIP, [0.0, -L, 0.0], 0.1, 1e-3)
    roll = rollout(task, [0.0])
    assert roll.objective == 0.0
    assert np.array_equal(roll.qs, np.zeros_like(roll.qs))


def test_rollout_matches_simulation(scenes):
    task = scene_task(scenes, "reach_1dof")
    theta = np.array([0.7])
    roll = rollout(task, theta)
    rec = simulate(task.model, ReducedState(task.q0, task.qdot0), task.dt, task.steps, task.integrator,
                   controls=Controls(torques=theta), record_energy=False)
    assert np.array_equal(roll.qs[-1], rec.q[-1])
    assert roll.objective == task.objective(rec.q[-1])


def test_objective_grid_is_smooth(scenes):
    # FD slopes of a coarse grid agree with adjoint gradients at the midpoints
    task = scene_task(scenes, "reach_1dof")
    grid = np.linspace(-1.0, 3.0, 9)
    f = np.array([rollout(task, [t]).objective for t in grid])
    h = 1e-3
    for mid in grid[1:-1:2]:
        slope = (rollout(task, [mid + h]).objective - rollout(task, [mid - h]).objective) / (2 * h)
        g = adjoint_gradient(task, [mid]).gradient[0]
        assert abs(g - slope) < 1e-4 * max(abs(slope), 1.0)
    assert np.all(np.isfinite(f))
    second = np.abs(np.diff(f, 2))
    assert second.max() < 10 * np.median(second) + 1e-12


# -- adjoint --------------------------------------------------------------------


def test_zero_horizon_has_zero_gradient(scenes):
    task = scene_task(scenes, "reach_1dof", horizon=0.0)
    assert task.steps == 0
    rep = adjoint_gradient(task, [1.3])
    assert np.array_equal(rep.gradient, [0.0])


@pytest.mark.parametrize("integrator", ["forward_euler", "bdf1"])
def test_linear_system_closed_form(integrator):
    # zero-gravity link: theta'' = tau / I, so q_N is linear in tau
    model = single_link()
    I = 1.0 * L * L / 3
    h, N = 1e-3, 150
    target = np.array([0.1, -0.25, 0.0])
    task = ReachTask(model, TIP, target, N * h, h, integrator, q0=[0.2], qdot0=[0.5])
    tau = 0.4
    rep = adjoint_gradient(task, [tau])
    n_sum = N * (N - 1) / 2 if integrator == "forward_euler" else N * (N + 1) / 2
    qN = 0.2 + h * (N * 0.5 + h * tau / I * n_sum)
    p = L * np.array([np.sin(qN), -np.cos(qN), 0.0])
    dp = L * np.array([np.cos(qN), np.sin(qN), 0.0])
    exact = 2 * (p - target) @ dp * h * h * n_sum / I
    assert abs(rep.gradient[0] - exact) <= 1e-8 * abs(exact)


def test_discrete_adjoint_linear_maps(rng):
    A = [rng.normal(size=(4, 4)) * 0.5 for _ in range(6)]
    B = [rng.normal(size=(4, 2)) for _ in range(6)]
    c = rng.normal(size=4)
    # J = c . x_N, so dJ/dtheta = sum_k c^T A_{N-1} ... A_{k+1} B_k
    exact = np.zeros(2)
    for k in range(6):
        P = np.eye(4)
        for j in range(k + 1, 6):
            P = A[j] @ P
        exact += c @ P @ B[k]
    got = discrete_adjoint(list(zip(A, B)), c)
    assert np.abs(got - exact).max() < 1e-12 * np.abs(exact).max()


def test_mirror_symmetric_task_has_zero_gradient():
    # target on the symmetry axis of a hanging link: J(tau) = J(-tau)
    task = ReachTask(single_link((0.0, -9.81, 0.0)), TIP, [0.0, -0.5, 0.0], 0.1, 1e-3)
    g = adjoint_gradient(task, [0.0]).gradient
    assert abs(g[0]) < 1e-12


def test_arm_gradient_matches_fd(scenes, rng):
    task = scene_task(scenes, "arm")
    for _ in range(2):
        theta = rng.normal(0.0, 1.0, task.dof)
        rep = adjoint_gradient(task, theta)
        rep.fd_gradient = fd_gradient(task, theta)
        assert rep.relative_error < 1e-3


def test_bdf1_gradient_matches_fd(scenes):
    task = scene_task(scenes, "reach_1dof", integrator="bdf1")
    for theta in ([-0.5], [1.5]):
        rep = adjoint_gradient(task, theta)
        rep.fd_gradient = fd_gradient(task, theta)
        assert rep.relative_error < 1e-3


def test_gradient_is_bitwise_deterministic(scenes):
    task = scene_task(scenes, "reach_1dof")
    a, b = adjoint_gradient(task, [0.9]), adjoint_gradient(task, [0.9])
    assert np.array_equal(a.gradient, b.gradient) and a.objective == b.objective


def test_sdirk2_is_rejected(scenes):
    task = scene_task(scenes, "reach_1dof", integrator="sdirk2")
    with pytest.raises(ValueError):
        adjoint_gradient(task, [0.0])


def test_task_validation(scenes):
    with pytest.raises(ValueError):
        scene_task(scenes, "reach_1dof", horizon=0.0105)
    with pytest.raises(ValueError):
        rollout(scene_task(scenes, "reach_1dof"), [0.0, 1.0])


# -- optimize_reach -------------------------------------------------------------


def test_already_optimal_terminates_immediately(scenes):
    task = scene_task(scenes, "reach_1dof")
    task.target = task.effector_position(rollout(task, [0.0]).qs[-1])
    res = optimize_reach(task, [0.0])
    assert res.objective == 0.0
    assert res.rollouts == 1 and len(res.history) == 1
    assert res.status in ("target_reached", "converged")


def test_reach_1dof_and_rollout_ratio(scenes):
    task = scene_task(scenes, "reach_1dof")
    quick = optimize_reach(task, [0.0], max_iters=50, objective_target=1e-4)
    assert quick.objective < 1e-4 and len(quick.history) - 1 <= 50
    full = optimize_reach(task, [0.0], max_iters=50)
    base = coordinate_search(task, [0.0], objective_target=full.objective)
    assert base.objective <= full.objective
    assert base.rollouts >= 5 * full.rollouts
