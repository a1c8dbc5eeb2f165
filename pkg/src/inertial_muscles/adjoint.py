"""Discrete-adjoint gradients of a reaching objective with respect to constant joint torques.

The forward rollout stores every state; the reverse sweep needs the one-step
map's Jacobians with respect to state and parameters. Those come from central
differences of the acceleration (uniform across analytic and network terms).
For BDF1 the one-step map is differentiated through its converged residual by
the implicit function theorem, never by differencing the Newton solve itself.
Torques enter the accelerations linearly, so their Jacobian is ``M^-1`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import integrators
from .dynamics import Controls, Model, NumericalError, Options, assemble, step
from .paths import Anchor
from .skeleton import ReducedState

ADJOINT_INTEGRATORS = ("forward_euler", "bdf1")
FD_REL_STEP = 1e-6


@dataclass
class ReachTask:
    model: Model
    effector: Anchor
    target: np.ndarray
    horizon: float
    dt: float
    integrator: str = "forward_euler"
    q0: np.ndarray | None = None
    qdot0: np.ndarray | None = None
    options: Options = field(default_factory=Options)

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float).reshape(3)
        if not (self.horizon >= 0.0 and self.dt > 0.0):
            raise ValueError("horizon must be non-negative and dt positive")
        n = round(self.horizon / self.dt)
        if abs(n * self.dt - self.horizon) > 1e-9 * self.horizon:
            raise ValueError(f"dt={self.dt} does not divide horizon={self.horizon}")
        self.steps = int(n)
        self.integrator = integrators.canonical(self.integrator)
        dof = self.model.dof
        self.q0 = np.zeros(dof) if self.q0 is None else np.asarray(self.q0, dtype=float)
        self.qdot0 = np.zeros(dof) if self.qdot0 is None else np.asarray(self.qdot0, dtype=float)

    @property
    def dof(self) -> int:
        return self.model.dof

    def effector_position(self, q) -> np.ndarray:
        kin = self.model.skeleton.kinematics(q)
        return kin.point(self.effector.body, self.effector.local_pos)

    def objective(self, q) -> float:
        d = self.effector_position(q) - self.target
        return float(d @ d)


@dataclass
class Rollout:
    qs: np.ndarray  # (N+1, dof)
    vs: np.ndarray  # (N+1, dof)
    objective: float


@dataclass
class GradientReport:
    objective: float
    gradient: np.ndarray
    fd_gradient: np.ndarray | None = None

    @property
    def relative_error(self) -> float:
        if self.fd_gradient is None:
            return math.nan
        scale = max(np.linalg.norm(self.fd_gradient), 1e-300)
        return float(np.linalg.norm(self.gradient - self.fd_gradient) / scale)


def rollout(task: ReachTask, theta) -> Rollout:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (task.dof,):
        raise ValueError(f"expected {task.dof} torque parameters")
    ctrl = Controls(torques=theta)
    qs = np.empty((task.steps + 1, task.dof))
    vs = np.empty_like(qs)
    st = ReducedState(task.q0.copy(), task.qdot0.copy())
    qs[0], vs[0] = st.q, st.qdot
    cache = integrators.NewtonCache()
    for k in range(task.steps):
        st = step(task.model, st, ctrl, task.dt, task.integrator, task.options, cache)
        qs[k + 1], vs[k + 1] = st.q, st.qdot
    return Rollout(qs, vs, task.objective(qs[-1]))


# -- linearization of one step ------------------------------------------------


def _fd_columns(fun, x, rel_step=FD_REL_STEP):
    return integrators.fd_jacobian(fun, x, rel_step=rel_step)


def _accel_jacobians(model: Model, q, v, theta, options):
    """``(a, da/dq, da/dv, da/dtheta)`` at one state."""
    ctrl = Controls(torques=theta)

    def accel(q_, v_):
        s = assemble(model, q_, v_, ctrl, options)
        return np.linalg.solve(s.M, s.f)

    s = assemble(model, q, v, ctrl, options)
    a = np.linalg.solve(s.M, s.f)
    Aq = _fd_columns(lambda x: accel(x, v), q)
    Av = _fd_columns(lambda x: accel(q, x), v)
    return a, Aq, Av, np.linalg.inv(s.M)


def _retract_jacobians(model: Model, q, dq):
    """Partials of ``retract(q, dq)`` in ``q`` and ``dq``."""
    Rq = _fd_columns(lambda x: model.retract(x, dq), q)
    Rd = _fd_columns(lambda x: model.retract(q, x), dq)
    return Rq, Rd


def step_jacobians(task: ReachTask, q, v, q_next, v_next, theta):
    """``(A, B)`` with ``d x_next = A dx + B dtheta`` for ``x = (q, v)``."""
    h, n, m = task.dt, task.dof, task.model
    if task.integrator == "forward_euler":
        _, Aq, Av, Minv = _accel_jacobians(m, q, v, theta, task.options)
        Rq, Rd = _retract_jacobians(m, q, h * v)
        A = np.block([[Rq, h * Rd], [h * Aq, np.eye(n) + h * Av]])
        B = np.vstack([np.zeros((n, n)), h * Minv])
        return A, B
    # BDF1: V = v + h a(Q, V), Q = retract(q, h V); the step solved for V = v_next
    V = v_next
    _, Aq, Av, Minv = _accel_jacobians(m, q_next, V, theta, task.options)
    Rq, Rd = _retract_jacobians(m, q, h * V)
    dR_dV = np.eye(n) - h * (Aq @ (h * Rd) + Av)
    rhs = np.hstack([h * Aq @ Rq, np.eye(n), h * Minv])  # minus dR/d(q, v, theta)
    sol = np.linalg.solve(dR_dV, rhs)
    dV_dq, dV_dv, dV_dth = sol[:, :n], sol[:, n : 2 * n], sol[:, 2 * n :]
    A = np.block([[Rq + h * Rd @ dV_dq, h * Rd @ dV_dv], [dV_dq, dV_dv]])
    B = np.vstack([h * Rd @ dV_dth, dV_dth])
    return A, B


def discrete_adjoint(jacobians, terminal_gradient) -> np.ndarray:
    """Reverse sweep for ``x_{k+1} = Phi(x_k, theta)`` with objective ``J(x_N)``.

    ``jacobians`` is a sequence of ``(A_k, B_k)``; returns ``dJ/dtheta``.
    """
    lam = np.asarray(terminal_gradient, dtype=float)
    grad = None
    for A, B in reversed(list(jacobians)):
        g = B.T @ lam
        grad = g if grad is None else grad + g
        lam = A.T @ lam
        if not np.all(np.isfinite(lam)):
            raise NumericalError("non-finite adjoint variables")
    return grad


def terminal_gradient(task: ReachTask, q) -> np.ndarray:
    gq = _fd_columns(lambda x: np.array([task.objective(x)]), q)[0]
    return np.concatenate([gq, np.zeros(task.dof)])


def adjoint_gradient(task: ReachTask, theta, roll: Rollout | None = None) -> GradientReport:
    if task.integrator not in ADJOINT_INTEGRATORS:
        raise ValueError(f"adjoint supports {ADJOINT_INTEGRATORS}, not {task.integrator!r}")
    theta = np.asarray(theta, dtype=float)
    roll = roll or rollout(task, theta)
    if task.steps == 0:
        return GradientReport(roll.objective, np.zeros(task.dof))

    def gen():
        for k in range(task.steps):
            yield step_jacobians(task, roll.qs[k], roll.vs[k], roll.qs[k + 1], roll.vs[k + 1], theta)

    grad = discrete_adjoint(gen(), terminal_gradient(task, roll.qs[-1]))
    return GradientReport(roll.objective, grad)


def fd_gradient(task: ReachTask, theta, rel_step: float = 1e-5) -> np.ndarray:
    """Full central-difference gradient of the rollout objective (2 * dof rollouts)."""
    theta = np.asarray(theta, dtype=float)
    return _fd_columns(lambda th: np.array([rollout(task, th).objective]), theta, rel_step)[0]


# -- optimization ---------------------------------------------------------------


@dataclass
class OptimizationResult:
    theta: np.ndarray
    objective: float
    status: str  # "converged", "max_iters", "line_search_failed", "target_reached"
    rollouts: int
    gradients: int
    history: list = field(default_factory=list)  # (iter, objective, grad_norm, step_length)


class _Counter:
    def __init__(self, task):
        self.task = task
        self.rollouts = 0
        self.gradients = 0

    def value(self, theta):
        self.rollouts += 1
        return rollout(self.task, theta)

    def grad(self, theta, roll):
        self.gradients += 1
        return adjoint_gradient(self.task, theta, roll).gradient


def optimize_reach(task: ReachTask, theta0, max_iters: int = 50, tol: float = 1e-8,
                   objective_target: float = 0.0, max_backtracks: int = 30) -> OptimizationResult:
    """BFGS with Armijo backtracking on the rollout objective using adjoint gradients.

    Rollout counts include only forward simulations; each gradient reuses the
    accepted point's rollout for its reverse sweep.
    """
    cnt = _Counter(task)
    x = np.array(theta0, dtype=float)
    n = len(x)
    roll = cnt.value(x)
    f = roll.objective
    g = cnt.grad(x, roll)
    H = np.eye(n) / max(np.linalg.norm(g), 1e-300)  # first trial step has unit length
    scaled = False
    hist = [(0, f, float(np.linalg.norm(g)), 0.0)]
    status = "max_iters"
    for it in range(1, max_iters + 1):
        if np.linalg.norm(g) < tol:
            status = "converged"
            break
        if f <= objective_target:
            status = "target_reached"
            break
        p = -H @ g
        if g @ p >= 0.0:  # lost descent: reset curvature
            H = np.eye(n) / max(np.linalg.norm(g), 1e-300)
            scaled = False
            p = -H @ g
        t = 1.0
        for _ in range(max_backtracks):
            r_new = cnt.value(x + t * p)
            if np.isfinite(r_new.objective) and r_new.objective <= f + 1e-4 * t * (g @ p):
                break
            t *= 0.5
        else:
            status = "line_search_failed"
            break
        s = t * p
        x_new = x + s
        g_new = cnt.grad(x_new, r_new)
        y = g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            I = np.eye(n)
            if not scaled:  # rescale the initial guess with the observed curvature
                H = (sy / (y @ y)) * I
                scaled = True
            H = (I - rho * np.outer(s, y)) @ H @ (I - rho * np.outer(y, s)) + rho * np.outer(s, s)
        x, f, g = x_new, r_new.objective, g_new
        hist.append((it, f, float(np.linalg.norm(g)), float(t)))
    else:
        if np.linalg.norm(g) < tol:
            status = "converged"
    return OptimizationResult(x, f, status, cnt.rollouts, cnt.gradients, hist)


def coordinate_search(task: ReachTask, theta0, step0: float = 1.0, objective_target: float = 0.0,
                      max_rollouts: int = 5000, min_step: float = 1e-10) -> OptimizationResult:
    """Derivative-free compass search: try +/- step on each coordinate, halve on failure."""
    cnt = _Counter(task)
    x = np.array(theta0, dtype=float)
    f = cnt.value(x).objective
    h = step0
    hist = [(0, f, math.nan, h)]
    status = "max_iters"
    it = 0
    while cnt.rollouts < max_rollouts:
        if f <= objective_target:
            status = "target_reached"
            break
        if h < min_step:
            status = "converged"
            break
        improved = False
        for i in range(len(x)):
            for sgn in (1.0, -1.0):
                trial = x.copy()
                trial[i] += sgn * h
                ft = cnt.value(trial).objective
                if ft < f:
                    x, f, improved = trial, ft, True
                    break
        if not improved:
            h *= 0.5
        it += 1
        hist.append((it, f, math.nan, h))
    return OptimizationResult(x, f, status, cnt.rollouts, 0, hist)
