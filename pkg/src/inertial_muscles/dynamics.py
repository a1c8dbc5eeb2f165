"""Combined skeleton + muscle-mass equations of motion in reduced coordinates.

    M(q) qdd = f(q, qd)
    M = J_ar^T M_a J_ar + J_mr^T M_m J_mr
    f = J_ar^T (f_a - M_a Jdot_ar qd) + J_mr^T (f_m - M_m Jdot_mr qd) + f_r

Mass points never receive activation forces directly; muscle tension acts on
the skeleton as ``-T * d(length)/dq``. Mass removed from a muscle through
``muscle_mass_fraction < 1`` is lumped as rigid point masses on the anchor
bodies, whose velocity-product terms are always kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import integrators
from .hill import hill_force
from .muscles import Musculotendon
from .paths import anchor_jacobians
from .skeleton import WORLD, Body, Kinematics, ReducedState, Skeleton, body_forces

DEFAULT_GRAVITY = (0.0, -9.81, 0.0)


class NumericalError(FloatingPointError):
    """Non-finite quantities in the assembled system."""


@dataclass
class Options:
    qvv: bool = True
    muscle_mass_fraction: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.muscle_mass_fraction <= 1.0:
            raise ValueError("muscle_mass_fraction must lie in [0, 1]")


@dataclass
class Controls:
    torques: np.ndarray | None = None
    tensions: np.ndarray | None = None  # one per muscle, Newtons


@dataclass
class SystemMatrices:
    M: np.ndarray
    f: np.ndarray
    x_alpha: list = field(default_factory=list)
    xdot_alpha: list = field(default_factory=list)


class Model:
    """Skeleton, muscles and gravity; immutable once built."""

    def __init__(self, skeleton: Skeleton, muscles: list[Musculotendon] | None = None,
                 gravity=DEFAULT_GRAVITY, q_rest=None):
        self.skeleton = skeleton
        self.muscles = list(muscles or [])
        self.gravity = np.asarray(gravity, dtype=float)
        self.q_rest = np.zeros(skeleton.dof) if q_rest is None else np.asarray(q_rest, dtype=float)
        kin = skeleton.kinematics(self.q_rest)
        for mus in self.muscles:
            mus.calibrate(kin)

    @property
    def dof(self) -> int:
        return self.skeleton.dof

    def kinematics(self, q, v=None, with_jdot=False) -> Kinematics:
        v = np.zeros(self.dof) if v is None else v
        return self.skeleton.kinematics(q, v, with_jdot)

    def retract(self, q, dq):
        return self.skeleton.retract(q, dq)


def _absorb_point(body: Body, p, m) -> Body:
    """Body with a point mass ``m`` at COM-frame position ``p`` rigidly attached."""
    p = np.asarray(p, dtype=float)
    M = body.mass + m
    c = m * p / M  # new COM, old COM frame

    def shift(r):
        return (r @ r) * np.eye(3) - np.outer(r, r)

    inertia = body.inertia + body.mass * shift(c) + m * shift(p - c)
    return Body(body.name, M, inertia, body.com_offset + c, body.mesh_ref)


def lumped_model(model: Model) -> Model:
    """Muscle-free model whose bones carry all muscle mass at the anchors.

    This is the conventional baseline: each muscle's mass is split between the
    origin and insertion bodies according to ``lump_to_origin``. Mass lumped
    onto the world is dropped.
    """
    bodies = list(model.skeleton.bodies)
    for mus in model.muscles:
        for anchor, m in mus.lumped_points(mus.mass):
            if anchor.body != WORLD:
                b = anchor.body
                # anchors are in the original COM frame; earlier absorptions moved the COM
                shift = bodies[b].com_offset - model.skeleton.bodies[b].com_offset
                bodies[b] = _absorb_point(bodies[b], anchor.local_pos - shift, m)
    sk = Skeleton(bodies, model.skeleton.joints)
    return Model(sk, [], model.gravity, model.q_rest)


def _point_mass_terms(anchor, mass, kin: Kinematics, v, gravity, dof):
    """(J (3,dof), bias acceleration J_dot v) of a body-fixed point."""
    nb = len(kin.transforms)
    X, Jxm, Jxm_dot = anchor_jacobians([anchor], kin, nb, with_dot=True)
    J = Jxm @ kin.J
    bias = Jxm_dot @ kin.twists.reshape(-1) + Jxm @ (kin.Jdot @ v)
    return X[0], J, bias


def assemble(model: Model, q, v, controls: Controls | None = None, options: Options | None = None,
             diagnostics: bool = False) -> SystemMatrices:
    options = options or Options()
    sk = model.skeleton
    g = model.gravity
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    kin = sk.kinematics(q, v, with_jdot=True)
    J, Jd = kin.J, kin.Jdot
    Mm = sk.mass_matrix_maximal
    M = J.T @ Mm @ J
    fm = body_forces(sk, kin.transforms, kin.twists, g)
    f = J.T @ (fm - Mm @ (Jd @ v)) - sk.damping * v
    phi = kin.twists.reshape(-1)
    Jd_v = Jd @ v
    sysm = SystemMatrices(M, f)

    frac = options.muscle_mass_fraction
    tensions = None if controls is None else controls.tensions
    for k, mus in enumerate(model.muscles):
        if frac > 0.0 and mus.mass > 0.0:
            Jam, Jam_dot, x = mus.mass_points(kin, with_dot=options.qvv)
            Jar = Jam @ J
            m3 = np.repeat(frac * mus.layout.masses, 3)
            M += Jar.T @ (m3[:, None] * Jar)
            grav = (frac * mus.layout.masses)[:, None] * g
            f += Jar.T @ grav.reshape(-1)
            if options.qvv:
                acc = Jam_dot @ phi + Jam @ Jd_v
                f -= Jar.T @ (m3 * acc)
            if diagnostics:
                sysm.x_alpha.append(x)
                sysm.xdot_alpha.append((Jar @ v).reshape(-1, 3))
        for anchor, m in mus.lumped_points((1.0 - frac) * mus.mass):
            if anchor.body == WORLD:
                continue
            _, Jp, bias = _point_mass_terms(anchor, m, kin, v, g, sk.dof)
            M += m * (Jp.T @ Jp)
            f += Jp.T @ (m * g - m * bias)
        if tensions is not None and tensions[k] != 0.0:
            _, dl_dphi = mus.length_and_gradient(kin)
            f -= tensions[k] * (dl_dphi @ J)

    if controls is not None and controls.torques is not None:
        f += controls.torques
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(f))):
        raise NumericalError(f"non-finite system at q={q.tolist()}, qdot={v.tolist()}")
    return sysm


def accelerations(model: Model, q, v, controls=None, options=None) -> np.ndarray:
    s = assemble(model, q, v, controls, options)
    return np.linalg.solve(s.M, s.f)


def step(model: Model, state: ReducedState, controls: Controls | None, dt: float,
         integrator: str = "sdirk2", options: Options | None = None,
         cache: integrators.NewtonCache | None = None) -> ReducedState:
    def accel(q, v):
        return accelerations(model, q, v, controls, options)

    newton = {} if cache is None or integrators.canonical(integrator) == "forward_euler" else {"cache": cache}
    q, v = integrators.step(state.q, state.qdot, dt, accel, integrator, model.retract, **newton)
    return ReducedState(q, v)


@dataclass
class Energy:
    kinetic: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential


def potential_energy(model: Model, q, options: Options | None = None, kin=None) -> float:
    options = options or Options()
    sk = model.skeleton
    g = model.gravity
    kin = kin or sk.kinematics(q)
    V = 0.0
    for T, b in zip(kin.transforms, sk.bodies):
        V -= b.mass * (g @ T.translation)
    frac = options.muscle_mass_fraction
    for mus in model.muscles:
        if frac > 0.0 and mus.mass > 0.0:
            _, _, x = mus.mass_points(kin, with_dot=False)
            V -= frac * float(mus.layout.masses @ (x @ g))
        for anchor, m in mus.lumped_points((1.0 - frac) * mus.mass):
            V -= m * (g @ kin.point(anchor.body, anchor.local_pos))
    return float(V)


def energy(model: Model, state: ReducedState, options: Options | None = None) -> Energy:
    options = options or Options()
    s = assemble(model, state.q, state.qdot, None, Options(False, options.muscle_mass_fraction))
    T = 0.5 * float(state.qdot @ s.M @ state.qdot)
    return Energy(T, potential_energy(model, state.q, options))


def muscle_lengths(model: Model, q) -> np.ndarray:
    kin = model.skeleton.kinematics(q)
    return np.array([m.length(kin) for m in model.muscles])


def inverse_dynamics(model: Model, qs, vs, accs, options: Options | None = None,
                     tensions=None) -> np.ndarray:
    """Joint torques reproducing the given motion: ``tau = M qdd - f_passive``."""
    qs, vs, accs = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (qs, vs, accs))
    if not (qs.shape == vs.shape == accs.shape) or qs.shape[1] != model.dof:
        raise ValueError("trajectory arrays must all have shape (T, dof)")
    out = np.empty_like(qs)
    ctrl = None if tensions is None else Controls(tensions=np.asarray(tensions, dtype=float))
    for k in range(len(qs)):
        s = assemble(model, qs[k], vs[k], ctrl, options)
        out[k] = s.M @ accs[k] - s.f
    return out


# -- trajectories --------------------------------------------------------------


@dataclass
class TrajectoryRecord:
    t: list = field(default_factory=list)
    q: list = field(default_factory=list)
    qdot: list = field(default_factory=list)
    e_kin: list = field(default_factory=list)
    e_pot: list = field(default_factory=list)
    lengths: list = field(default_factory=list)
    torques: list = field(default_factory=list)
    muscle_names: list = field(default_factory=list)

    def append(self, t, state, en: Energy, lengths, torques=None):
        if self.t and not t > self.t[-1]:
            raise ValueError("trajectory times must be strictly increasing")
        self.t.append(float(t))
        self.q.append(np.array(state.q))
        self.qdot.append(np.array(state.qdot))
        self.e_kin.append(en.kinetic)
        self.e_pot.append(en.potential)
        self.lengths.append(np.array(lengths))
        if torques is not None:
            self.torques.append(np.array(torques))

    @property
    def e_tot(self) -> np.ndarray:
        return np.asarray(self.e_kin) + np.asarray(self.e_pot)

    def arrays(self):
        return np.asarray(self.t), np.asarray(self.q), np.asarray(self.qdot)

    def __len__(self):
        return len(self.t)


ControlFn = Callable[[float, ReducedState], Controls]


class DivergenceError(RuntimeError):
    pass


def simulate(model: Model, state: ReducedState, dt: float, steps: int, integrator: str = "sdirk2",
             options: Options | None = None, controls: Controls | ControlFn | None = None,
             excitations: Callable[[float, ReducedState], np.ndarray] | None = None,
             record_energy: bool = True, max_speed: float = math.inf) -> TrajectoryRecord:
    """Fixed-step simulation loop.

    Muscle activation and tension are advanced explicitly once per step (from
    ``excitations``) and held fixed while the skeleton takes its step.
    """
    options = options or Options()
    rec = TrajectoryRecord(muscle_names=[m.name for m in model.muscles])
    activations = np.array([m.actuator.activation if m.actuator else 0.0 for m in model.muscles])
    state = state.copy()
    t = 0.0

    def record(t, st, torques):
        en = energy(model, st, options) if record_energy else Energy(math.nan, math.nan)
        rec.append(t, st, en, muscle_lengths(model, st.q), torques)

    def controls_at(t, st):
        c = controls(t, st) if callable(controls) else (controls or Controls())
        return Controls(None if c.torques is None else np.asarray(c.torques, dtype=float), c.tensions)

    cache = integrators.NewtonCache()
    c0 = controls_at(t, state)
    record(t, state, c0.torques)
    for k in range(steps):
        c = controls_at(t, state)
        if excitations is not None:
            u = np.asarray(excitations(t, state), dtype=float)
            kin = model.skeleton.kinematics(state.q, state.qdot)
            tens = np.zeros(len(model.muscles))
            for i, mus in enumerate(model.muscles):
                if mus.actuator is None:
                    continue
                length, grad = mus.length_and_gradient(kin)
                rate = float(grad @ (kin.J @ state.qdot))
                tens[i], activations[i] = hill_force(mus.actuator, length, rate, u[i], dt, activations[i])
            c = Controls(c.torques, tens)
        state = step(model, state, c, dt, integrator, options, cache)
        if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(state.qdot))):
            raise DivergenceError(f"non-finite state at t={t + dt:.6g}")
        if np.max(np.abs(state.qdot)) > max_speed:
            raise DivergenceError(f"joint speed exceeded {max_speed} at t={t + dt:.6g}")
        t = (k + 1) * dt
        record(t, state, c.torques)
    return rec
