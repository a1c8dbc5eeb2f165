"""Shared oracles and small model builders for the test suite."""

import numpy as np

from inertial_muscles.skeleton import WORLD, Body, Joint, Skeleton
from inertial_muscles.spatial import Transform


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def rod(name, m=1.0, L=0.3, com_y=None):
    com = [0.0, -L / 2 if com_y is None else com_y, 0.0]
    return Body(name, m, np.diag([m * L * L / 12, 1e-4, m * L * L / 12]), com)


def double_pendulum(L=0.3, m=1.0):
    return Skeleton(
        [rod("upper", m, L), rod("lower", m, L)],
        [Joint("revolute", WORLD, Transform.identity(), axis=[0, 0, 1.0]),
         Joint("revolute", 0, Transform.from_translation([0, -L, 0]), axis=[0, 0, 1.0])],
    )


def mixed_chain(rng):
    """Revolute -> spherical -> revolute with tilted joint frames and off-axis COMs."""
    bodies = [
        Body("a", 1.0, np.diag(rng.uniform(0.01, 0.1, 3)), [0.0, -0.2, 0.0]),
        Body("b", 0.7, np.diag(rng.uniform(0.01, 0.1, 3)), [0.1, -0.2, 0.05]),
        Body("c", 0.5, np.diag(rng.uniform(0.01, 0.1, 3)), [0.0, -0.15, 0.0]),
    ]
    ax = rng.normal(size=3)
    ax /= np.linalg.norm(ax)
    joints = [
        Joint("revolute", WORLD, Transform.from_rotvec(rng.normal(size=3) * 0.3), axis=[0, 0, 1.0]),
        Joint("spherical", 0, Transform.from_rotvec(rng.normal(size=3) * 0.3, [0, -0.4, 0])),
        Joint("revolute", 1, Transform.from_rotvec(rng.normal(size=3) * 0.3, [0.05, -0.4, 0]), axis=ax),
    ]
    return Skeleton(bodies, joints)


def point_velocity_fd(positions, skeleton, q, v, h=1e-6):
    """Central difference of ``positions(kin)`` along the motion ``q(t) = retract(q, t v)``."""
    xp = positions(skeleton.kinematics(skeleton.retract(q, h * v)))
    xm = positions(skeleton.kinematics(skeleton.retract(q, -h * v)))
    return (np.asarray(xp) - np.asarray(xm)).reshape(-1) / (2 * h)


def jacobian_rate_fd(jac, skeleton, q, v, h=1e-5):
    """Central difference in time of a reduced Jacobian ``jac(kin)``."""
    kp = skeleton.kinematics(skeleton.retract(q, h * v))
    km = skeleton.kinematics(skeleton.retract(q, -h * v))
    return (jac(kp) - jac(km)) / (2 * h)


def reduced_mass_point_errors(mass_points, skeleton, q, v, h_pos=1e-6, h_rate=1e-5):
    """Relative errors of ``J_ar v`` against FD positions and of ``Jdot_ar`` against FD in time.

    ``mass_points(kin, with_dot)`` returns ``(J_am, Jdot_am, x_alpha)``.
    """
    kin = skeleton.kinematics(q, v, True)
    Jam, Jam_dot, _ = mass_points(kin, True)
    Jar = Jam @ kin.J
    Jar_dot = Jam_dot @ kin.J + Jam @ kin.Jdot
    vel = point_velocity_fd(lambda k: mass_points(k, False)[2], skeleton, q, v, h_pos)
    rate = jacobian_rate_fd(lambda k: mass_points(k, False)[0] @ k.J, skeleton, q, v, h_rate)
    return rel_err(Jar @ v, vel), rel_err(Jar_dot, rate)


def elbow_sweep(scenes, lo, hi, n):
    """Continuity report for the wrap pendulum's elbow swept over ``[lo, hi]`` with the shoulder at 0.3."""
    from inertial_muscles.wrap.continuity import continuity_report

    sc = scenes("wrap_pendulum")
    m = sc.model.muscles[0]
    th = np.linspace(lo, hi, n)
    qs = np.column_stack([np.full(n, 0.3), th])
    return continuity_report(m.cylinder, m.weights, m.origin, m.insertion, sc.model.skeleton, qs, th)
