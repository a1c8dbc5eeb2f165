"""Reduced-coordinate articulated rigid-body tree.

Each body frame sits at the body's center of mass, so the body-frame spatial
inertia ``diag(I, m*1)`` is constant and block diagonal. Joint placements and
user-facing anchor coordinates are given in *link* frames (the joint frame of
the body); :class:`Skeleton` re-frames them at construction.

Spherical joints use exponential coordinates for the configuration and the
relative body-frame angular velocity for the generalized velocity. Positions
advance through :meth:`Skeleton.retract`, which composes a local exponential
step onto the current rotation and re-expresses the result canonically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spatial import (
    Transform,
    ad,
    adjoint_inverse,
    compose,
    cross,
    cross_matrix,
    exp_so3,
    invert,
    log_so3,
    rotation_about,
)

WORLD = -1
JOINT_DOFS = {"revolute": 1, "spherical": 3, "fixed": 0}


class ConfigurationError(ValueError):
    """Skeleton or state inconsistent with the model definition."""


@dataclass
class Body:
    name: str
    mass: float
    inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    com_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mesh_ref: str | None = None

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        self.com_offset = np.asarray(self.com_offset, dtype=float).reshape(3)
        if self.mass < 0.0:
            raise ConfigurationError(f"body {self.name!r}: negative mass")
        if not np.allclose(self.inertia, self.inertia.T, atol=1e-12):
            raise ConfigurationError(f"body {self.name!r}: inertia not symmetric")
        if np.linalg.eigvalsh(self.inertia).min() < -1e-12:
            raise ConfigurationError(f"body {self.name!r}: inertia not positive semidefinite")


@dataclass
class Joint:
    """Connects a body to ``parent`` (a body index or ``WORLD``).

    ``rest_transform`` maps the joint frame into the parent's link frame.
    """

    kind: str
    parent: int = WORLD
    rest_transform: Transform = field(default_factory=Transform.identity)
    axis: np.ndarray | None = None
    damping: float = 0.0

    def __post_init__(self):
        if self.kind not in JOINT_DOFS:
            raise ConfigurationError(f"unknown joint kind {self.kind!r}")
        if self.kind == "revolute":
            if self.axis is None:
                raise ConfigurationError("revolute joint needs an axis")
            self.axis = np.asarray(self.axis, dtype=float).reshape(3)
            if abs(np.linalg.norm(self.axis) - 1.0) > 1e-12:
                raise ConfigurationError("revolute axis must be a unit vector")

    @property
    def ndof(self) -> int:
        return JOINT_DOFS[self.kind]


@dataclass
class ReducedState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).copy()
        self.qdot = np.asarray(self.qdot, dtype=float).copy()

    def copy(self) -> ReducedState:
        return ReducedState(self.q, self.qdot)


@dataclass
class Kinematics:
    """Everything one recursive pass produces for a state."""

    transforms: list[Transform]
    twists: np.ndarray  # (n, 6)
    J: np.ndarray  # (6n, dof)
    Jdot: np.ndarray | None  # (6n, dof)

    def rotation(self, body: int) -> np.ndarray:
        return np.eye(3) if body == WORLD else self.transforms[body].rotation

    def point(self, body: int, local) -> np.ndarray:
        if body == WORLD:
            return np.asarray(local, dtype=float)
        return self.transforms[body].apply(local)

    def omega(self, body: int) -> np.ndarray:
        return np.zeros(3) if body == WORLD else self.twists[body, :3]


class Skeleton:
    """Immutable tree of bodies; ``joints[i]`` attaches body ``i`` to its parent."""

    def __init__(self, bodies: list[Body], joints: list[Joint]):
        if len(bodies) != len(joints):
            raise ConfigurationError("need exactly one joint per body")
        self.bodies = list(bodies)
        self.joints = list(joints)
        self.n = len(bodies)
        self.dof_index: list[slice] = []
        k = 0
        for i, j in enumerate(self.joints):
            if j.parent != WORLD and not (0 <= j.parent < i):
                raise ConfigurationError(
                    f"joint {i}: parent {j.parent} must be WORLD or an earlier body"
                )
            self.dof_index.append(slice(k, k + j.ndof))
            k += j.ndof
        self.dof = k

        # body (COM) frames: C_i(q) = X_i * M_i(q_i) * E_i
        self._X = []
        self._E = []
        self._S = []
        for i, (b, j) in enumerate(zip(self.bodies, self.joints)):
            parent_com = np.zeros(3) if j.parent == WORLD else self.bodies[j.parent].com_offset
            self._X.append(compose(Transform.from_translation(-parent_com), j.rest_transform))
            E = Transform.from_translation(b.com_offset)
            self._E.append(E)
            AdE = adjoint_inverse(E)
            if j.kind == "revolute":
                S = AdE @ np.concatenate([j.axis, np.zeros(3)])[:, None]
            elif j.kind == "spherical":
                S = AdE @ np.vstack([np.eye(3), np.zeros((3, 3))])
            else:
                S = np.zeros((6, 0))
            self._S.append(S)

        blocks = []
        for b in self.bodies:
            blocks.append(b.inertia)
            blocks.append(b.mass * np.eye(3))
        self.mass_matrix_maximal = _block_diag(blocks)
        self.damping = np.zeros(self.dof)
        for j, sl in zip(self.joints, self.dof_index):
            self.damping[sl] = j.damping

    # -- configuration space -------------------------------------------------

    def check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise ConfigurationError(f"expected {self.dof} joint coordinates, got shape {q.shape}")
        return q

    def joint_motion(self, i: int, q) -> Transform:
        j = self.joints[i]
        qi = q[self.dof_index[i]]
        if j.kind == "revolute":
            return Transform(rotation_about(j.axis, qi[0]), np.zeros(3))
        if j.kind == "spherical":
            return Transform(exp_so3(qi), np.zeros(3))
        return Transform.identity()

    def retract(self, q, dq) -> np.ndarray:
        """Advance ``q`` by tangent increment ``dq`` (velocity times time)."""
        out = np.asarray(q, dtype=float) + dq
        for j, sl in zip(self.joints, self.dof_index):
            if j.kind == "spherical":
                R = exp_so3(q[sl]) @ exp_so3(dq[sl])
                out[sl] = log_so3(R)
        return out

    def link_to_body(self, body: int, local) -> np.ndarray:
        """Convert a link-frame point to body (COM) frame coordinates."""
        local = np.asarray(local, dtype=float)
        if body == WORLD:
            return local
        return local - self.bodies[body].com_offset

    # -- kinematics ----------------------------------------------------------

    def kinematics(self, q, qdot=None, with_jdot: bool = False) -> Kinematics:
        q = self.check_q(q)
        n, dof = self.n, self.dof
        J = np.zeros((6 * n, dof))
        Jd = np.zeros((6 * n, dof)) if with_jdot else None
        transforms: list[Transform] = []
        for i, j in enumerate(self.joints):
            C = compose(compose(self._X[i], self.joint_motion(i, q)), self._E[i])
            rows = slice(6 * i, 6 * i + 6)
            sl = self.dof_index[i]
            if j.parent == WORLD:
                transforms.append(C)
            else:
                transforms.append(compose(transforms[j.parent], C))
                A = adjoint_inverse(C)
                prow = slice(6 * j.parent, 6 * j.parent + 6)
                AJp = A @ J[prow]
                J[rows] = AJp
                if with_jdot:
                    V = self._S[i] @ qdot[sl]
                    Jd[rows] = A @ Jd[prow] - ad(V) @ AJp
            J[rows, sl] += self._S[i]
        twists = (J @ qdot).reshape(n, 6) if qdot is not None else np.zeros((n, 6))
        return Kinematics(transforms, twists, J, Jd)

    def mass_matrix(self, kin: Kinematics) -> np.ndarray:
        return kin.J.T @ self.mass_matrix_maximal @ kin.J


def forward_kinematics(skeleton: Skeleton, q) -> list[Transform]:
    return skeleton.kinematics(q).transforms


def jacobian_mr(skeleton: Skeleton, q) -> np.ndarray:
    return skeleton.kinematics(q).J


def jacobian_mr_dot(skeleton: Skeleton, q, qdot) -> np.ndarray:
    return skeleton.kinematics(q, np.asarray(qdot, dtype=float), with_jdot=True).Jdot


def body_forces(skeleton: Skeleton, transforms, twists, gravity) -> np.ndarray:
    """Stacked body-frame wrenches: gravity on each COM plus gyroscopic terms."""
    g = np.asarray(gravity, dtype=float)
    out = np.zeros(6 * skeleton.n)
    for i, b in enumerate(skeleton.bodies):
        w, v = twists[i, :3], twists[i, 3:]
        out[6 * i : 6 * i + 3] = -cross(w, b.inertia @ w)
        out[6 * i + 3 : 6 * i + 6] = transforms[i].rotation.T @ (b.mass * g) - b.mass * cross(w, v)
    return out


def relative_transform(transforms, a: int, b: int) -> Transform:
    """Pose of body ``b`` expressed in body ``a``'s frame."""
    Ta = Transform.identity() if a == WORLD else transforms[a]
    Tb = Transform.identity() if b == WORLD else transforms[b]
    return compose(invert(Ta), Tb)


def _block_diag(blocks) -> np.ndarray:
    size = sum(m.shape[0] for m in blocks)
    out = np.zeros((size, size))
    k = 0
    for m in blocks:
        s = m.shape[0]
        out[k : k + s, k : k + s] = m
        k += s
    return out


def point_jacobian(kin: Kinematics, body: int, local, dof: int) -> np.ndarray:
    """World-velocity Jacobian (3 x dof) of a body-fixed point, body-frame coords."""
    if body == WORLD:
        return np.zeros((3, dof))
    R = kin.transforms[body].rotation
    Jb = kin.J[6 * body : 6 * body + 6]
    return R @ (cross_matrix(local).T @ Jb[:3] + Jb[3:])
