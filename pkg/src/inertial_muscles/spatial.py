"""Rigid-body math: rotations, transforms, body-frame twists.

Twists are always body-frame and stacked rotation first, ``(omega, nu)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-10


def cross_matrix(v):
    """Skew-symmetric matrix ``[v]`` with ``[v] @ w == cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def cross(a, b):
    """Cross product of two 3-vectors (cheaper than ``np.cross`` for single vectors)."""
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def gamma(x):
    """3x6 map from a body twist to the body-frame velocity of body-fixed point ``x``.

    ``gamma(x) @ (omega, nu) == cross(omega, x) + nu``.
    """
    g = np.empty((3, 6))
    g[:, :3] = cross_matrix(x).T
    g[:, 3:] = np.eye(3)
    return g


def rotation_rate(R, omega):
    """Time derivative of ``R`` for body-frame angular velocity ``omega``."""
    return R @ cross_matrix(omega)


def exp_so3(w):
    """Rotation matrix for rotation vector ``w`` (Rodrigues)."""
    w = np.asarray(w, dtype=float)
    theta2 = float(w @ w)
    K = cross_matrix(w)
    if theta2 < 1e-16:
        # second-order Taylor; exact to machine precision at this size
        return np.eye(3) + K + 0.5 * (K @ K)
    theta = np.sqrt(theta2)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta2
    return np.eye(3) + a * K + b * (K @ K)


def log_so3(R):
    """Rotation vector of ``R`` with norm in ``[0, pi]``."""
    R = np.asarray(R, dtype=float)
    c = 0.5 * (np.trace(R) - 1.0)
    c = min(1.0, max(-1.0, c))
    vee = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    theta = np.arccos(c)
    if theta < 1e-6:
        return 0.5 * vee * (1.0 + theta * theta / 6.0)
    if np.pi - theta > 1e-4:
        return 0.5 * theta / np.sin(theta) * vee
    # near pi: axis from the symmetric part
    B = 0.5 * (R + R.T) - c * np.eye(3)
    k = int(np.argmax(np.diag(B)))
    axis = B[:, k] / np.sqrt(max(B[k, k], 1e-300))
    if axis @ vee < 0.0:
        axis = -axis
    axis /= np.linalg.norm(axis)
    return theta * axis


def rotation_about(axis, angle):
    return exp_so3(np.asarray(axis, dtype=float) * angle)


def orthonormalize(R):
    """Nearest rotation matrix (polar decomposition via SVD)."""
    U, _, Vt = np.linalg.svd(R)
    out = U @ Vt
    if np.linalg.det(out) < 0.0:
        U[:, -1] *= -1.0
        out = U @ Vt
    return out


@dataclass(frozen=True)
class Transform:
    """Rigid frame: ``x_parent = rotation @ x_local + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        p = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    @classmethod
    def identity(cls) -> Transform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, p) -> Transform:
        return cls(np.eye(3), p)

    @classmethod
    def from_rotvec(cls, w, p=(0.0, 0.0, 0.0)) -> Transform:
        return cls(exp_so3(w), p)

    def apply(self, x):
        """Map points (3,) or (m, 3) from local to parent coordinates."""
        x = np.asarray(x, dtype=float)
        return x @ self.rotation.T + self.translation

    def apply_inverse(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.translation) @ self.rotation

    def is_valid(self, tol: float = ORTHO_TOL) -> bool:
        R = self.rotation
        return (
            bool(np.all(np.isfinite(R)) and np.all(np.isfinite(self.translation)))
            and np.allclose(R.T @ R, np.eye(3), atol=tol)
            and abs(np.linalg.det(R) - 1.0) < tol
        )

    def matrix(self) -> np.ndarray:
        H = np.eye(4)
        H[:3, :3] = self.rotation
        H[:3, 3] = self.translation
        return H


def compose(a: Transform, b: Transform) -> Transform:
    """``a ∘ b``: first ``b`` then ``a``."""
    return Transform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(a: Transform) -> Transform:
    Rt = a.rotation.T
    return Transform(Rt, -Rt @ a.translation)


def adjoint_inverse(T: Transform) -> np.ndarray:
    """6x6 map taking a parent-frame twist to the frame ``T`` (child pose in parent)."""
    Rt = T.rotation.T
    A = np.zeros((6, 6))
    A[:3, :3] = Rt
    A[3:, 3:] = Rt
    A[3:, :3] = -Rt @ cross_matrix(T.translation)
    return A


def ad(twist) -> np.ndarray:
    """6x6 twist cross-product operator ``ad_V`` for ``V = (omega, nu)``."""
    w = cross_matrix(twist[:3])
    out = np.zeros((6, 6))
    out[:3, :3] = w
    out[3:, 3:] = w
    out[3:, :3] = cross_matrix(twist[3:])
    return out
