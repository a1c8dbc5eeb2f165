"""Wrapping-surface muscles driven by the trained surrogate.

A mass point's world velocity splits into three parts: transport with the
surface body, the origin's motion relative to the surface, and the
insertion's motion relative to the surface. The relative parts pass through
the network's input Jacobians, which live in surface coordinates.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..paths import Anchor, MassPointLayout
from ..skeleton import WORLD, Kinematics
from ..spatial import Transform, compose, cross, cross_matrix
from .cylinder import WrapCylinder
from .mlp import MLPWeights, mlp_forward, mlp_input_jacobian

EPS_REL = 1e-6
EPS_MIN, EPS_MAX = 1e-9, 1e-4

_MIRROR = np.diag([1.0, -1.0, 1.0])


class ExtrapolationWarning(UserWarning):
    pass


def _skew_batch(x):
    """``[x]`` for a batch of vectors (m, 3) -> (m, 3, 3)."""
    S = np.zeros((len(x), 3, 3))
    S[:, 0, 1], S[:, 0, 2] = -x[:, 2], x[:, 1]
    S[:, 1, 0], S[:, 1, 2] = x[:, 2], -x[:, 0]
    S[:, 2, 0], S[:, 2, 1] = -x[:, 1], x[:, 0]
    return S


def _gamma_blocks(R, x):
    """``R @ gamma(x)`` for a batch of points x (m, 3) -> (m, 3, 6)."""
    out = np.empty((len(x), 3, 6))
    out[:, :, :3] = R @ _skew_batch(x).transpose(0, 2, 1)
    out[:, :, 3:] = R
    return out


def _gamma_rate_blocks(R, omega, x, xdot):
    """Time derivative of ``R @ gamma(x)`` with ``R' = R[omega]`` and moving ``x``."""
    RW = R @ cross_matrix(omega)
    out = np.empty((len(x), 3, 6))
    out[:, :, :3] = RW @ _skew_batch(x).transpose(0, 2, 1) + R @ _skew_batch(xdot).transpose(0, 2, 1)
    out[:, :, 3:] = RW
    return out


class SurrogateEvaluator:
    """Network evaluation in the cylinder's frame, mirroring for the opposite wrap side."""

    def __init__(self, cylinder: WrapCylinder, weights: MLPWeights):
        self.cylinder = cylinder
        self.weights = weights
        trained_side = int(weights.meta.get("wrap_side", cylinder.wrap_side))
        self.mirror = trained_side != cylinder.wrap_side
        r = weights.meta.get("radius_range")
        if r is not None and not (r[0] <= cylinder.radius <= r[1]):
            warnings.warn(
                f"cylinder radius {cylinder.radius} outside trained range {r}",
                ExtrapolationWarning,
                stacklevel=3,
            )

    def _inputs(self, xo, xi, alphas):
        m = len(alphas)
        X = np.empty((m, 8))
        X[:, 0:3] = xo
        X[:, 3:6] = xi
        X[:, 6] = alphas
        X[:, 7] = self.cylinder.radius
        return X

    def positions(self, xo, xi, alphas):
        if self.mirror:
            xo, xi = _MIRROR @ xo, _MIRROR @ xi
        y = mlp_forward(self.weights, self._inputs(xo, xi, alphas))
        return y @ _MIRROR if self.mirror else y

    def jacobians(self, xo, xi, alphas):
        """``(x_alpha_S (m,3), J_ao (m,3,3), J_ai (m,3,3))``."""
        if self.mirror:
            xo, xi = _MIRROR @ xo, _MIRROR @ xi
        J, y = mlp_input_jacobian(self.weights, self._inputs(xo, xi, alphas), return_output=True)
        Jo, Ji = J[:, :, 0:3], J[:, :, 3:6]
        if self.mirror:
            y = y @ _MIRROR
            Jo = _MIRROR @ Jo @ _MIRROR
            Ji = _MIRROR @ Ji @ _MIRROR
        return y, Jo, Ji


def surface_pose(cylinder: WrapCylinder, kin: Kinematics) -> Transform:
    if cylinder.body == WORLD:
        return cylinder.surf_transform
    return compose(kin.transforms[cylinder.body], cylinder.surf_transform)


def choose_epsilon(length_scale: float, speed: float) -> float:
    if speed <= 0.0:
        return EPS_MAX
    return float(np.clip(EPS_REL * length_scale / speed, EPS_MIN, EPS_MAX))


def typeIII_jacobians(cylinder: WrapCylinder, weights, origin: Anchor, insertion: Anchor,
                      layout: MassPointLayout, kin: Kinematics, with_dot: bool = True,
                      epsilon: float | None = None):
    """Returns ``(J_am (3m, 6n), Jdot_am, x_alpha_world (m, 3))``."""
    ev = weights if isinstance(weights, SurrogateEvaluator) else SurrogateEvaluator(cylinder, weights)
    nb = len(kin.transforms)
    m = len(layout)
    B = cylinder.body
    T_WS = surface_pose(cylinder, kin)
    R_WS = T_WS.rotation
    R_SW = R_WS.T
    R_BS = cylinder.surf_transform.rotation
    T_WB = Transform.identity() if B == WORLD else kin.transforms[B]
    R_WB = T_WB.rotation

    ends = []
    for a in (origin, insertion):
        if a.body == WORLD:
            xw, R, om = a.local_pos.copy(), np.eye(3), np.zeros(3)
            vw = np.zeros(3)
        else:
            T = kin.transforms[a.body]
            xw, R, om = T.apply(a.local_pos), T.rotation, kin.twists[a.body, :3]
            vw = R @ (cross(om, a.local_pos) + kin.twists[a.body, 3:])
        yB = T_WB.apply_inverse(xw)  # anchor in B coordinates
        if B == WORLD:
            v_rel = vw
        else:
            tw = kin.twists[B]
            v_rel = vw - R_WB @ (cross(tw[:3], yB) + tw[3:])
        ends.append((a, xw, R, om, yB, v_rel))

    xo_S = T_WS.apply_inverse(ends[0][1])
    xi_S = T_WS.apply_inverse(ends[1][1])
    xa_S, Jo, Ji = ev.jacobians(xo_S, xi_S, layout.alphas)
    x_world = T_WS.apply(xa_S)

    Jam = np.zeros((m, 3, 6 * nb))
    Jam_dot = np.zeros((m, 3, 6 * nb)) if with_dot else None
    y_base = cylinder.surf_transform.apply(xa_S)  # mass points in B coordinates
    if B != WORLD:
        cB = slice(6 * B, 6 * B + 6)
        Jam[:, :, cB] += _gamma_blocks(R_WB, y_base)

    if with_dot:
        omB = np.zeros(3) if B == WORLD else kin.twists[B, :3]
        Rdot_WB = R_WB @ cross_matrix(omB)
        Rdot_WS = Rdot_WB @ R_BS
        Rdot_SW = Rdot_WS.T
        vo_S = R_SW @ ends[0][5]
        vi_S = R_SW @ ends[1][5]
        xa_S_dot = Jo @ vo_S + Ji @ vi_S
        if epsilon is None:
            speed = max(np.linalg.norm(vo_S), np.linalg.norm(vi_S))
            epsilon = choose_epsilon(cylinder.radius, speed)
        _, Jo_p, Ji_p = ev.jacobians(xo_S + epsilon * vo_S, xi_S + epsilon * vi_S, layout.alphas)
        Jo_dot = (Jo_p - Jo) / epsilon
        Ji_dot = (Ji_p - Ji) / epsilon
        if B != WORLD:
            Jam_dot[:, :, cB] += _gamma_rate_blocks(R_WB, omB, y_base, xa_S_dot @ R_BS.T)

    for (a, xw, R, om, yB, v_rel), Jn, Jn_dot in (
        (ends[0], Jo, Jo_dot if with_dot else None),
        (ends[1], Ji, Ji_dot if with_dot else None),
    ):
        P = R_WS @ Jn @ R_SW  # (m, 3, 3), world-frame network Jacobian
        if with_dot:
            P_dot = Rdot_WS @ Jn @ R_SW + R_WS @ Jn_dot @ R_SW + R_WS @ Jn @ Rdot_SW
        if a.body != WORLD:
            cA = slice(6 * a.body, 6 * a.body + 6)
            G = _gamma_blocks(R, a.local_pos[None])[0]
            Jam[:, :, cA] += P @ G
            if with_dot:
                Gd = _gamma_rate_blocks(R, om, a.local_pos[None], np.zeros((1, 3)))[0]
                Jam_dot[:, :, cA] += P_dot @ G + P @ Gd
        if B != WORLD:
            GB = _gamma_blocks(R_WB, yB[None])[0]
            Jam[:, :, cB] -= P @ GB
            if with_dot:
                yB_dot = R_WB.T @ v_rel
                GBd = _gamma_rate_blocks(R_WB, omB, yB[None], yB_dot[None])[0]
                Jam_dot[:, :, cB] -= P_dot @ GB + P @ GBd

    Jam = Jam.reshape(3 * m, 6 * nb)
    if with_dot:
        Jam_dot = Jam_dot.reshape(3 * m, 6 * nb)
    return Jam, Jam_dot, x_world


def network_positions(cylinder: WrapCylinder, weights, origin: Anchor, insertion: Anchor,
                      alphas, kin: Kinematics) -> np.ndarray:
    """World positions of surrogate mass points (no Jacobians)."""
    ev = weights if isinstance(weights, SurrogateEvaluator) else SurrogateEvaluator(cylinder, weights)
    T_WS = surface_pose(cylinder, kin)
    xo = T_WS.apply_inverse(kin.point(origin.body, origin.local_pos))
    xi = T_WS.apply_inverse(kin.point(insertion.body, insertion.local_pos))
    return T_WS.apply(ev.positions(xo, xi, np.asarray(alphas, dtype=float)))


def surface_endpoints(cylinder: WrapCylinder, origin: Anchor, insertion: Anchor, kin: Kinematics):
    T_WS = surface_pose(cylinder, kin)
    xo = T_WS.apply_inverse(kin.point(origin.body, origin.local_pos))
    xi = T_WS.apply_inverse(kin.point(insertion.body, insertion.local_pos))
    return xo, xi, T_WS
