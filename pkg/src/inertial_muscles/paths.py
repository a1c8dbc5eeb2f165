"""Straight-line and polyline musculotendon kinematics.

Mass points sit at fixed material fractions ``alpha`` of the path. For
polylines, nodes carry a world position ``x`` and a material coordinate ``s``;
under the equal-strain assumption ``s`` is an explicit function of the node
positions, which makes ``ds/dx`` and its rate available in closed form.

Jacobians returned here map stacked body twists (``6n``) to stacked world
velocities of the mass points (``3m``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .skeleton import WORLD, Kinematics
from .spatial import cross_matrix


class DegeneratePathError(ValueError):
    """Two consecutive path nodes coincide."""


@dataclass(frozen=True)
class Anchor:
    """Body-fixed point; ``local_pos`` is in the body (COM) frame."""

    body: int
    local_pos: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "local_pos", np.asarray(self.local_pos, dtype=float).reshape(3))


@dataclass
class MassPointLayout:
    alphas: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        self.alphas = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        self.masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if self.alphas.shape != self.masses.shape or self.alphas.ndim != 1:
            raise ValueError("alphas and masses must be 1-D arrays of equal length")
        if len(self.alphas) == 0:
            raise ValueError("layout needs at least one mass point")
        if np.any(self.alphas <= 0.0) or np.any(self.alphas >= 1.0):
            raise ValueError("alphas must lie in (0, 1)")
        if np.any(np.diff(self.alphas) <= 0.0):
            raise ValueError("alphas must be strictly increasing")
        if np.any(self.masses < 0.0):
            raise ValueError("masses must be non-negative")

    @classmethod
    def uniform(cls, count: int, total_mass: float, lo: float = 0.0, hi: float = 1.0):
        """``count`` equally spaced points (cell midpoints) over ``[lo, hi]``."""
        alphas = lo + (np.arange(count) + 0.5) * (hi - lo) / count
        return cls(alphas, np.full(count, total_mass / count))

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def __len__(self):
        return len(self.alphas)


@dataclass
class PolylinePath:
    """Origin, ordered via points and insertion with fixed material extent."""

    origin: Anchor
    via_points: list[Anchor]
    insertion: Anchor
    s_ori: float = 0.0
    s_total: float = 1.0

    @property
    def nodes(self) -> list[Anchor]:
        return [self.origin, *self.via_points, self.insertion]

    def calibrate(self, kin: Kinematics) -> PolylinePath:
        """Set the material extent to the current world length (uniform unit strain)."""
        X, _, _ = anchor_jacobians(self.nodes, kin, len(kin.transforms), with_dot=False)
        self.s_total = float(np.linalg.norm(np.diff(X, axis=0), axis=1).sum())
        return self

    def s_coords(self, kin: Kinematics) -> np.ndarray:
        X, _, _ = anchor_jacobians(self.nodes, kin, len(kin.transforms), with_dot=False)
        return eol_update_s(self.s_ori, self.s_total, X)


def anchor_jacobians(anchors, kin: Kinematics, nbodies: int, with_dot: bool = True):
    """World positions (N,3), ``J_xm`` (3N,6n) and its rate for body-fixed anchors."""
    N = len(anchors)
    X = np.empty((N, 3))
    J = np.zeros((3 * N, 6 * nbodies))
    Jd = np.zeros((3 * N, 6 * nbodies)) if with_dot else None
    for k, a in enumerate(anchors):
        if a.body == WORLD:
            X[k] = a.local_pos
            continue
        T = kin.transforms[a.body]
        X[k] = T.apply(a.local_pos)
        R = T.rotation
        cols = slice(6 * a.body, 6 * a.body + 6)
        RG = np.empty((3, 6))
        RG[:, :3] = R @ cross_matrix(a.local_pos).T
        RG[:, 3:] = R
        J[3 * k : 3 * k + 3, cols] = RG
        if with_dot:
            Jd[3 * k : 3 * k + 3, cols] = R @ cross_matrix(kin.twists[a.body, :3]) @ np.hstack(
                [cross_matrix(a.local_pos).T, np.eye(3)]
            )
    return X, J, Jd


def _interp_matrix(alphas) -> np.ndarray:
    m = len(alphas)
    Jax = np.zeros((3 * m, 6))
    for i, a in enumerate(alphas):
        Jax[3 * i : 3 * i + 3, :3] = (1.0 - a) * np.eye(3)
        Jax[3 * i : 3 * i + 3, 3:] = a * np.eye(3)
    return Jax


def typeI_jacobians(origin: Anchor, insertion: Anchor, layout: MassPointLayout, kin: Kinematics,
                    with_dot: bool = True):
    """Straight-line muscle: returns ``(J_am, Jdot_am, x_alpha)``."""
    X, Jxm, Jxm_dot = anchor_jacobians([origin, insertion], kin, len(kin.transforms), with_dot)
    a = layout.alphas[:, None]
    x_alpha = (1.0 - a) * X[0] + a * X[1]
    Jax = _interp_matrix(layout.alphas)
    return Jax @ Jxm, (Jax @ Jxm_dot if with_dot else None), x_alpha


# -- equal-strain material coordinates ---------------------------------------


def _segments(X):
    D = np.diff(X, axis=0)
    lengths = np.linalg.norm(D, axis=1)
    if np.any(lengths == 0.0):
        k = int(np.argmin(lengths))
        raise DegeneratePathError(f"path nodes {k} and {k + 1} coincide")
    return D, lengths


def eol_update_s(s_ori: float, s_total: float, X) -> np.ndarray:
    """Material coordinates of the nodes: ``ds_k = S_tot * l_k / L_tot``."""
    _, lengths = _segments(np.asarray(X, dtype=float))
    c = np.concatenate([[0.0], np.cumsum(lengths)])
    s = s_ori + s_total * c / c[-1]
    s[-1] = s_ori + s_total
    return s


def eol_jacobian_sx(s_total: float, X, Xdot=None):
    """``ds/dx`` (N, 3N) of :func:`eol_update_s` and, given ``Xdot``, its time rate.

    Rows for the end nodes vanish identically: material cannot flow past them.
    """
    X = np.asarray(X, dtype=float)
    N = len(X)
    D, lengths = _segments(X)
    U = D / lengths[:, None]
    G = np.zeros((N - 1, 3 * N))  # d l_j / dx
    for j in range(N - 1):
        G[j, 3 * j : 3 * j + 3] = -U[j]
        G[j, 3 * j + 3 : 3 * j + 6] = U[j]
    c = np.cumsum(lengths)  # c_k for k = 1..N-1
    C = np.cumsum(G, axis=0)
    L, Gt = c[-1], C[-1]
    Jsx = np.zeros((N, 3 * N))
    Jsx[1:-1] = s_total * (C[:-1] / L - np.outer(c[:-1], Gt) / L**2)
    if Xdot is None:
        return Jsx, None

    Xdot = np.asarray(Xdot, dtype=float).reshape(N, 3)
    Ddot = np.diff(Xdot, axis=0)
    ldot = np.einsum("ij,ij->i", U, Ddot)
    Udot = (Ddot - U * ldot[:, None]) / lengths[:, None]
    Gdot = np.zeros_like(G)
    for j in range(N - 1):
        Gdot[j, 3 * j : 3 * j + 3] = -Udot[j]
        Gdot[j, 3 * j + 3 : 3 * j + 6] = Udot[j]
    cdot = np.cumsum(ldot)
    Cdot = np.cumsum(Gdot, axis=0)
    Ldot, Gtdot = cdot[-1], Cdot[-1]
    ci, Ci, cdi, Cdi = c[:-1], C[:-1], cdot[:-1], Cdot[:-1]
    Jsx_dot = np.zeros_like(Jsx)
    Jsx_dot[1:-1] = s_total * (
        Cdi / L
        - Ci * Ldot / L**2
        - np.outer(cdi, Gt) / L**2
        - np.outer(ci, Gtdot) / L**2
        + 2.0 * np.outer(ci, Gt) * Ldot / L**3
    )
    return Jsx, Jsx_dot


def locate(s_nodes, s_alpha):
    """Index ``k`` of the segment ``[s_{k-1}, s_k)`` holding ``s_alpha`` (scalar or array).

    A point exactly on an interior node belongs to the following segment.
    """
    k = np.clip(np.searchsorted(s_nodes, s_alpha, side="right"), 1, len(s_nodes) - 1)
    return int(k) if np.ndim(k) == 0 else k


def typeII_jacobians(path: PolylinePath, layout: MassPointLayout, kin: Kinematics,
                     with_dot: bool = True):
    """Polyline muscle through path points: returns ``(J_am, Jdot_am, x_alpha)``."""
    nodes = path.nodes
    N = len(nodes)
    nb = len(kin.transforms)
    X, Jxm, Jxm_dot = anchor_jacobians(nodes, kin, nb, with_dot)
    phi = kin.twists.reshape(-1)
    Xdot = (Jxm @ phi).reshape(N, 3) if with_dot else None
    s = eol_update_s(path.s_ori, path.s_total, X)
    Jsx, Jsx_dot = eol_jacobian_sx(path.s_total, X, Xdot)

    Jzm = np.vstack([Jxm, Jsx @ Jxm])
    if with_dot:
        Jzm_dot = np.vstack([Jxm_dot, Jsx_dot @ Jxm + Jsx @ Jxm_dot])
        sdot = Jsx @ Xdot.reshape(-1)

    sa = path.s_ori + layout.alphas * path.s_total
    k = locate(s, sa)
    ds = s[k] - s[k - 1]
    beta = (sa - s[k - 1]) / ds
    F = (X[k] - X[k - 1]) / ds[:, None]
    x_alpha = (1.0 - beta)[:, None] * X[k - 1] + beta[:, None] * X[k]

    ncol = Jxm.shape[1]
    JxN = Jxm.reshape(N, 3, ncol)
    JsN = Jzm[3 * N :]
    b0 = (1.0 - beta)[:, None, None]
    b1 = beta[:, None, None]

    def combine(Jx_nodes, Js_nodes):
        return (
            b0 * Jx_nodes[k - 1]
            + b1 * Jx_nodes[k]
            - b0 * F[:, :, None] * Js_nodes[k - 1][:, None, :]
            - b1 * F[:, :, None] * Js_nodes[k][:, None, :]
        )

    Jam = combine(JxN, JsN).reshape(-1, ncol)
    if not with_dot:
        return Jam, None, x_alpha

    bdot = -((1.0 - beta) * sdot[k - 1] + beta * sdot[k]) / ds
    Fdot = (Xdot[k] - Xdot[k - 1]) / ds[:, None] - F * ((sdot[k] - sdot[k - 1]) / ds)[:, None]
    bd = bdot[:, None, None]
    rate_part = (
        bd * (JxN[k] - JxN[k - 1])
        + (bd * F[:, :, None] - b0 * Fdot[:, :, None]) * JsN[k - 1][:, None, :]
        - (bd * F[:, :, None] + b1 * Fdot[:, :, None]) * JsN[k][:, None, :]
    )
    Jam_dot = (rate_part + combine(Jzm_dot[: 3 * N].reshape(N, 3, ncol), Jzm_dot[3 * N :])).reshape(-1, ncol)
    return Jam, Jam_dot, x_alpha


def polyline_length(X) -> float:
    return float(np.linalg.norm(np.diff(X, axis=0), axis=1).sum())


def polyline_length_gradient(X) -> np.ndarray:
    """``dL/dX`` flattened (3N,) for a polyline through nodes ``X``."""
    D, lengths = _segments(np.asarray(X, dtype=float))
    U = D / lengths[:, None]
    g = np.zeros(X.shape)
    g[1:] += U
    g[:-1] -= U
    return g.reshape(-1)
