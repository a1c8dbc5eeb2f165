"""Musculotendon units: path type, mass points, path length and its gradient."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hill import MusculotendonActuator
from .paths import (
    Anchor,
    MassPointLayout,
    PolylinePath,
    anchor_jacobians,
    polyline_length_gradient,
    typeI_jacobians,
    typeII_jacobians,
)
from .skeleton import Kinematics
from .wrap.cylinder import WrapCylinder
from .wrap.surrogate import SurrogateEvaluator, typeIII_jacobians

PATH_TYPES = ("I", "II", "III")
LENGTH_GRID = 32  # segments of the surrogate polyline used for Type III length


@dataclass
class Musculotendon:
    name: str
    kind: str
    origin: Anchor
    insertion: Anchor
    layout: MassPointLayout
    via_points: list[Anchor] = field(default_factory=list)
    cylinder: WrapCylinder | None = None
    weights: object | None = None  # MLPWeights
    actuator: MusculotendonActuator | None = None
    lump_to_origin: float = 0.5

    def __post_init__(self):
        if self.kind not in PATH_TYPES:
            raise ValueError(f"muscle {self.name!r}: unknown path type {self.kind!r}")
        if self.kind == "III":
            if self.cylinder is None or self.weights is None:
                raise ValueError(f"muscle {self.name!r}: Type III needs a cylinder and weights")
            self._surrogate = SurrogateEvaluator(self.cylinder, self.weights)
            self._length_layout = MassPointLayout(
                np.arange(1, LENGTH_GRID) / LENGTH_GRID, np.zeros(LENGTH_GRID - 1)
            )
        if self.kind == "II" and not self.via_points:
            raise ValueError(f"muscle {self.name!r}: Type II needs at least one via point")
        if not 0.0 <= self.lump_to_origin <= 1.0:
            raise ValueError("lump_to_origin must lie in [0, 1]")
        self.path = PolylinePath(self.origin, list(self.via_points), self.insertion)

    def calibrate(self, kin: Kinematics) -> None:
        """Fix the material extent of a polyline at the current (rest) pose."""
        if self.kind == "II":
            self.path.calibrate(kin)

    @property
    def mass(self) -> float:
        return self.layout.total_mass

    def mass_points(self, kin: Kinematics, with_dot: bool = True, layout: MassPointLayout | None = None):
        """``(J_am, Jdot_am, x_alpha)`` for this muscle's mass points."""
        layout = layout or self.layout
        if self.kind == "I":
            return typeI_jacobians(self.origin, self.insertion, layout, kin, with_dot)
        if self.kind == "II":
            return typeII_jacobians(self.path, layout, kin, with_dot)
        return typeIII_jacobians(self.cylinder, self._surrogate, self.origin, self.insertion,
                                 layout, kin, with_dot)

    def length_and_gradient(self, kin: Kinematics):
        """Path length and ``d length / d phi`` (row over stacked body twists)."""
        nb = len(kin.transforms)
        if self.kind in ("I", "II"):
            X, Jxm, _ = anchor_jacobians(self.path.nodes, kin, nb, with_dot=False)
            g = polyline_length_gradient(X)
            return float(np.linalg.norm(np.diff(X, axis=0), axis=1).sum()), g @ Jxm
        Jin, _, xin = typeIII_jacobians(self.cylinder, self._surrogate, self.origin, self.insertion,
                                        self._length_layout, kin, with_dot=False)
        Xe, Jxe, _ = anchor_jacobians([self.origin, self.insertion], kin, nb, with_dot=False)
        X = np.vstack([Xe[0], xin, Xe[1]])
        Jx = np.vstack([Jxe[:3], Jin, Jxe[3:]])
        g = polyline_length_gradient(X)
        return float(np.linalg.norm(np.diff(X, axis=0), axis=1).sum()), g @ Jx

    def length(self, kin: Kinematics) -> float:
        return self.length_and_gradient(kin)[0]

    def lumped_points(self, fraction_removed_mass: float):
        """Rigid point masses carrying the mass not modeled along the path."""
        m = fraction_removed_mass
        out = []
        if m > 0.0:
            if self.lump_to_origin > 0.0:
                out.append((self.origin, m * self.lump_to_origin))
            if self.lump_to_origin < 1.0:
                out.append((self.insertion, m * (1.0 - self.lump_to_origin)))
        return out
