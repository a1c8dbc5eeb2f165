"""Musculoskeletal dynamics with inertial muscles.

Muscle mass is carried by points distributed along each musculotendon path
and mapped to joint coordinates through a chain of Jacobians.
"""

from .dynamics import (
    Controls,
    DivergenceError,
    Energy,
    Model,
    NumericalError,
    Options,
    SystemMatrices,
    TrajectoryRecord,
    accelerations,
    assemble,
    energy,
    inverse_dynamics,
    lumped_model,
    muscle_lengths,
    potential_energy,
    simulate,
    step,
)
from .hill import MusculotendonActuator, hill_force
from .integrators import StepError
from .muscles import Musculotendon
from .paths import Anchor, DegeneratePathError, MassPointLayout, PolylinePath
from .skeleton import WORLD, Body, ConfigurationError, Joint, ReducedState, Skeleton
from .spatial import Transform

__version__ = "0.1.0"

__all__ = [
    "WORLD",
    "Anchor",
    "Body",
    "ConfigurationError",
    "Controls",
    "DegeneratePathError",
    "DivergenceError",
    "Energy",
    "Joint",
    "MassPointLayout",
    "Model",
    "Musculotendon",
    "MusculotendonActuator",
    "NumericalError",
    "Options",
    "PolylinePath",
    "ReducedState",
    "Skeleton",
    "StepError",
    "SystemMatrices",
    "TrajectoryRecord",
    "Transform",
    "accelerations",
    "assemble",
    "energy",
    "hill_force",
    "inverse_dynamics",
    "lumped_model",
    "muscle_lengths",
    "potential_energy",
    "simulate",
    "step",
]
