"""Impulse-stability probes: flick a body point and find the force at which a fixed-step run diverges.

The flick is a constant world-frame force applied for the first few steps.
After it ends the system is passive and dissipative, so a run counts as
diverged when a step fails (Newton, non-finite state) or when kinetic energy
climbs above ``growth`` times its peak during the flick.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Controls, DivergenceError, Model, NumericalError, Options, simulate
from .integrators import StepError
from .paths import Anchor, anchor_jacobians
from .skeleton import ReducedState


def impulse_controls(model: Model, point: Anchor, force, impulse_steps: int, dt: float):
    """Controls callback mapping a point force to joint torques ``J^T F`` while ``t < impulse_steps * dt``."""
    force = np.asarray(force, dtype=float).reshape(3)
    t_end = (impulse_steps - 0.5) * dt
    nb = model.skeleton.n

    def controls(t, state):
        if t >= t_end:
            return Controls()
        kin = model.skeleton.kinematics(state.q)
        _, Jx, _ = anchor_jacobians([point], kin, nb, with_dot=False)
        return Controls((Jx @ kin.J).T @ force)

    return controls


@dataclass
class FlickResult:
    force: float
    diverged: bool
    reason: str
    peak_kinetic: float  # after the flick


def flick(model: Model, state: ReducedState, point: Anchor, direction, magnitude: float, dt: float = 1e-3,
          duration: float = 0.3, integrator: str = "bdf1", options: Options | None = None,
          impulse_steps: int = 2, growth: float = 2.0) -> FlickResult:
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    ctl = impulse_controls(model, point, magnitude * d, impulse_steps, dt)
    steps = int(round(duration / dt))
    zero = np.zeros(len(model.muscles))
    try:
        rec = simulate(model, state, dt, steps, integrator, options, ctl, excitations=lambda t, s: zero)
    except (StepError, NumericalError, DivergenceError) as exc:
        return FlickResult(magnitude, True, str(exc), float("nan"))
    ke = np.asarray(rec.e_kin)
    during = float(np.max(ke[: impulse_steps + 1]))
    after = float(np.max(ke[impulse_steps + 1 :])) if steps > impulse_steps else 0.0
    if not np.isfinite(after) or after > growth * max(during, 1e-300):
        return FlickResult(magnitude, True, "kinetic energy growth after the flick", after)
    return FlickResult(magnitude, False, "", after)


def divergence_threshold(model: Model, state: ReducedState, point: Anchor, direction, forces, **kw):
    """Smallest force in the increasing grid ``forces`` whose flick diverges (``inf`` if none).

    Returns ``(threshold, results)``.
    """
    results = []
    for f in forces:
        r = flick(model, state, point, direction, float(f), **kw)
        results.append(r)
        if r.diverged:
            return float(f), results
    return float("inf"), results
