"""Hill-type actuation with simple analytic curves and a rigid tendon.

Curves (normalized fiber length ``lt``, normalized lengthening velocity ``vt``):

* active force-length: Gaussian bell ``exp(-(lt-1)^2 / 0.45^2)``
* force-velocity: ``0.7 * (1 + tanh(3 vt + atanh(3/7)))`` -- 0 when shortening fast,
  1 when isometric, saturating at 1.4 when lengthening
* passive force-length: ``(exp(5(lt-1)) - 1) / (exp(2.5) - 1)`` for ``lt > 1``, so 1 at ``lt = 1.5``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FV_MAX = 1.4
_FV_SHIFT = np.arctanh(1.0 / 0.7 - 1.0)
_FV_SLOPE = 3.0
_FP_NORM = np.expm1(2.5)


@dataclass
class MusculotendonActuator:
    max_isometric_force: float
    optimal_fiber_length: float
    tendon_slack_length: float
    activation: float = 0.0
    activation_time_constant: float = 0.01
    deactivation_time_constant: float = 0.04
    damping: float = 0.1
    max_contraction_velocity: float = 10.0  # optimal fiber lengths per second

    def __post_init__(self):
        for name in ("max_isometric_force", "optimal_fiber_length", "activation_time_constant",
                     "deactivation_time_constant", "max_contraction_velocity"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.tendon_slack_length < 0.0 or self.damping < 0.0:
            raise ValueError("tendon_slack_length and damping must be non-negative")
        if not 0.0 <= self.activation <= 1.0:
            raise ValueError("activation must lie in [0, 1]")


def active_force_length(lt):
    return np.exp(-((np.asarray(lt) - 1.0) ** 2) / 0.45**2)


def force_velocity(vt):
    return 0.5 * FV_MAX * (1.0 + np.tanh(_FV_SLOPE * np.asarray(vt) + _FV_SHIFT))


def passive_force_length(lt):
    return np.maximum(0.0, np.expm1(5.0 * (np.asarray(lt) - 1.0))) / _FP_NORM


def activation_step(activation: float, excitation: float, dt: float,
                    tau_act: float, tau_deact: float) -> float:
    """Exact first-order relaxation toward the excitation over ``dt``."""
    u = min(1.0, max(0.0, excitation))
    tau = tau_act if u > activation else tau_deact
    a = u + (activation - u) * np.exp(-dt / tau)
    return float(min(1.0, max(0.0, a)))


def hill_force(actuator: MusculotendonActuator, path_length: float, lengthening_rate: float,
               excitation: float, dt: float, activation: float | None = None):
    """Advance activation over ``dt`` and return ``(tension, new_activation)``."""
    if not path_length > 0.0:
        raise ValueError("path length must be positive")
    a0 = actuator.activation if activation is None else activation
    a = activation_step(a0, excitation, dt, actuator.activation_time_constant,
                        actuator.deactivation_time_constant)
    lopt = actuator.optimal_fiber_length
    lt = (path_length - actuator.tendon_slack_length) / lopt
    vt = lengthening_rate / (actuator.max_contraction_velocity * lopt)
    f = a * active_force_length(lt) * force_velocity(vt) + passive_force_length(lt) + actuator.damping * vt
    return max(0.0, float(actuator.max_isometric_force * f)), a
