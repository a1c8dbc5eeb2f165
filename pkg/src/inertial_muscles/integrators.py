"""Time steppers for second-order systems ``q' = v``, ``v' = a(q, v)``.

Configurations advance through a ``retract(q, dq)`` map so that rotational
joints can step on the rotation group. Implicit stages are solved for the
stage velocity with Newton's method on a central-difference Jacobian; the
Jacobian is reused across iterations (and, through a :class:`NewtonCache`,
across stages and steps) and refreshed when convergence stalls. Reuse only
changes the convergence rate, never the converged solution.
"""

from __future__ import annotations

import numpy as np

SDIRK2_GAMMA = 1.0 - np.sqrt(2.0) / 2.0
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
INTEGRATORS = ("forward_euler", "bdf1", "sdirk2")
ALIASES = {"fe": "forward_euler", "euler": "forward_euler", "be": "bdf1"}


class StepError(RuntimeError):
    """Newton failed to converge within the iteration budget."""

    def __init__(self, message, residual_norm=float("nan")):
        super().__init__(f"{message} (residual norm {residual_norm:.3e})")
        self.residual_norm = residual_norm


def canonical(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in INTEGRATORS:
        raise ValueError(f"unknown integrator {name!r}; choose from {INTEGRATORS}")
    return name


def _add(q, dq):
    return q + dq


def fd_jacobian(fun, x, f0=None, rel_step: float = 1e-6):
    """Central-difference Jacobian of ``fun`` at ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(len(x)):
        h = rel_step * max(1.0, abs(x[k]))
        e = np.zeros_like(x)
        e[k] = h
        cols.append((fun(x + e) - fun(x - e)) / (2.0 * h))
    return np.column_stack(cols) if cols else np.zeros((0 if f0 is None else len(f0), 0))


class NewtonCache:
    """Newton matrix carried between stage solves that share the same ``hg``."""

    def __init__(self):
        self.J = None
        self.hg = None
        self.refreshes = 0

    def lookup(self, hg):
        return self.J if self.hg == hg else None

    def store(self, J, hg):
        self.J, self.hg = J, hg
        self.refreshes += 1


def solve_stage(q0, v0, dq_explicit, dv_explicit, hg, accel, retract=_add, guess=None,
                tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER, cache: NewtonCache | None = None):
    """Solve ``V = v0 + dv_explicit + hg * a(Q(V), V)``, ``Q(V) = retract(q0, dq_explicit + hg V)``.

    Converged when the residual's max-norm is below ``tol * max(1, |V|_inf)``.
    Returns ``(V, Q, a(Q, V), iterations)``.
    """

    def state(V):
        return retract(q0, dq_explicit + hg * V)

    def residual(V):
        return V - v0 - dv_explicit - hg * accel(state(V), V)

    V = np.array(v0 + dv_explicit if guess is None else guess, dtype=float)
    R = residual(V)
    norm = float(np.max(np.abs(R))) if R.size else 0.0
    J = cache.lookup(hg) if cache is not None else None
    borrowed = J is not None
    stale = 0
    it = 0

    def scale():
        return max(1.0, float(np.max(np.abs(V)))) if V.size else 1.0

    while norm > tol * scale():
        if it >= max_iter or not np.isfinite(norm):
            raise StepError("Newton iteration did not converge", norm)
        if J is None or stale >= (1 if borrowed else 3):
            J = fd_jacobian(residual, V, R)
            stale = 0
            borrowed = False
            if cache is not None:
                cache.store(J, hg)
        try:
            dV = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError as exc:
            raise StepError("singular Newton matrix", norm) from exc
        V = V + dV
        R_new = residual(V)
        new_norm = float(np.max(np.abs(R_new)))
        stale = stale + 1 if new_norm > 0.25 * norm else stale
        if new_norm > norm:
            J = None  # diverging with a stale matrix: refresh
        R, norm = R_new, new_norm
        it += 1
    Q = state(V)
    return V, Q, accel(Q, V), it


def step_forward_euler(q, v, h, accel, retract=_add):
    a = accel(q, v)
    return retract(q, h * v), v + h * a


def step_bdf1(q, v, h, accel, retract=_add, **newton):
    guess = v + h * accel(q, v)  # explicit predictor
    V, Q, _, _ = solve_stage(q, v, 0.0 * v, 0.0 * v, h, accel, retract, guess, **newton)
    return Q, V


def step_sdirk2(q, v, h, accel, retract=_add, **newton):
    """Two-stage, stiffly accurate, L-stable SDIRK of order 2."""
    g = SDIRK2_GAMMA
    a0 = accel(q, v)
    V1, _, A1, _ = solve_stage(q, v, 0.0 * v, 0.0 * v, h * g, accel, retract, v + g * h * a0, **newton)
    dq = h * (1.0 - g) * V1
    dv = h * (1.0 - g) * A1
    V2, Q2, _, _ = solve_stage(q, v, dq, dv, h * g, accel, retract, v + dv + g * h * A1, **newton)
    return Q2, V2


def step(q, v, h, accel, integrator: str = "sdirk2", retract=_add, **newton):
    """Advance ``(q, v)`` by ``h``; ``newton`` is forwarded to :func:`solve_stage`."""
    if not h > 0.0:
        raise ValueError("time step must be positive")
    name = canonical(integrator)
    if name == "forward_euler":
        return step_forward_euler(q, v, h, accel, retract)
    if name == "bdf1":
        return step_bdf1(q, v, h, accel, retract, **newton)
    return step_sdirk2(q, v, h, accel, retract, **newton)
