"""Fixed-step classical Runge-Kutta solver used as a reference integrator.

The continuous-time comparisons in this package need trajectory values at
exact, externally imposed times with errors far below the quantities being
measured.  A fixed-step RK4 that subdivides each requested output interval
uniformly does this predictably, and a built-in step-halving check verifies
the accuracy claim on every solve instead of assuming it.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import ReferenceSolveError

Field = Callable[[float, np.ndarray], np.ndarray]


def rk4_fixed(field: Field, y0: np.ndarray, times: np.ndarray, steps_per_unit: float) -> np.ndarray:
    """Integrate y' = field(t, y) through the given times with fixed RK4 steps.

    Each interval [t_i, t_{i+1}] is subdivided into ceil(dt * steps_per_unit)
    equal steps, so every output time is hit exactly.  Returns an array of
    shape (len(times), len(y0)); row 0 is y0 itself (times[0] is the initial
    time).
    """
    times = np.asarray(times, dtype=float)
    y = np.asarray(y0, dtype=float).copy()
    out = np.empty((len(times), y.size))
    out[0] = y
    for i in range(len(times) - 1):
        t, t_next = times[i], times[i + 1]
        dt = t_next - t
        if dt < 0.0:
            raise ValueError("times must be nondecreasing")
        if dt == 0.0:
            out[i + 1] = y
            continue
        nsub = max(1, math.ceil(dt * steps_per_unit))
        h = dt / nsub
        for j in range(nsub):
            tj = t + j * h
            k1 = field(tj, y)
            k2 = field(tj + 0.5 * h, y + 0.5 * h * k1)
            k3 = field(tj + 0.5 * h, y + 0.5 * h * k2)
            k4 = field(tj + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y
    return out


def rk4_checked(
    field: Field,
    y0: np.ndarray,
    times: np.ndarray,
    steps_per_unit: float = 4096.0,
    check_tol: float = 1e-10,
) -> np.ndarray:
    """RK4 solve with a step-halving accuracy check.

    Solves at the requested resolution and at double resolution; if the two
    solutions differ by more than ``check_tol`` at any output time the solve
    is not trusted and :class:`ReferenceSolveError` is raised.  Returns the
    finer solution.
    """
    coarse = rk4_fixed(field, y0, times, steps_per_unit)
    fine = rk4_fixed(field, y0, times, 2.0 * steps_per_unit)
    gap = float(np.max(np.linalg.norm(coarse - fine, axis=1))) if len(times) else 0.0
    if not np.isfinite(gap) or gap > check_tol:
        raise ReferenceSolveError(
            f"step-halving check failed: max gap {gap:.3e} > {check_tol:.3e} "
            f"at steps_per_unit={steps_per_unit}"
        )
    return fine
