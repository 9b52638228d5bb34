"""Reduced model of the flow on an ellipse (n = 2, single quadric constraint).

On the level set -a x1^2 - b x2^2 = -1 the flow admits exact coordinates: an
angle phi parameterizing the ellipse through

    x(phi) = [cos(phi)/sqrt(a), sin(phi)/sqrt(b)]

and the tangential speed p = v . t(phi).  With mu(phi) = a cos^2 + b sin^2,
the unit tangent/normal at x(phi) are

    t(phi) = mu^{-1/2} [-sqrt(b) sin(phi),  sqrt(a) cos(phi)]
    n(phi) = mu^{-1/2} [ sqrt(a) cos(phi),  sqrt(b) sin(phi)]

and the reduced system closes in (phi, p) for a fixed total speed c = ||v||:

    dphi/dt = sqrt(a b) mu^{-1/2} p
    dp/dt   = (1/2) sqrt(a b) (a - b) mu^{-3/2} sin(2 phi) (c^2 - p^2).

The quantity kappa = (c^2 - p^2) / mu(phi) is a first integral.  Since
p^2 = c^2 - kappa mu(phi), the phase portrait splits into rotations (p never
vanishes; the trajectory sweeps the whole ellipse), librations (p vanishes at
turning angles; the trajectory folds back between them), and the separatrix:

    rotation    kappa * max(a, b) <  c^2
    libration   kappa * max(a, b) >  c^2
    separatrix  kappa * max(a, b) == c^2.

At a turning angle p = 0, so sin^2(phi*) = (c^2 / kappa - a) / (b - a).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, OffLevelSetError
from .integrator import PhaseState
from .rk4 import rk4_checked

#: Relative tolerance used to call a configuration a separatrix.
SEPARATRIX_RTOL = 1e-12


@dataclass(frozen=True)
class ReducedState:
    """Angle, tangential speed, and total speed on the reduced ellipse."""

    phi: float
    p: float
    speed: float

    def __post_init__(self):
        if abs(self.p) > self.speed * (1.0 + 1e-12):
            raise ValueError(
                f"|p| = {abs(self.p)} exceeds the total speed {self.speed}"
            )


@dataclass(frozen=True)
class EllipseModel:
    """The level set -a x1^2 - b x2^2 = -1 with its reduced dynamics."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0):
            raise ValueError(f"need a, b > 0, got a={self.a}, b={self.b}")

    def mu(self, phi: float | np.ndarray) -> float | np.ndarray:
        """mu(phi) = a cos^2(phi) + b sin^2(phi)."""
        return self.a * np.cos(phi) ** 2 + self.b * np.sin(phi) ** 2

    def position(self, phi: float) -> np.ndarray:
        return np.array([np.cos(phi) / np.sqrt(self.a), np.sin(phi) / np.sqrt(self.b)])

    def unit_tangent(self, phi: float) -> np.ndarray:
        mu = self.mu(phi)
        return np.array(
            [-np.sqrt(self.b) * np.sin(phi), np.sqrt(self.a) * np.cos(phi)]
        ) / np.sqrt(mu)

    def unit_normal(self, phi: float) -> np.ndarray:
        mu = self.mu(phi)
        return np.array(
            [np.sqrt(self.a) * np.cos(phi), np.sqrt(self.b) * np.sin(phi)]
        ) / np.sqrt(mu)

    def angle_of(self, x: np.ndarray) -> float:
        """Angle phi of a point (uses only the direction, not the level)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (2,):
            raise DimensionError(f"expected a 2-vector, got shape {x.shape}")
        return float(np.arctan2(np.sqrt(self.b) * x[1], np.sqrt(self.a) * x[0]))

    def kappa(self, state: ReducedState) -> float:
        """First integral (c^2 - p^2) / mu(phi)."""
        return (state.speed**2 - state.p**2) / float(self.mu(state.phi))


def to_reduced(
    model: EllipseModel, state: PhaseState, tol: float = 1e-10
) -> tuple[ReducedState, float]:
    """Map a Cartesian (x, v) on the level set to reduced coordinates.

    Returns the reduced state and the signed normal speed v . n(phi), which
    the reduced system itself only tracks through its square.

    Raises
    ------
    OffLevelSetError
        If -a x1^2 - b x2^2 differs from -1 by more than ``tol``.
    """
    x, v = state.x, state.v
    if x.shape != (2,):
        raise DimensionError(f"the reduced model is two-dimensional, got shape {x.shape}")
    residual = abs(model.a * x[0] ** 2 + model.b * x[1] ** 2 - 1.0)
    if residual > tol:
        raise OffLevelSetError(x, residual, tol)
    phi = model.angle_of(x)
    p = float(v @ model.unit_tangent(phi))
    normal_speed = float(v @ model.unit_normal(phi))
    return ReducedState(phi=phi, p=p, speed=float(np.linalg.norm(v))), normal_speed


def from_reduced(
    model: EllipseModel, state: ReducedState, normal_sign: float = 1.0
) -> PhaseState:
    """Map reduced coordinates back to a Cartesian (x, v).

    The reduced model only tracks the square of the normal speed;
    ``normal_sign`` selects the branch for the normal velocity component.
    """
    q = np.sqrt(max(state.speed**2 - state.p**2, 0.0))
    x = model.position(state.phi)
    v = state.p * model.unit_tangent(state.phi) + normal_sign * q * model.unit_normal(state.phi)
    return PhaseState(x, v)


def tangential_speed(model: EllipseModel, x: np.ndarray, v: np.ndarray) -> float:
    """v . t(phi) where phi is the angle of x; tolerant of points slightly off
    the level set (e.g. discrete iterates)."""
    phi = model.angle_of(x)
    return float(np.asarray(v, float) @ model.unit_tangent(phi))


def reduced_field(model: EllipseModel, speed: float):
    """Return field(t, y) for the reduced system, y = (phi, p)."""
    root_ab = np.sqrt(model.a * model.b)
    c2 = speed**2

    def field(t: float, y: np.ndarray) -> np.ndarray:
        phi, p = y
        mu = float(model.mu(phi))
        dphi = root_ab * p / np.sqrt(mu)
        dp = 0.5 * root_ab * (model.a - model.b) * np.sin(2.0 * phi) * (c2 - p**2) / mu**1.5
        return np.array([dphi, dp])

    return field


def reduced_derivative(model: EllipseModel, state: ReducedState) -> tuple[float, float]:
    """(dphi/dt, dp/dt) at a reduced state; the strip |p| <= c is enforced by
    :class:`ReducedState` itself."""
    dphi, dp = reduced_field(model, state.speed)(0.0, np.array([state.phi, state.p]))
    return float(dphi), float(dp)


def reduced_solve(
    model: EllipseModel,
    initial: ReducedState,
    times: np.ndarray,
    steps_per_unit: float = 4096.0,
    check_tol: float = 1e-10,
) -> np.ndarray:
    """Integrate the reduced system through the given times.

    Returns an array of shape (len(times), 2) with columns (phi, p).
    """
    y0 = np.array([initial.phi, initial.p])
    return rk4_checked(reduced_field(model, initial.speed), y0, np.asarray(times, float),
                       steps_per_unit, check_tol)


@dataclass(frozen=True)
class Classification:
    """Phase-portrait classification of one reduced initial condition."""

    kind: str  # "rotation", "libration", or "separatrix"
    kappa: float
    #: (phi_min, phi_max) bracketing the enclosed center for librations;
    #: None otherwise.
    turning_points: tuple[float, float] | None


def classify(model: EllipseModel, state: ReducedState, rtol: float = SEPARATRIX_RTOL) -> Classification:
    """Classify the trajectory through ``state`` using the first integral.

    Compares kappa * max(a, b) (the largest value c^2 - p^2 can reach) with
    c^2.  Strictly smaller means p never vanishes (rotation); strictly larger
    means turning angles exist (libration); equality within ``rtol`` is the
    separatrix.  Works for either ordering of a and b: swapping the two
    coordinate axes maps the model with a > b onto one with a < b, and the
    criterion only involves the swap-invariant quantity max(a, b).
    """
    kappa = model.kappa(state)
    c2 = state.speed**2
    peak = kappa * max(model.a, model.b)
    if abs(peak - c2) <= rtol * c2:
        return Classification(kind="separatrix", kappa=kappa, turning_points=None)
    if peak < c2:
        return Classification(kind="rotation", kappa=kappa, turning_points=None)
    return Classification(
        kind="libration", kappa=kappa, turning_points=libration_turning_points(model, state)
    )


def libration_turning_points(model: EllipseModel, state: ReducedState) -> tuple[float, float]:
    """Angles (phi_min, phi_max) where p vanishes, bracketing the enclosed center.

    At a turning point c^2 - p^2 = kappa * mu(phi) with p = 0, so
    sin^2(phi*) = (c^2 / kappa - a) / (b - a) for the representative angle
    phi* in [0, pi/2].  For a < b the libration encloses a center at a
    multiple of pi and the turning points are center -+ phi*; for a > b the
    centers sit at odd multiples of pi/2 and the bracket is
    (phi* + k pi, pi - phi* + k pi).  Only defined for librations with a != b.
    """
    if model.a == model.b:
        raise ValueError("turning points are undefined on a circle (a == b)")
    kappa = model.kappa(state)
    if kappa <= 0.0:
        raise ValueError("no turning points: kappa = 0 means p never vanishes")
    s2 = (state.speed**2 / kappa - model.a) / (model.b - model.a)
    if not 0.0 <= s2 <= 1.0 + 1e-12:
        raise ValueError(
            f"no turning points: sin^2(phi*) = {s2:.6f} outside [0, 1]; "
            "the trajectory is not a libration"
        )
    half = float(np.arcsin(np.sqrt(min(s2, 1.0))))
    if model.a < model.b:
        center = np.pi * np.round(state.phi / np.pi)
        return float(center - half), float(center + half)
    shift = np.pi * np.round((state.phi - 0.5 * np.pi) / np.pi)
    return float(half + shift), float(np.pi - half + shift)


def integrated_angle_extreme(
    model: EllipseModel,
    initial: ReducedState,
    t_final: float,
    dt: float = 1e-2,
    steps_per_unit: float = 4096.0,
) -> float:
    """Maximum of |phi(t)| on [0, t_final] measured from an integration.

    Samples the reduced solution on a uniform grid and sharpens the sampled
    maximum with a three-point parabola fit, which recovers smooth extremes
    to far better accuracy than the grid spacing.
    """
    times = np.arange(0.0, t_final + dt, dt)
    ys = reduced_solve(model, initial, times, steps_per_unit)
    phi = np.abs(ys[:, 0])
    i = int(np.argmax(phi))
    if i == 0 or i == len(phi) - 1:
        return float(phi[i])
    y0, y1, y2 = phi[i - 1], phi[i], phi[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0.0:
        return float(y1)
    # vertex of the parabola through the three samples
    return float(y1 - 0.125 * (y2 - y0) ** 2 / denom)


def equilibria(model: EllipseModel) -> tuple[list[float], list[float]]:
    """Angles of the centers and saddles of the reduced system on [0, 2 pi).

    Equilibria sit at p = 0, sin(2 phi) = 0.  For a < b the centers are at
    phi = 0, pi (the ends of the long axis) and the saddles at pi/2, 3 pi/2;
    for a > b the roles swap.  Undefined on a circle.
    """
    if model.a == model.b:
        raise ValueError("every point with p = 0 is an equilibrium when a == b")
    axis_ends = [0.0, np.pi]
    waists = [np.pi / 2.0, 3.0 * np.pi / 2.0]
    if model.a < model.b:
        return axis_ends, waists
    return waists, axis_ends
