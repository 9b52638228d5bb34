"""Metropolis-Hastings sampling built on the hugging integrator.

One proposal draws a velocity, runs K integrator steps along the level set of
the log-density ell, and accepts with probability min(1, r),

    log r = ell(x_K) - ell(x_0) + log q(v_K | x_K) - log q(v_0 | x_0).

Because each step reflects the velocity with an orthogonal matrix, ||v_K||
equals ||v_0||; for an isotropic, position-independent Gaussian q the two q
terms therefore cancel exactly, and the acceptance ratio reduces to the
ell difference, which the hugging property keeps small.  The kernel exploits
that cancellation by default but can evaluate the general formula, both to
test the shortcut and to support other velocity distributions.

Since the moves nearly preserve ell, a chain of hugging proposals alone
explores a single contour.  :func:`run_chain` can interleave a plain
random-walk Metropolis move so the chain also travels across level sets; that
is a generic substitute for a purpose-built level-jumping kernel, adequate
for the low-dimensional targets exercised here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import ConstraintMap
from .errors import SingularGeometryError
from .integrator import HugParams, PhaseState, hug_trajectory

LOG_DENSITY_INDEX = 0  # a codim-1 constraint's single component is the log-density


@dataclass(frozen=True)
class IsotropicGaussian:
    """Velocity distribution N(0, sigma^2 I), independent of position.

    ``norm_invariant`` is True because the log-density depends on v only
    through ||v||, which the integrator preserves.
    """

    dim: int
    sigma: float = 1.0
    norm_invariant: bool = True

    def sample(self, rng: np.random.Generator, x: np.ndarray) -> np.ndarray:
        return self.sigma * rng.standard_normal(self.dim)

    def log_density(self, v: np.ndarray, x: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        return float(
            -0.5 * (v @ v) / self.sigma**2
            - self.dim * np.log(self.sigma)
            - 0.5 * self.dim * np.log(2.0 * np.pi)
        )


@dataclass(frozen=True)
class KernelResult:
    """Outcome of a single Metropolis-Hastings move."""

    state: np.ndarray
    accepted: bool
    log_ratio: float
    #: True when the proposal trajectory hit a rank-deficient gradient and was
    #: rejected outright.
    singular: bool = False


def log_density_of(target: ConstraintMap, x: np.ndarray) -> float:
    """Read the scalar log-density from a codimension-1 constraint map."""
    if target.codim != 1:
        raise ValueError("sampling targets must have a single component (codim 1)")
    return float(target.value(x)[LOG_DENSITY_INDEX])


def hug_kernel(
    target: ConstraintMap,
    x: np.ndarray,
    params: HugParams,
    velocity_dist: IsotropicGaussian,
    rng: np.random.Generator,
    use_norm_cancellation: bool = True,
) -> KernelResult:
    """One hugging Metropolis-Hastings move from x.

    With ``use_norm_cancellation`` (default) the velocity-distribution terms
    of log r are dropped for norm-invariant distributions, where they cancel
    exactly; pass False to evaluate the general formula.  A rank-deficient
    gradient anywhere along the proposal trajectory yields an immediate
    rejection flagged ``singular``.
    """
    x = np.asarray(x, dtype=float)
    v0 = velocity_dist.sample(rng, x)
    try:
        trajectory = hug_trajectory(target, PhaseState(x, v0), params)
    except SingularGeometryError:
        return KernelResult(state=x, accepted=False, log_ratio=-np.inf, singular=True)
    final = trajectory.final
    log_ratio = log_density_of(target, final.x) - log_density_of(target, x)
    if not (use_norm_cancellation and getattr(velocity_dist, "norm_invariant", False)):
        log_ratio += velocity_dist.log_density(final.v, final.x) - velocity_dist.log_density(
            v0, x
        )
    accepted = np.log(rng.uniform()) < log_ratio
    return KernelResult(
        state=final.x if accepted else x, accepted=bool(accepted), log_ratio=float(log_ratio)
    )


def random_walk_kernel(
    target: ConstraintMap,
    x: np.ndarray,
    scale: float,
    rng: np.random.Generator,
) -> KernelResult:
    """Plain random-walk Metropolis move with a N(0, scale^2 I) proposal."""
    x = np.asarray(x, dtype=float)
    proposal = x + scale * rng.standard_normal(x.shape)
    log_ratio = log_density_of(target, proposal) - log_density_of(target, x)
    accepted = np.log(rng.uniform()) < log_ratio
    return KernelResult(
        state=proposal if accepted else x,
        accepted=bool(accepted),
        log_ratio=float(log_ratio),
    )


@dataclass(frozen=True)
class ChainRecord:
    """States and acceptance bookkeeping of a sampling run.

    ``states`` has shape (iterations + 1, n); row i is the state after
    iteration i (row 0 is the initial state, taken after any interleaved
    move of that iteration when one is configured).
    """

    states: np.ndarray
    hug_accepted: np.ndarray
    walk_accepted: np.ndarray | None
    singular_rejections: int

    @property
    def hug_acceptance_rate(self) -> float:
        return float(np.mean(self.hug_accepted))

    @property
    def walk_acceptance_rate(self) -> float | None:
        if self.walk_accepted is None:
            return None
        return float(np.mean(self.walk_accepted))


def run_chain(
    target: ConstraintMap,
    initial_x: np.ndarray,
    params: HugParams,
    velocity_dist: IsotropicGaussian,
    rng: np.random.Generator,
    iterations: int,
    walk_scale: float | None = None,
    use_norm_cancellation: bool = True,
) -> ChainRecord:
    """Run a chain of hugging moves, optionally interleaved with random walks.

    Each iteration performs one hugging move and, when ``walk_scale`` is
    given, one random-walk Metropolis move afterwards.
    """
    x = np.asarray(initial_x, dtype=float)
    states = np.empty((iterations + 1, x.size))
    states[0] = x
    hug_accepted = np.zeros(iterations, dtype=bool)
    walk_accepted = np.zeros(iterations, dtype=bool) if walk_scale is not None else None
    singular = 0
    for i in range(iterations):
        result = hug_kernel(target, x, params, velocity_dist, rng, use_norm_cancellation)
        x = result.state
        hug_accepted[i] = result.accepted
        singular += int(result.singular)
        if walk_scale is not None:
            walk = random_walk_kernel(target, x, walk_scale, rng)
            x = walk.state
            walk_accepted[i] = walk.accepted
        states[i + 1] = x
    return ChainRecord(
        states=states,
        hug_accepted=hug_accepted,
        walk_accepted=walk_accepted,
        singular_rejections=singular,
    )
