"""Constraint maps whose level sets the integrator moves on.

A constraint map is a smooth ``f: R^n -> R^m`` (m < n) whose regular level
sets are embedded manifolds of dimension ``n - m``.  The integrator only ever
queries three things: the value ``f(x)``, the Jacobian ``J(x)`` (rows are
gradients of the components), and the symmetric bilinear Hessian action
``H(x)[u, w]`` returning one number per component.  Subclasses may supply
analytic derivatives; the base class falls back to central finite
differences, which is accurate enough for exploratory work but not for
tight-tolerance studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError


def _fd_step(x: np.ndarray) -> float:
    return 1e-5 * max(1.0, float(np.linalg.norm(x)))


class ConstraintMap:
    """Base class for constraint maps f: R^n -> R^m.

    Attributes
    ----------
    ambient_dim:
        Dimension n of the ambient space.
    codim:
        Number m of constraint components (the codimension of a regular
        level set).
    """

    ambient_dim: int
    codim: int

    def value(self, x: np.ndarray) -> np.ndarray:
        """Return f(x) with shape (m,)."""
        raise NotImplementedError

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Return the m-by-n Jacobian at x; rows are component gradients.

        The default implementation uses central finite differences of
        :meth:`value`.
        """
        x = self.check_point(x)
        h = _fd_step(x)
        J = np.empty((self.codim, self.ambient_dim))
        for j in range(self.ambient_dim):
            e = np.zeros(self.ambient_dim)
            e[j] = h
            J[:, j] = (self.value(x + e) - self.value(x - e)) / (2.0 * h)
        return J

    def hessian_bilinear(self, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Return H(x)[u, w] with shape (m,): per-component u^T (Hess f_i) w.

        The default implementation differentiates :meth:`jacobian` along w.
        """
        x = self.check_point(x)
        u = np.asarray(u, dtype=float)
        w = np.asarray(w, dtype=float)
        h = _fd_step(x)
        Jp = self.jacobian(x + h * w)
        Jm = self.jacobian(x - h * w)
        return ((Jp - Jm) / (2.0 * h)) @ u

    def hessian_contraction(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Return the m-by-n matrix H(x)[w, .]: entry (i, j) is w^T Hess(f_i) e_j.

        Equals the column-stack of :meth:`hessian_bilinear` over the standard
        basis; subclasses override this with a closed form where available
        because it sits in the inner loop of field evaluations.
        """
        x = self.check_point(x)
        w = np.asarray(w, dtype=float)
        eye = np.eye(self.ambient_dim)
        M = np.empty((self.codim, self.ambient_dim))
        for j in range(self.ambient_dim):
            M[:, j] = self.hessian_bilinear(x, eye[j], w)
        return M

    def check_point(self, x: np.ndarray) -> np.ndarray:
        """Validate shape and return x as a float array."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.ambient_dim,):
            raise DimensionError(
                f"expected point of shape ({self.ambient_dim},), got {x.shape}"
            )
        return x

    @property
    def manifold_dim(self) -> int:
        """Dimension n - m of a regular level set."""
        return self.ambient_dim - self.codim


class QuadricConstraint(ConstraintMap):
    """f(x) = -x^T A x for symmetric positive definite A (codimension 1).

    Level sets f = -c (c > 0) are ellipsoids.  All derivatives are analytic:
    grad f = -2 A x and the Hessian is the constant matrix -2 A.
    """

    def __init__(self, A: np.ndarray):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got shape {A.shape}")
        if not np.allclose(A, A.T):
            raise ValueError("A must be symmetric")
        if np.any(np.linalg.eigvalsh(A) <= 0.0):
            raise ValueError("A must be positive definite")
        self.A = A
        self.ambient_dim = A.shape[0]
        self.codim = 1

    def value(self, x: np.ndarray) -> np.ndarray:
        x = self.check_point(x)
        return np.array([-x @ self.A @ x])

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = self.check_point(x)
        return (-2.0 * self.A @ x)[None, :]

    def hessian_bilinear(self, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        self.check_point(x)
        return np.array([-2.0 * np.asarray(u, float) @ self.A @ np.asarray(w, float)])

    def hessian_contraction(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        self.check_point(x)
        return (-2.0 * self.A @ np.asarray(w, float))[None, :]

    def hessian_norm_bound(self) -> float:
        """Exact operator norm of the (constant) Hessian: 2 * lambda_max(A)."""
        return 2.0 * float(np.linalg.eigvalsh(self.A)[-1])


class SphereConstraint(QuadricConstraint):
    """f(x) = -x^T x; level set f = -r^2 is the sphere of radius r."""

    def __init__(self, ambient_dim: int):
        super().__init__(np.eye(ambient_dim))


class AffineConstraint(ConstraintMap):
    """f(x) = B x - c for a full-rank m-by-n matrix B.

    Level sets are affine subspaces; the Hessian vanishes identically, so the
    tangent/normal projectors are constant.  Useful as a degenerate test case.
    """

    def __init__(self, B: np.ndarray, c: np.ndarray | None = None):
        B = np.atleast_2d(np.asarray(B, dtype=float))
        m, n = B.shape
        if m >= n:
            raise DimensionError(f"need m < n, got B of shape {B.shape}")
        if np.linalg.matrix_rank(B) < m:
            raise ValueError("B must have full row rank")
        self.B = B
        self.c = np.zeros(m) if c is None else np.asarray(c, dtype=float)
        if self.c.shape != (m,):
            raise DimensionError(f"c must have shape ({m},), got {self.c.shape}")
        self.ambient_dim = n
        self.codim = m

    def value(self, x: np.ndarray) -> np.ndarray:
        x = self.check_point(x)
        return self.B @ x - self.c

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        self.check_point(x)
        return self.B.copy()

    def hessian_bilinear(self, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        self.check_point(x)
        return np.zeros(self.codim)

    def hessian_contraction(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        self.check_point(x)
        return np.zeros((self.codim, self.ambient_dim))


class SphereSlicedConstraint(ConstraintMap):
    """Codimension-2 map on R^n (n >= 3): a sphere sliced by a wavy sheet.

    f_1(x) = -x^T x
    f_2(x) = sin(x_1) + x_2^2 - x_3

    Both components have simple analytic derivatives, and the intersection of
    their regular level sets is an (n-2)-manifold.  Used to exercise the
    m > 1 code paths.
    """

    def __init__(self, ambient_dim: int = 3):
        if ambient_dim < 3:
            raise DimensionError("need ambient_dim >= 3")
        self.ambient_dim = ambient_dim
        self.codim = 2

    def value(self, x: np.ndarray) -> np.ndarray:
        x = self.check_point(x)
        return np.array([-x @ x, np.sin(x[0]) + x[1] ** 2 - x[2]])

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = self.check_point(x)
        J = np.zeros((2, self.ambient_dim))
        J[0] = -2.0 * x
        J[1, 0] = np.cos(x[0])
        J[1, 1] = 2.0 * x[1]
        J[1, 2] = -1.0
        return J

    def hessian_bilinear(self, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        x = self.check_point(x)
        u = np.asarray(u, dtype=float)
        w = np.asarray(w, dtype=float)
        return np.array(
            [-2.0 * u @ w, -np.sin(x[0]) * u[0] * w[0] + 2.0 * u[1] * w[1]]
        )

    def hessian_contraction(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        x = self.check_point(x)
        w = np.asarray(w, dtype=float)
        M = np.zeros((2, self.ambient_dim))
        M[0] = -2.0 * w
        M[1, 0] = -np.sin(x[0]) * w[0]
        M[1, 1] = 2.0 * w[1]
        return M


@dataclass
class CallableConstraint(ConstraintMap):
    """Wrap plain callables as a constraint map.

    Only ``fn`` is required; missing derivatives fall back to the finite
    difference defaults of :class:`ConstraintMap`.
    """

    ambient_dim: int
    codim: int
    fn: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray] | None = None
    hess_bilinear: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = field(
        default=None
    )

    def value(self, x: np.ndarray) -> np.ndarray:
        x = self.check_point(x)
        v = np.atleast_1d(np.asarray(self.fn(x), dtype=float))
        if v.shape != (self.codim,):
            raise DimensionError(f"fn returned shape {v.shape}, expected ({self.codim},)")
        return v

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        if self.jac is None:
            return super().jacobian(x)
        x = self.check_point(x)
        return np.atleast_2d(np.asarray(self.jac(x), dtype=float))

    def hessian_bilinear(self, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        if self.hess_bilinear is None:
            return super().hessian_bilinear(x, u, w)
        x = self.check_point(x)
        return np.atleast_1d(np.asarray(self.hess_bilinear(x, u, w), dtype=float))


def hessian_bound_estimates(
    constraint: ConstraintMap,
    points: np.ndarray,
    n_probes: int = 8,
    seed: int = 0,
) -> tuple[float, float]:
    """Estimate (beta, gamma): a bound on ||H(x)|| over the given points and a
    Lipschitz constant for x -> H(x) between consecutive points.

    The operator norm of the bilinear map is estimated by alternating power
    iteration over unit vectors u, w from several random starts; gamma is
    estimated from difference quotients of the same bilinear forms between
    consecutive points.  Estimates are lower bounds by construction, so
    callers should apply a safety factor.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    rng = np.random.default_rng(seed)
    n = constraint.ambient_dim

    def op_norm(bilinear: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        best = 0.0
        for _ in range(n_probes):
            u = rng.standard_normal(n)
            u /= np.linalg.norm(u)
            w = rng.standard_normal(n)
            w /= np.linalg.norm(w)
            for _ in range(20):
                # maximize ||B[u, w]|| over u with w fixed, then swap roles
                y = bilinear(u, w)
                ny = np.linalg.norm(y)
                if ny == 0.0:
                    break
                grad_u = np.array(
                    [y @ bilinear(e, w) for e in np.eye(n)]
                )
                nu = np.linalg.norm(grad_u)
                if nu == 0.0:
                    break
                u = grad_u / nu
                y = bilinear(u, w)
                grad_w = np.array(
                    [y @ bilinear(u, e) for e in np.eye(n)]
                )
                nw = np.linalg.norm(grad_w)
                if nw == 0.0:
                    break
                w = grad_w / nw
            best = max(best, float(np.linalg.norm(bilinear(u, w))))
        return best

    beta = 0.0
    for x in points:
        beta = max(beta, op_norm(lambda u, w, x=x: constraint.hessian_bilinear(x, u, w)))

    gamma = 0.0
    for xa, xb in zip(points[:-1], points[1:]):
        d = float(np.linalg.norm(xb - xa))
        if d < 1e-14:
            continue
        diff = op_norm(
            lambda u, w, xa=xa, xb=xb: constraint.hessian_bilinear(xb, u, w)
            - constraint.hessian_bilinear(xa, u, w)
        )
        gamma = max(gamma, diff / d)

    return beta, gamma
