"""Projector bundles and the directional derivative of the normal projector."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import MAP_KINDS, make_map
from hugint.constraints import CallableConstraint, QuadricConstraint, SphereConstraint
from hugint.errors import SingularGeometryError
from hugint.projectors import (
    build_bundle,
    hessian_slice,
    nprime,
    nprime_par,
    nprime_perp,
    reflect,
)


def random_point(constraint, rng):
    x = rng.standard_normal(constraint.ambient_dim)
    return x / np.linalg.norm(x)


@pytest.mark.parametrize("kind", MAP_KINDS)
def test_bundle_projector_algebra(kind):
    rng = np.random.default_rng(21)
    for _ in range(10):
        c = make_map(kind, rng)
        b = build_bundle(c, random_point(c, rng))
        n = c.ambient_dim
        eye = np.eye(n)
        assert np.allclose(b.normal + b.tangent, eye, atol=1e-13)
        assert np.allclose(b.normal @ b.normal, b.normal, atol=1e-13)
        assert np.allclose(b.tangent @ b.tangent, b.tangent, atol=1e-13)
        assert np.allclose(b.normal, b.normal.T, atol=1e-14)
        assert np.allclose(b.normal @ b.tangent, 0.0, atol=1e-13)
        # basis is an orthonormal frame of the normal space
        assert np.allclose(b.basis.T @ b.basis, np.eye(c.codim), atol=1e-13)
        assert np.allclose(b.basis @ b.basis.T, b.normal, atol=1e-13)
        # J rows lie in the normal space, the pseudoinverse inverts them
        assert np.allclose(b.jac @ b.tangent, 0.0, atol=1e-11)
        assert np.allclose(b.jac @ b.pseudo, np.eye(c.codim), atol=1e-11)


def test_codim1_path_matches_explicit_qr():
    """The m = 1 shortcut must produce the same bundle as a hand-rolled QR."""
    rng = np.random.default_rng(22)
    q = QuadricConstraint(np.array([[2.0, 0.3], [0.3, 1.0]]))
    for _ in range(5):
        x = random_point(q, rng)
        b = build_bundle(q, x)
        J = q.jacobian(x)
        Q, R = np.linalg.qr(J.T)
        sign = -1.0 if R[0, 0] < 0 else 1.0
        Q, R = Q * sign, R * sign
        assert np.allclose(b.basis, Q, atol=1e-13)
        assert np.allclose(b.pseudo, Q / R[0, 0], atol=1e-13)
        assert np.allclose(b.normal, Q @ Q.T, atol=1e-13)


def test_singular_gradient_raises_with_point():
    q = SphereConstraint(2)
    with pytest.raises(SingularGeometryError) as info:
        build_bundle(q, np.zeros(2))
    assert np.allclose(info.value.x, 0.0)


def test_rank_deficient_jacobian_raises():
    # two proportional components make J rank 1 everywhere
    c = CallableConstraint(
        ambient_dim=3,
        codim=2,
        fn=lambda x: np.array([x @ x, 2.0 * (x @ x)]),
        jac=lambda x: np.vstack([2.0 * x, 4.0 * x]),
    )
    with pytest.raises(SingularGeometryError):
        build_bundle(c, np.array([1.0, 0.0, 0.0]))


@pytest.mark.parametrize("kind", MAP_KINDS)
def test_reflect_involution_and_isometry(kind):
    rng = np.random.default_rng(23)
    for _ in range(5):
        c = make_map(kind, rng)
        b = build_bundle(c, random_point(c, rng))
        v = rng.standard_normal(c.ambient_dim)
        rv = reflect(b, v)
        assert np.isclose(np.linalg.norm(rv), np.linalg.norm(v), atol=1e-13)
        assert np.allclose(reflect(b, rv), v, atol=1e-13)
        # tangential part fixed, normal part negated
        assert np.allclose(b.tangent @ rv, b.tangent @ v, atol=1e-13)
        assert np.allclose(b.normal @ rv, -(b.normal @ v), atol=1e-13)


@pytest.mark.parametrize("kind", ["quadric", "sliced"])
def test_nprime_image_kernel_nilpotency_transpose(kind):
    rng = np.random.default_rng(24)
    for _ in range(5):
        c = make_map(kind, rng)
        x = random_point(c, rng)
        b = build_bundle(c, x)
        w = rng.standard_normal(c.ambient_dim)
        P = nprime_perp(c, b, w)
        scale = max(1.0, np.abs(P).max())
        # image inside the normal space: T P = 0
        assert np.abs(b.tangent @ P).max() < 1e-12 * scale
        # kernel contains the normal space: P N = 0
        assert np.abs(P @ b.normal).max() < 1e-12 * scale
        # nilpotent of order two
        assert np.abs(P @ P).max() < 1e-12 * scale**2
        # the tangential part is the transpose
        assert np.allclose(nprime_par(c, b, w), P.T)
        assert np.allclose(nprime(c, b, w), P + P.T)


def test_nprime_linear_in_direction():
    rng = np.random.default_rng(25)
    c = make_map("sliced", rng)
    x = random_point(c, rng)
    b = build_bundle(c, x)
    w1, w2 = rng.standard_normal((2, c.ambient_dim))
    combo = nprime_perp(c, b, 2.0 * w1 - 3.0 * w2)
    parts = 2.0 * nprime_perp(c, b, w1) - 3.0 * nprime_perp(c, b, w2)
    assert np.allclose(combo, parts, atol=1e-13)


def test_nprime_precomputed_slice_matches():
    rng = np.random.default_rng(26)
    c = make_map("quadric", rng)
    x = random_point(c, rng)
    b = build_bundle(c, x)
    w = rng.standard_normal(c.ambient_dim)
    S = hessian_slice(c, x, w)
    assert np.allclose(nprime_perp(c, b, w, slice_=S), nprime_perp(c, b, w))


@pytest.mark.parametrize("kind", ["quadric", "sliced"])
def test_nprime_matches_projector_finite_differences(kind):
    """nprime must be the derivative of x -> N(x): central differences of the
    projector converge to it at second order in the step."""
    rng = np.random.default_rng(27)
    c = make_map(kind, rng)
    x = random_point(c, rng)
    w = rng.standard_normal(c.ambient_dim)
    analytic = nprime(c, build_bundle(c, x), w)
    hs = np.array([4e-3, 2e-3, 1e-3])
    errs = []
    for h in hs:
        Np = build_bundle(c, x + h * w).normal
        Nm = build_bundle(c, x - h * w).normal
        errs.append(np.abs((Np - Nm) / (2.0 * h) - analytic).max())
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.7 < slope < 2.3, f"FD convergence slope {slope:.3f}, errors {errs}"


def test_bivariate_quadric_closed_form():
    """For f = -a x1^2 - b x2^2 the tangent-to-normal derivative part has the
    rank-one closed form

        N'_perp(x)[w] = a b (w2 x1 - w1 x2) / (a^2 x1^2 + b^2 x2^2)^2
                        * [a x1, b x2]^T [-b x2, a x1].
    """
    rng = np.random.default_rng(28)
    a, b = 1.0, 4.0
    q = QuadricConstraint(np.diag([a, b]))
    for _ in range(10):
        x = rng.standard_normal(2)
        w = rng.standard_normal(2)
        denom = (a**2 * x[0] ** 2 + b**2 * x[1] ** 2) ** 2
        closed = (
            a * b * (w[1] * x[0] - w[0] * x[1]) / denom
            * np.outer([a * x[0], b * x[1]], [-b * x[1], a * x[0]])
        )
        general = nprime_perp(q, build_bundle(q, x), w)
        assert np.abs(closed - general).max() < 1e-12
