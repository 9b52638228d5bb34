"""Reduced ellipse model: frames, the first integral, classification, turning points."""

from __future__ import annotations

import numpy as np
import pytest

from hugint.constraints import QuadricConstraint
from hugint.dynamics import reference_solve
from hugint.ellipse import (
    Classification,
    EllipseModel,
    ReducedState,
    classify,
    equilibria,
    from_reduced,
    integrated_angle_extreme,
    libration_turning_points,
    reduced_derivative,
    reduced_solve,
    tangential_speed,
    to_reduced,
)
from hugint.errors import DimensionError, OffLevelSetError
from hugint.integrator import HugParams, PhaseState, hug_trajectory

MODEL = EllipseModel(a=1.0, b=4.0)
SPEED = float(np.sqrt(2.0))


def test_model_validation():
    with pytest.raises(ValueError):
        EllipseModel(a=-1.0, b=2.0)


def test_reduced_state_speed_cap():
    with pytest.raises(ValueError):
        ReducedState(phi=0.0, p=1.5, speed=1.0)


def test_frame_orthonormal_and_on_level_set():
    for phi in np.linspace(-np.pi, np.pi, 17):
        x = MODEL.position(phi)
        assert np.isclose(MODEL.a * x[0] ** 2 + MODEL.b * x[1] ** 2, 1.0, atol=1e-14)
        t = MODEL.unit_tangent(phi)
        n = MODEL.unit_normal(phi)
        assert np.isclose(t @ t, 1.0, atol=1e-14)
        assert np.isclose(n @ n, 1.0, atol=1e-14)
        assert np.isclose(t @ n, 0.0, atol=1e-14)
        # the normal is parallel to the constraint gradient (a x1, b x2)
        grad = np.array([MODEL.a * x[0], MODEL.b * x[1]])
        assert np.isclose(abs(n @ grad), np.linalg.norm(grad), atol=1e-13)


def test_angle_of_inverts_position():
    for phi in np.linspace(-3.0, 3.0, 13):
        assert np.isclose(MODEL.angle_of(MODEL.position(phi)), phi, atol=1e-13)
    with pytest.raises(DimensionError):
        MODEL.angle_of(np.zeros(3))


def test_to_from_reduced_roundtrip():
    rng = np.random.default_rng(51)
    for _ in range(10):
        phi = rng.uniform(-np.pi, np.pi)
        v = rng.standard_normal(2)
        state = PhaseState(MODEL.position(phi), v)
        reduced, normal_speed = to_reduced(MODEL, state)
        assert np.isclose(reduced.phi, phi, atol=1e-13)
        assert np.isclose(reduced.speed, np.linalg.norm(v), atol=1e-13)
        # the two components account for the whole speed
        assert np.isclose(np.hypot(reduced.p, normal_speed), reduced.speed, atol=1e-13)
        back = from_reduced(MODEL, reduced, normal_sign=np.sign(normal_speed))
        assert np.abs(back.x - state.x).max() < 1e-13
        assert np.abs(back.v - state.v).max() < 1e-13


def test_to_reduced_rejects_off_level_points():
    with pytest.raises(OffLevelSetError):
        to_reduced(MODEL, PhaseState([1.1, 0.0], [0.0, 1.0]))
    with pytest.raises(DimensionError):
        to_reduced(MODEL, PhaseState([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]))


def test_tangential_speed_tolerates_off_level_points():
    # discrete iterates sit slightly off the level set; only the angle is used
    x = 1.001 * MODEL.position(0.3)
    v = np.array([0.2, -0.5])
    expected = v @ MODEL.unit_tangent(0.3)
    assert np.isclose(tangential_speed(MODEL, x, v), expected, atol=1e-12)


def test_kappa_conserved_along_reduced_solve():
    rng = np.random.default_rng(52)
    for _ in range(5):
        phi0 = rng.uniform(-np.pi, np.pi)
        p0 = rng.uniform(-0.9, 0.9) * SPEED
        state = ReducedState(phi=phi0, p=p0, speed=SPEED)
        times = np.linspace(0.0, 8.0, 33)
        ys = reduced_solve(MODEL, state, times)
        kappas = (SPEED**2 - ys[:, 1] ** 2) / MODEL.mu(ys[:, 0])
        assert np.abs(kappas - MODEL.kappa(state)).max() < 1e-9


def test_reduced_solve_matches_cartesian_flow():
    """Integrating the full 2-D flow and mapping down must reproduce the
    reduced trajectory: the two routes share no code."""
    constraint = QuadricConstraint(np.diag([MODEL.a, MODEL.b]))
    initial = PhaseState([1.0, 0.0], [np.sqrt(7.0) / 2.0, 0.5])
    reduced0, _ = to_reduced(MODEL, initial)
    times = np.linspace(0.0, 3.0, 31)
    cart = reference_solve(constraint, initial, times)
    reduced = reduced_solve(MODEL, reduced0, times)
    phis = np.array([MODEL.angle_of(x) for x in cart.xs])
    ps = np.array([v @ MODEL.unit_tangent(phi) for v, phi in zip(cart.vs, phis)])
    assert np.abs(phis - reduced[:, 0]).max() < 1e-7
    assert np.abs(ps - reduced[:, 1]).max() < 1e-7


def test_reduced_derivative_matches_solve():
    state = ReducedState(phi=0.46, p=0.35, speed=SPEED)
    h = 1e-6
    ys = reduced_solve(MODEL, state, np.array([0.0, h, 2 * h]))
    mid = ReducedState(phi=float(ys[1, 0]), p=float(ys[1, 1]), speed=SPEED)
    dphi, dp = reduced_derivative(MODEL, mid)
    fd = (ys[2] - ys[0]) / (2 * h)
    assert np.isclose(dphi, fd[0], atol=1e-9)
    assert np.isclose(dp, fd[1], atol=1e-9)


def test_classification_criterion():
    # p = +-c anywhere: kappa = 0, the angle sweeps the whole ellipse
    assert classify(MODEL, ReducedState(0.7, SPEED, SPEED)).kind == "rotation"
    # p = 0 near a center: pure fold-back
    res = classify(MODEL, ReducedState(0.2, 0.0, SPEED))
    assert res.kind == "libration" and res.turning_points is not None
    # kappa * max(a, b) == c^2 exactly on the separatrix
    sep = classify(MODEL, ReducedState(np.pi / 2.0, 0.0, SPEED))
    assert sep.kind == "separatrix" and sep.turning_points is None


def test_turning_points_bracket_both_orderings():
    state = ReducedState(phi=0.3, p=0.2, speed=SPEED)
    lo, hi = libration_turning_points(MODEL, state)
    assert lo < state.phi < hi
    assert np.isclose(lo, -hi, atol=1e-13)  # symmetric about the center at 0
    # mirrored model: librations enclose pi/2 instead
    swapped = EllipseModel(a=4.0, b=1.0)
    state2 = ReducedState(phi=np.pi / 2.0 - 0.3, p=-0.2, speed=SPEED)
    lo2, hi2 = libration_turning_points(swapped, state2)
    assert lo2 < state2.phi < hi2
    # swapping the axes maps one bracket onto the other
    assert np.isclose(lo2, np.pi / 2.0 - hi, atol=1e-13)
    assert np.isclose(hi2, np.pi / 2.0 - lo, atol=1e-13)


def test_turning_points_shifted_center():
    state = ReducedState(phi=np.pi - 0.25, p=0.1, speed=SPEED)
    lo, hi = libration_turning_points(MODEL, state)
    assert np.isclose(0.5 * (lo + hi), np.pi, atol=1e-13)
    assert lo < state.phi < hi


def test_turning_points_undefined_cases():
    with pytest.raises(ValueError):
        libration_turning_points(EllipseModel(2.0, 2.0), ReducedState(0.1, 0.1, 1.0))
    with pytest.raises(ValueError):
        # a rotation has no turning points
        libration_turning_points(MODEL, ReducedState(0.7, SPEED, SPEED))


def test_turning_points_match_integrated_extreme():
    state = ReducedState(phi=0.0, p=0.5, speed=SPEED)
    result = classify(MODEL, state)
    assert result.kind == "libration"
    _, hi = result.turning_points
    measured = integrated_angle_extreme(MODEL, state, t_final=15.0)
    assert abs(measured - hi) < 1e-6


def test_equilibria_roles_swap_with_axis_order():
    centers, saddles = equilibria(MODEL)  # a < b: long axis along x1
    assert np.allclose(centers, [0.0, np.pi])
    assert np.allclose(saddles, [np.pi / 2.0, 3.0 * np.pi / 2.0])
    centers2, saddles2 = equilibria(EllipseModel(4.0, 1.0))
    assert np.allclose(centers2, [np.pi / 2.0, 3.0 * np.pi / 2.0])
    assert np.allclose(saddles2, [0.0, np.pi])
    with pytest.raises(ValueError):
        equilibria(EllipseModel(3.0, 3.0))


def test_foldback_run_changes_tangential_sign_twice():
    constraint = QuadricConstraint(np.diag([1.0, 4.0]))
    initial = PhaseState([1.0, 0.0], [np.sqrt(7.0) / 2.0, 0.5])
    t = hug_trajectory(constraint, initial, HugParams(0.1, 14))
    signs = np.sign([tangential_speed(MODEL, x, v) for x, v in zip(t.xs, t.vs)])
    assert int(np.sum(signs[1:] != signs[:-1])) == 2


def test_classification_is_frozen_record():
    res = Classification(kind="rotation", kappa=0.5, turning_points=None)
    with pytest.raises(AttributeError):
        res.kind = "libration"
