import math

import numpy as np
import pytest
from scipy import integrate

from cxsharp.envelope import Kind, envelope_J, knee_function, make_envelope, mass_constants, solve_envelope
from cxsharp.numerics import DomainError

import oracle_values as ov

KINDS = [Kind.SUB_GAUSSIAN, Kind.SUB_EXPONENTIAL]


def test_gaussian_envelope_values():
    env = make_envelope("gaussian")
    assert env.s(0.0) == 1.0
    assert env.s(env.plateau_edge) == pytest.approx(1.0, abs=1e-15)
    assert env.s(2.0) == pytest.approx(2 * math.exp(-2), abs=1e-16)
    assert env.plateau_edge == pytest.approx(ov.T0, abs=1e-15)


def test_exponential_tail_integral_at_edge():
    env = make_envelope(Kind.SUB_EXPONENTIAL)
    assert env.tail_integral(math.log(2)) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_s_inverse_roundtrip(kind):
    env = make_envelope(kind)
    y = np.linspace(1e-6, 1, 500)
    np.testing.assert_allclose(env.s(env.s_inverse(y)), y, rtol=1e-12)
    assert env.s_inverse(1.0) == pytest.approx(env.plateau_edge, abs=1e-15)
    with pytest.raises(DomainError):
        env.s_inverse(0.0)


@pytest.mark.parametrize("kind", KINDS)
def test_s_shape(kind):
    env = make_envelope(kind)
    t = np.linspace(env.plateau_edge, 30, 5000)
    assert np.all(np.diff(env.s(t)) < 0)
    assert np.all(env.s(np.linspace(0, env.plateau_edge, 50)) == 1.0)
    with pytest.raises(DomainError):
        env.s(-0.1)


@pytest.mark.parametrize("kind", KINDS)
def test_tail_integral_against_quadrature(kind):
    env = make_envelope(kind)
    for x in (0.0, 0.3, env.plateau_edge, 1.5, 2.5, 5.0, 10.0):
        pts = [env.plateau_edge] if x < env.plateau_edge else None
        q, _ = integrate.quad(lambda t: float(env.s(t)), x, 60, points=pts, epsabs=1e-14, limit=200)
        assert env.tail_integral(x) == pytest.approx(q, abs=1e-10)


def test_mass_constants():
    total, half = mass_constants(make_envelope("gaussian"))
    assert total == pytest.approx(ov.A_G, abs=1e-14)
    assert half == total / 2
    total_e, half_e = mass_constants(make_envelope("exponential"))
    assert total_e == pytest.approx(ov.A_E, abs=1e-15)
    assert half_e == pytest.approx(0.84657359, abs=1e-8)


def test_knee_function():
    env = make_envelope("gaussian")
    assert knee_function(env, env.plateau_edge) == pytest.approx(ov.A_G, abs=1e-14)
    assert knee_function(env, 1.80334) == pytest.approx(ov.B_G, abs=1e-5)
    with pytest.raises(DomainError):
        knee_function(env, 1.0)


@pytest.mark.parametrize("kind", KINDS)
def test_knee_function_decreasing(kind):
    env = make_envelope(kind)
    x = np.linspace(env.plateau_edge, 40, 4000)
    h = np.asarray(knee_function(env, x))
    # strictly decreasing until it underflows
    live = h > 1e-300
    assert np.all(np.diff(h[live]) < 0)


def test_solutions():
    g = solve_envelope(make_envelope("gaussian"))
    assert g.knee == pytest.approx(ov.KNEE_G, abs=1e-12)
    assert g.knee_tail == pytest.approx(ov.P0_G, abs=1e-12)
    assert g.knee > math.sqrt(2) and g.knee_tail < 0.5
    e = solve_envelope(make_envelope("exponential"))
    assert e.knee == pytest.approx(ov.KNEE_E, abs=1e-12)
    assert e.knee_tail == pytest.approx(ov.P_E, abs=1e-12)
    assert e.knee > 2 * math.log(2)


@pytest.mark.parametrize("kind", KINDS)
def test_J_examples_and_linear_bound(kind):
    sol = solve_envelope(make_envelope(kind))
    assert envelope_J(sol, 0.0) == sol.half_mass
    u = np.linspace(0, 40, 10_000)
    j = np.asarray(envelope_J(sol, u))
    assert np.all(j >= sol.half_mass - sol.knee_tail * u - 1e-12)
    # continuous at the knee, up to the root tolerance times the slope
    assert float(envelope_J(sol, sol.knee)) == pytest.approx(float(sol.env.tail_integral(sol.knee)), abs=1e-12)
    with pytest.raises(DomainError):
        envelope_J(sol, -1.0)


def test_J_gaussian_at_knee():
    sol = solve_envelope(make_envelope("gaussian"))
    assert envelope_J(sol, sol.knee) == pytest.approx(ov.J_G_AT_KNEE, abs=1e-13)
    assert envelope_J(sol, 1.0) == pytest.approx(ov.J_G_AT_1, abs=1e-14)


@pytest.mark.parametrize("kind", KINDS)
def test_J_convex(kind):
    sol = solve_envelope(make_envelope(kind))
    u = np.linspace(0, 20, 20_001)
    j = np.asarray(envelope_J(sol, u))
    assert np.all(np.diff(j, 2) >= -1e-15)
    beyond = np.linspace(sol.knee, 20, 5000)
    assert np.all(np.diff(np.asarray(sol.env.tail_integral(beyond)), 2) >= -1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_second_moment_closed_form(kind):
    env = make_envelope(kind)
    q, _ = integrate.quad(lambda t: 2 * t * float(env.s(t)), 0, 60, points=[env.plateau_edge], limit=200)
    assert env.second_moment() == pytest.approx(q, abs=1e-10)
