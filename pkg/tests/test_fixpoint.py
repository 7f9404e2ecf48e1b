import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from halfline_bvp.fixpoint import (GridFunction, apply_T, apply_Tstar, default_eps,
                                   from_callables, make_grid, norm, picard_solve,
                                   truncate_delta, verify, zero_function)
from halfline_bvp.kernel import GreenKernel, make_shift
from halfline_bvp.model import MultipointProblem

from conftest import K, M

ZERO = MultipointProblem([0.11, 0.89], [0.0, 0.11], "0")


def test_norm_examples():
    t = np.linspace(0, 30, 3001)
    assert norm(from_callables(t, lambda x: np.exp(-x), lambda x: -np.exp(-x), 1.0)) == 1.0
    assert norm(from_callables(t, lambda x: 0 * x, lambda x: 0 * x, 1.0)) == 0.0
    u = from_callables(np.linspace(0, 2 * np.pi, 200001), lambda x: np.sin(x) / 2,
                       lambda x: np.cos(x) / 2, 1.0)
    assert norm(u) == pytest.approx(0.5, abs=1e-6)


def test_grid_layout(problem):
    g = make_grid(problem, K)
    assert g[0] == 0.0 and g[-1] == pytest.approx(20 / K)
    assert 0.11 in g
    assert np.all(np.diff(g) > 0)
    assert np.diff(g)[0] < np.diff(g)[-1]  # graded towards the origin


def test_hermite_reproduces_cubics_and_tail():
    nodes = np.linspace(0, 4, 9)
    u = from_callables(nodes, lambda x: x**3 - 2 * x, lambda x: 3 * x**2 - 2, 0.5)
    x = np.linspace(0, 4, 101)
    val, der = u(x)
    np.testing.assert_allclose(val, x**3 - 2 * x, atol=1e-12)
    np.testing.assert_allclose(der, 3 * x**2 - 2, atol=1e-11)
    val, der = u(np.array([6.0]))
    assert val[0] == pytest.approx((64 - 8) * math.exp(-1.0))
    assert der[0] == pytest.approx((48 - 2) * math.exp(-1.0))


def test_grid_function_validation():
    with pytest.raises(ValueError):
        GridFunction(np.array([0.0, 1.0, 1.0]), np.zeros(3), np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        GridFunction(np.array([0.1, 1.0]), np.zeros(2), np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        GridFunction(np.array([0.0, 1.0]), np.array([0.0, np.nan]), np.zeros(2), 1.0)


@pytest.mark.parametrize("mode", ["as_printed", "derived"])
def test_zero_maps_to_zero(mode):
    gk = GreenKernel(ZERO, make_shift(K, M, mode))
    u = zero_function(ZERO, K, 60)
    Tu = apply_T(gk, ZERO, u)
    assert norm(Tu) == 0.0


def test_derived_operator_solves_shifted_equation(gk_derived):
    p = MultipointProblem([0.11, 0.89], [0.0, 0.11], "exp(-t)")
    u = zero_function(p, K)
    v = apply_T(gk_derived, p, u)
    rep = verify(MultipointProblem(p.alphas, p.xis, f"exp(-t) - {K}*y - {M}*x"), v)
    assert rep.ode_residual < 1e-4
    assert v.u[0] == 0.0


def _random_u(rng, nodes, r):
    """Smooth decaying grid function scaled so that ||u|| = r * (random in (0, 1))."""
    a, b, c, d = rng.uniform(-1, 1), rng.uniform(0.05, 1.0), rng.uniform(0, 3), rng.uniform(0, 6)
    f = lambda x: a * np.exp(-b * x) * np.sin(c * x + d) + rng.uniform(-1, 1) * 0.0
    df = lambda x: a * np.exp(-b * x) * (c * np.cos(c * x + d) - b * np.sin(c * x + d))
    u = from_callables(nodes, f, df, K / 2)
    scale = r * rng.uniform(0.05, 0.999) / max(norm(u), 1e-300)
    return u.with_values(u.u * scale, u.du * scale)


def display_bound(C, r):
    phi_int = integrate.quad(lambda s: math.exp(-K * s / 2) * (2 + math.sin(s)) * (r + 1) ** 2 / 1000,
                             0, math.inf)[0]
    return C * (phi_int + (2 + 2 * M / K) * r)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 1.0, 5.0]))
def test_operator_bound_and_equiconvergence(problem, gk, constants, seed, r):
    rng = np.random.default_rng(seed)
    nodes = make_grid(problem, K, 120)
    u = _random_u(rng, nodes, r)
    Tu = apply_T(gk, problem, u)
    C = max(constants.C1, constants.C2)
    bound = display_bound(C, r)
    assert norm(Tu) <= bound
    assert Tu.u[0] == 0.0
    env = constants.C1 * np.exp(-K * nodes / 2) * bound / C
    assert np.all(np.abs(Tu.u) <= env + 1e-14)


def test_truncate_delta(bracket):
    assert truncate_delta(0.0, 5.0, bracket) == 1.0
    assert truncate_delta(0.0, 0.0, bracket) == 0.0
    assert truncate_delta(0.0, -1.0, bracket) == pytest.approx(-0.0075)
    t = np.linspace(0, 10, 11)
    out = truncate_delta(t, np.full_like(t, 2.0), bracket)
    np.testing.assert_array_equal(out, 1.0)


def test_tstar_equals_t_inside_bracket(problem, gk_derived, bracket):
    nodes = make_grid(problem, K, 100)
    u = from_callables(nodes, lambda x: 0.3 * np.exp(-x) * x + 0.01,
                       lambda x: 0.3 * np.exp(-x) * (1 - x), K / 2)
    assert np.all((bracket.lower(nodes) <= u.u) & (u.u <= bracket.upper(nodes)))
    a = apply_T(gk_derived, problem, u)
    b = apply_Tstar(gk_derived, problem, u, bracket, 0.05)
    np.testing.assert_allclose(a.u, b.u, atol=1e-13)
    np.testing.assert_allclose(a.du, b.du, atol=1e-13)


def test_tstar_uses_clamp_and_penalty(problem, gk_derived, bracket):
    nodes = make_grid(problem, K, 100)
    u = from_callables(nodes, lambda x: 2.0 + 0 * x, lambda x: 0 * x, K / 2)
    eps = 0.05
    got = apply_Tstar(gk_derived, problem, u, bracket, eps)
    # f(t, 1, 0) = 0, so the load is M*2 + eps*(2 - 1)
    want = apply_T(gk_derived, ZERO, u.with_values(u.u * 0 + (2 * M + eps) / M, u.du))
    np.testing.assert_allclose(got.u, want.u, atol=1e-12)
    with pytest.raises(ValueError):
        apply_Tstar(gk_derived, problem, u, bracket, 0.0)


def test_default_eps():
    assert default_eps(K, 2.0, 1.0, 1.0) == pytest.approx(K * 1.0 / (2 * 3.0))
    assert default_eps(K, None, None, 1.0) == pytest.approx(0.01 * K)
    assert default_eps(K, 1.0, 2.0, 1.0) == pytest.approx(0.01 * K)


def test_picard_trivial_cases(gk_derived):
    u0 = zero_function(ZERO, K, 60)
    res = picard_solve(gk_derived, ZERO, u0)
    assert res.converged and res.iterations == 1 and res.certified
    assert res.report.ode_residual == 0.0
    res = picard_solve(gk_derived, ZERO, u0, max_iter=0)
    assert not res.converged and res.iterations == 0
    with pytest.raises(ValueError):
        picard_solve(gk_derived, ZERO, u0, tol=0)
    with pytest.raises(ValueError):
        picard_solve(gk_derived, ZERO, u0, damping=1.5)


def test_picard_converges_on_a_contractive_problem():
    # most of the shift is already inside f, so T is a contraction (factor ~0.25)
    p = MultipointProblem([0.5, 0.5], [0.0, 1.0], "0.1*sin(t)*exp(-t) - 0.8*(1.2*y + 0.6*x)")
    gk = GreenKernel(p, make_shift(1.2, 0.6, "derived"))
    res = picard_solve(gk, p, zero_function(p, 1.2, 200), tol=1e-9, max_iter=200)
    assert res.converged, res.message
    assert res.report.ode_residual < 10 * res.report.scheme_error + 1e-8
    assert res.report.bc0_residual < 1e-12


def test_as_printed_run_is_not_certified(problem, gk):
    res = picard_solve(gk, problem, zero_function(problem, K, 120), max_iter=30)
    assert not res.certified


def test_verify_examples(problem):
    u = zero_function(problem, K)
    rep = verify(problem, u)
    assert rep.ode_residual == pytest.approx(0.003, abs=1e-6)
    assert rep.bc0_residual == 0.0
    nodes = make_grid(problem, K)
    e = from_callables(nodes, lambda x: np.exp(-x), lambda x: -np.exp(-x), K / 2)
    rep = verify(MultipointProblem(problem.alphas, problem.xis, "exp(-t)"), e)
    assert rep.ode_residual < 10 * rep.scheme_error
    assert rep.ode_residual < 1e-3
    assert rep.bc0_residual == 1.0
    half = e.with_values(np.full_like(nodes, 0.5), np.zeros_like(nodes))
    assert verify(problem, half).bc0_residual == 0.5
    for v in rep.as_dict().values():
        assert v >= 0 and math.isfinite(v)
