import math

import numpy as np
import pytest
from scipy import integrate, optimize

from halfline_bvp import theorems as th
from halfline_bvp.kernel import kernel_constants
from halfline_bvp.model import BoundFamily, BracketPair, MultipointProblem

from conftest import ALPHA_EXAMPLE, K, M

TAIL_C = (1 / math.sqrt(4 * M - K * K), math.sqrt(K * K / 4 + 1) / math.sqrt(4 * M - K * K))


def _ray_oracle(r=0.0):
    """scipy: sup_{t > 0.11} e^{-kt/2} int_0^t e^{-ks/2} phi_r."""
    phi = lambda s: (2 + math.sin(s)) * (r + 1) ** 2 / 1000
    F = lambda t: math.exp(-K * t / 2) * integrate.quad(
        lambda s: math.exp(-K * s / 2) * phi(s), 0, t, epsabs=1e-16, epsrel=1e-13)[0]
    res = optimize.minimize_scalar(lambda t: -F(t), bounds=(0.11, 10), method="bounded",
                                   options={"xatol": 1e-10})
    return -res.fun


def test_ray_and_compact_coefficients(bounds):
    ray, arg = th.ray_coefficient(bounds, 0.0, K, 0.11)
    assert ray == pytest.approx(_ray_oracle(), rel=1e-9)
    assert 1.5 < arg < 2.0
    comp = th.compact_coefficient(bounds, 0.0, K, 0.11)
    ref = integrate.quad(lambda s: math.exp(-K * s / 2) * (2 + math.sin(s)) / 1000, 0, 0.11)[0]
    assert comp == pytest.approx(ref, rel=1e-12)
    assert comp == pytest.approx(0.00022, abs=2e-5)


def test_sup_majorant_ray_bound(bounds):
    val, _ = th.ray_coefficient(bounds, 0.0, K, 0.11, "sup_majorant")
    assert val == pytest.approx(3 / 1000 / (2 * K), rel=1e-6)
    assert val >= th.ray_coefficient(bounds, 0.0, K, 0.11)[0]


def test_k_factor():
    assert th.k_factor(*TAIL_C, K, M, 0.11) == pytest.approx(0.9423, abs=1e-4)
    # inner max is 1/2 here because 2(1 - e^{-k xi/2}) is small
    assert 2 * (1 - math.exp(-K * 0.11 / 2)) == pytest.approx(0.0924, abs=1e-4)


def test_lhs_decomposition_resums(problem, bounds):
    for R in (0.01, 0.5, 3.0, 40.0):
        lhs = th.existence_lhs(problem, K, M, TAIL_C, bounds, R, rtilde=1.0)
        assert lhs.first + lhs.linear == pytest.approx(lhs.total, abs=1e-12)
        assert lhs.first == pytest.approx(lhs.cmax * max(lhs.ray, lhs.compact), rel=1e-15)
        assert lhs.r_eval == max(R, 1.0)
    with pytest.raises(ValueError):
        th.existence_lhs(problem, K, M, TAIL_C, bounds, 0.0)


def test_lhs_with_vanishing_phi(problem):
    zero = BoundFamily("Linf", "0*r")
    lhs = th.existence_lhs(problem, K, M, TAIL_C, zero, 1.0)
    assert lhs.total == pytest.approx(th.k_factor(*TAIL_C, K, M, 0.11))


def test_derived_constants_are_rejected(problem, gk_derived, bounds):
    with pytest.raises(ValueError):
        th.existence_lhs(problem, K, M, kernel_constants(gk_derived), bounds, 1.0)


def test_interval_with_tail_constants(problem, bounds):
    lhs = lambda R: th.existence_lhs(problem, K, M, TAIL_C, bounds, R, 1.0, "sup_majorant").total
    iv = th.find_R_interval(lhs)
    assert iv is not None and not (iv.open_low or iv.open_high)
    cert = th.interval_certificate(lhs, iv)
    assert cert["passed"]
    # closed-form roots of c (max(R,1)+1)^2 + K R = R with the rounded-free coefficients
    c = max(TAIL_C) * 3 / 1000 / (2 * K)
    kf = th.k_factor(*TAIL_C, K, M, 0.11)
    R0 = 4 * c / (1 - kf)
    # for R > 1: c R^2 + (2c + kf - 1) R + c = 0
    b = 2 * c + kf - 1
    R1 = (-b + math.sqrt(b * b - 4 * c * c)) / (2 * c)
    assert iv.R0 == pytest.approx(R0, rel=1e-5)
    assert iv.R1 == pytest.approx(R1, rel=1e-5)


def test_interval_none_for_dominating_phi(problem):
    big = BoundFamily("Linf", "r*10*exp(0)")
    lhs = lambda R: th.existence_lhs(problem, K, M, TAIL_C, big, R).total
    assert th.find_R_interval(lhs) is None
    dominated = BoundFamily("L1", "exp(-t)*r*10")
    lhs = lambda R: th.existence_lhs(problem, K, M, TAIL_C, dominated, R).total
    assert th.find_R_interval(lhs) is None


def test_interval_open_ended_for_linear_lhs():
    iv = th.find_R_interval(lambda R: 0.5 * R)
    assert iv.open_low and iv.open_high
    assert iv.R0 == 1e-6 and iv.R1 == 1e6


def test_faithful_constants_admit_no_radius(problem, bounds, constants):
    lhs = lambda R: th.existence_lhs(problem, K, M, constants, bounds, R, 1.0).total
    assert th.k_factor(constants.C1, constants.C2, K, M, 0.11) > 1
    assert th.find_R_interval(lhs) is None


def test_ball_invariance_derived(problem, gk, gk_derived, bounds):
    bi = th.check_ball_invariance_derived(gk_derived, problem, bounds, 1.0, n_nodes=120)
    assert bi.sup_value > 0 and bi.sup_derivative > 0
    giant = BoundFamily("Linf", "1e6*(1 + r)")
    assert not th.check_ball_invariance_derived(gk_derived, problem, giant, 1.0, n_nodes=120).passed
    # zero majorant and a small radius: only (k+M) R B-terms remain
    zero = BoundFamily("Linf", "0*r")
    kc = kernel_constants(gk_derived)
    R = 1.0
    bi = th.check_ball_invariance_derived(gk_derived, problem, zero, R, n_nodes=120)
    assert bi.sup_value <= (K + M) * R * kc.B1 + 1e-8
    with pytest.raises(ValueError):
        th.check_ball_invariance_derived(gk, problem, bounds, 1.0)


def test_bracket_verification(problem, bracket):
    rep = th.verify_bracket(problem, bracket)
    assert rep.passed, str(rep)
    assert len(rep.checks) == 7
    margins = {c.name: c for c in rep.checks}
    assert "min margin 0 " in margins["beta'' <= f(t,beta,beta')"].detail
    assert rep.limits["alpha"]["sum"] == pytest.approx(-0.0052, abs=1e-4)
    swapped = BracketPair("1", ALPHA_EXAMPLE)
    assert not th.verify_bracket(problem, swapped).passed


def test_bracket_alpha_derivative_sum_oracle(problem):
    a = lambda t: 3 / 400 * (-(t + 1) * math.exp(-t) + (t * t - t) / (t * t + 1))
    da = lambda t: 3 / 400 * (t * math.exp(-t) + (t * t + 2 * t - 1) / (t * t + 1) ** 2)
    assert a(0) == -0.0075
    assert 0.11 * da(0) + 0.89 * da(0.11) == pytest.approx(-0.0052, abs=1e-4)
    rep = th.verify_bracket(problem, BracketPair(ALPHA_EXAMPLE, "1"))
    assert rep.limits["alpha"]["sum"] == pytest.approx(0.11 * da(0) + 0.89 * da(0.11), abs=1e-7)


def test_monotone_in_y(problem):
    grid = (np.linspace(0, 10, 11), np.linspace(-3, 3, 13), np.linspace(-5, 5, 21))
    assert th.check_monotone_in_y(problem, *grid).passed
    neg = MultipointProblem([1.0], [0.0], "-y")
    v = th.check_monotone_in_y(neg, *grid)
    assert not v.passed and v.counterexample is not None
    flat = MultipointProblem([1.0], [0.0], "sin(t)*x")
    assert th.check_monotone_in_y(flat, *grid).passed
    with pytest.raises(ValueError):
        th.check_monotone_in_y(problem, [], [0], [0, 1])


@pytest.mark.parametrize("slope", [-2.0, -0.1, 0.0, 0.7])
def test_monotone_agrees_with_sign_of_slope(slope):
    p = MultipointProblem([1.0], [0.0], f"({slope})*y*(1 + t^2) + x")
    v = th.check_monotone_in_y(p, np.linspace(0, 3, 4), [0.0, 1.0], np.linspace(-1, 1, 5))
    assert v.passed == (slope >= 0)


def test_norm_sup_of():
    assert th.norm_sup_of(ALPHA_EXAMPLE) == pytest.approx(0.0087, abs=5e-4)
    assert th.norm_sup_of("1") == 1.0
    assert th.norm_sup_of("0") == 0.0
    assert th.norm_sup_of("t*exp(-t)") == pytest.approx(math.exp(-1), abs=1e-12)


def test_worked_example_admits_no_bounded_solution():
    # With y = u', the equation reads y' = g(t,u)(y - 1) with g >= 0, so y - 1 keeps its
    # sign.  For u'(0) = a < 1, u' decreases, hence sum alpha_i u'(xi_i) > u'(+inf) and the
    # condition at infinity fails; for a >= 1, u >= t is unbounded.  Integrate and confirm.
    g = lambda t, x: (2 + math.sin(t)) / 1000 * math.exp(-abs(x)) * abs(1 - x) / (x * x + 1)

    def rhs(t, z):
        return [z[1], g(t, z[0]) * (z[1] - 1)]

    for a in (-1.0, -0.2, 0.0, 0.3, 0.9, 0.999):
        sol = integrate.solve_ivp(rhs, (0, 200), [0.0, a], dense_output=True, rtol=1e-10, atol=1e-12)
        d = lambda t: sol.sol(t)[1]
        gap = 0.11 * d(0.0) + 0.89 * d(0.11) - d(200.0)
        assert gap > 0, a
        assert np.all(np.diff(sol.y[1]) <= 1e-12)
    sol = integrate.solve_ivp(rhs, (0, 50), [0.0, 1.0], rtol=1e-10)
    np.testing.assert_allclose(sol.y[0], sol.t, rtol=1e-8)
