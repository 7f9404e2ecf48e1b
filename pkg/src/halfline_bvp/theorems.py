"""Checkable forms of the existence hypotheses.

``existence_lhs`` evaluates the radius inequality left-hand side

    Cmax * max{ sup_{t > xi_{m-1}} e^{-kt/2} int_0^t e^{-ks/2} phi_R(s) ds,
                int_0^{xi_{m-1}} e^{-ks/2} phi_R(s) ds }
    + Cmax * max{1/2, 2(1 - e^{-k xi_{m-1}/2})} * (1 + M/k) * R

with Cmax = max{C1, C2} and phi evaluated at max{R, R~} when a bracket radius
R~ is supplied.  The admissible radii are those with LHS(R) < R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .expr import Expression
from .fixpoint import make_grid
from .kernel import GreenKernel, KernelConstants
from .model import BoundFamily, BracketPair, Check, MultipointProblem, ValidationReport, _as_expr
from .model import SCALAR_VARS
from .quad import cumulative_integral, gk15, golden_max, integrate_interval, integrate_segments

RAY_BOUNDS = ("direct", "sup_majorant")
R_SCAN = (1e-6, 1e6)
R_REL_TOL = 1e-6
SCAN_PER_DECADE = 20


def _phi_at(bf: BoundFamily, r: float):
    return lambda s: np.broadcast_to(np.asarray(bf(s, r), dtype=float), np.shape(s))


def ray_coefficient(bf: BoundFamily, r: float, k: float, t_min: float,
                    ray_bound: str = "direct", tol: float = 1e-12):
    """sup_{t > t_min} e^{-kt/2} int_0^t e^{-ks/2} phi_r(s) ds  ->  (value, argmax).

    ``ray_bound="sup_majorant"`` instead returns the cruder bound obtained by
    replacing phi_r with its sup norm, sup_t (2/k) ||phi_r|| e^{-kt/2}(1 - e^{-kt/2}).
    """
    if ray_bound not in RAY_BOUNDS:
        raise ValueError(f"ray_bound must be one of {RAY_BOUNDS}")
    phi = _phi_at(bf, r)
    c = k / 2
    if ray_bound == "sup_majorant":
        probe = np.linspace(0.0, t_min + 60.0 / c, 20001)
        sup_phi = float(np.max(phi(probe)))
        # q(1-q) with q = e^{-kt/2} <= e^{-k t_min/2}, maximal at q = 1/2
        q_star = min(0.5, math.exp(-c * t_min))
        return (2.0 / k) * sup_phi * q_star * (1 - q_star), -math.log(q_star) / c
    w = lambda s: np.exp(-c * s) * phi(s)
    pre, _ = integrate_interval(w, 0.0, t_min) if t_min > 0 else (0.0, 0.0)
    # grow the window until the bound on the remaining ray drops below the best value
    span = 10.0 / c
    hi = t_min + span
    step = 1.0 / (32.0 * c)
    # error budget relative to the size of the integral
    scale = max(1.0, float(np.max(phi(np.linspace(0.0, hi, 257)))) / c)
    while True:
        grid = np.linspace(t_min, hi, int(math.ceil((hi - t_min) / step)) + 1)
        cum, _ = cumulative_integral(w, grid, abs_tol=tol * scale)
        cum = cum + pre
        F = np.exp(-c * grid) * cum
        i = int(np.argmax(F))
        sup_tail_phi = float(np.max(phi(np.linspace(hi, hi + span, 2001))))
        # for t > hi:  F(t) <= e^{-c hi} (cum(hi) + sup phi * e^{-c hi} / c)
        bound = math.exp(-c * hi) * (cum[-1] + sup_tail_phi * math.exp(-c * hi) / c)
        if bound < F[i] or hi - t_min > 1e3 / c:
            break
        hi = t_min + 2 * (hi - t_min)
    if i in (0, grid.size - 1):
        return float(F[i]), float(grid[i])
    a, b = grid[i - 1], grid[i + 1]
    base = cum[i - 1]

    def Fx(t):
        # one panel is exact to rounding on a cell of width 1/(16c)
        extra = gk15(w, a, t)[0] if t > a else 0.0
        return math.exp(-c * t) * (base + extra)
    # F is flat at the maximum, so t to 1e-7 pins the value to ~1e-14
    x, fx = golden_max(Fx, a, b, 1e-7, fa=float(F[i - 1]), fb=float(F[i + 1]))
    if fx >= F[i]:
        return float(fx), float(x)
    return float(F[i]), float(grid[i])


def compact_coefficient(bf: BoundFamily, r: float, k: float, xi_last: float) -> float:
    """int_0^{xi_{m-1}} e^{-ks/2} phi_r(s) ds."""
    if xi_last <= 0:
        return 0.0
    phi = _phi_at(bf, r)
    return integrate_interval(lambda s: np.exp(-k * s / 2) * phi(s), 0.0, xi_last,
                              rel_tol=1e-12, abs_tol=1e-15)[0]


def k_factor(C1: float, C2: float, k: float, M: float, xi_last: float) -> float:
    return max(C1, C2) * max(0.5, 2 * (1 - math.exp(-k * xi_last / 2))) * (1 + M / k)


@dataclass
class LHSTerms:
    R: float
    r_eval: float
    cmax: float
    ray: float
    ray_argmax: float
    compact: float
    first: float
    k_factor: float
    linear: float
    total: float
    ray_bound: str


def _constants(constants):
    if isinstance(constants, KernelConstants):
        if constants.C1 is None:
            raise ValueError("envelope constants exist only for the as_printed kernel")
        return constants.C1, constants.C2
    C1, C2 = constants
    return float(C1), float(C2)


def existence_lhs(p: MultipointProblem, k: float, M: float, constants, bf: BoundFamily,
                  R: float, rtilde: Optional[float] = None,
                  ray_bound: str = "direct") -> LHSTerms:
    """Left-hand side of the radius inequality with its decomposition.

    ``constants`` is a KernelConstants (as_printed) or a pair (C1, C2).
    """
    if not R > 0:
        raise ValueError("R must be positive")
    C1, C2 = _constants(constants)
    cmax = max(C1, C2)
    r_eval = R if rtilde is None else max(R, rtilde)
    ray, arg = ray_coefficient(bf, r_eval, k, p.xi_last, ray_bound)
    comp = compact_coefficient(bf, r_eval, k, p.xi_last)
    first = cmax * max(ray, comp)
    kf = k_factor(C1, C2, k, M, p.xi_last)
    lin = kf * R
    return LHSTerms(R, r_eval, cmax, ray, arg, comp, first, kf, lin, first + lin, ray_bound)


@dataclass
class RInterval:
    R0: float
    R1: float
    open_low: bool
    open_high: bool
    components: int = 1


def find_R_interval(lhs, r_min: float = R_SCAN[0], r_max: float = R_SCAN[1],
                    rel_tol: float = R_REL_TOL, per_decade: int = SCAN_PER_DECADE
                    ) -> Optional[RInterval]:
    """Admissible radii {R : lhs(R) < R} located by a log scan and bisection.

    ``lhs`` maps R to a number.  Returns None when no scanned R is admissible;
    otherwise the widest admissible run (in log R), with flags when it touches
    the scan edges.
    """
    n = max(2, int(round(math.log10(r_max / r_min) * per_decade)) + 1)
    Rs = np.geomspace(r_min, r_max, n)
    g = np.array([lhs(R) - R for R in Rs])
    neg = g < 0
    if not np.any(neg):
        return None
    runs = []
    i = 0
    while i < n:
        if neg[i]:
            j = i
            while j + 1 < n and neg[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    i, j = max(runs, key=lambda r: r[1] - r[0])

    def bisect(lo, hi, lo_neg):
        # g(lo) and g(hi) differ in sign; refine in log space
        while hi / lo - 1 > rel_tol:
            mid = math.sqrt(lo * hi)
            if (lhs(mid) - mid < 0) == lo_neg:
                lo = mid
            else:
                hi = mid
        return math.sqrt(lo * hi)

    R0 = Rs[0] if i == 0 else bisect(Rs[i - 1], Rs[i], False)
    R1 = Rs[-1] if j == n - 1 else bisect(Rs[j], Rs[j + 1], True)
    return RInterval(float(R0), float(R1), i == 0, j == n - 1, len(runs))


def interval_certificate(lhs, iv: RInterval, margin: float = 1e-4) -> dict:
    """lhs(R) < R at five interior points and lhs(R) > R just outside closed ends."""
    inner = np.geomspace(iv.R0, iv.R1, 7)[1:-1]
    out = {"inner": [(float(R), float(lhs(R) - R)) for R in inner]}
    ok = all(v < 0 for _, v in out["inner"])
    if not iv.open_low:
        R = iv.R0 * (1 - margin)
        out["below"] = float(lhs(R) - R)
        ok &= out["below"] > 0
    if not iv.open_high:
        R = iv.R1 * (1 + margin)
        out["above"] = float(lhs(R) - R)
        ok &= out["above"] > 0
    out["passed"] = bool(ok)
    return out


# ---------------------------------------------------------------- derived kernel

@dataclass
class BallInvariance:
    passed: bool
    sup_value: float
    sup_derivative: float
    R: float
    t_window: float


def check_ball_invariance_derived(gk: GreenKernel, p: MultipointProblem, bf: BoundFamily,
                                  R: float, n_nodes: int = 400) -> BallInvariance:
    """sup_t int |G(t,s)| (phi_R(s) + (k+M) R) ds < R, and likewise with |dG/dt|.

    The suprema are taken over a graded grid on [0, 2 T_max]; the s-integral
    for each t runs over [0, max(t, xi_{m-1})], the kernel's support.
    """
    if gk.mode != "derived":
        raise ValueError("ball invariance check is for the derived kernel")
    k, M = gk.shift.k, gk.shift.M
    nodes = make_grid(p, k, n_nodes, t_max=2 * max(20.0 / k, 2 * p.xi_last))
    phi = _phi_at(bf, R)

    def integrand(s):
        w = phi(s) + (k + M) * R
        return np.vstack([np.abs(gk.matrix(nodes, s, "value")),
                          np.abs(gk.matrix(nodes, s, "analytic"))]) * w[None, :]

    vals, _ = integrate_segments(integrand, nodes, rel_tol=1e-8, abs_tol=1e-10)
    n = nodes.size
    s1, s2 = float(np.max(vals[:n])), float(np.max(vals[n:]))
    return BallInvariance(s1 < R and s2 < R, s1, s2, R, float(nodes[-1]))


# ---------------------------------------------------------------- brackets

def _d1(fn, t, h):
    return (fn(t - 2 * h) - 8 * fn(t - h) + 8 * fn(t + h) - fn(t + 2 * h)) / (12 * h)


def _d2(fn, t, h):
    return (-fn(t - 2 * h) + 16 * fn(t - h) - 30 * fn(t) + 16 * fn(t + h)
            - fn(t + 2 * h)) / (12 * h * h)


def _derivs(fn, t, h=1e-3):
    """Fourth-order differences; one-sided shift keeps stencils in t >= 0."""
    t = np.asarray(t, dtype=float)
    c = np.maximum(t, 2 * h)
    d1 = _d1(fn, c, h)
    d2 = _d2(fn, c, h)
    # re-centre the few nodes closer than 2h to the origin by Taylor shift
    d1 = d1 + d2 * (t - c)
    return d1, d2


def _limit_derivative(fn, T: float, h=1e-3):
    """Estimate lim_{t->inf} fn'(t) from values at T and 2T (1/t^2 model)."""
    a = float(_d1(fn, np.array([T]), h)[0])
    b = float(_d1(fn, np.array([2 * T]), h)[0])
    return (4 * b - a) / 3, a, b


@dataclass
class BracketReport:
    checks: list
    grid_size: int
    t_check: float
    derivative_step: float
    limits: dict = field(default_factory=dict)
    ode_margins: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def margins(self) -> dict:
        return {c.name: c.detail for c in self.checks}

    def __str__(self):
        return str(ValidationReport(self.checks))


def verify_bracket(p: MultipointProblem, br: BracketPair, grid=None, t_check=None,
                   n: int = 2000, h: float = 1e-3, tol: float = 1e-9) -> BracketReport:
    """Lower/upper-solution inequalities for (alpha, beta), sampled on a grid.

    alpha'' >= f(t, alpha, alpha'), alpha(0) <= 0, alpha'(inf) >= sum a_i alpha'(xi_i),
    and the reversed inequalities for beta, plus alpha <= beta.  The
    differential inequalities use finite differences of step h and accept a
    deficit of at most ``tol`` (difference noise); the limits at infinity are
    extrapolated from t_check and 2 t_check.
    """
    T = t_check if t_check is not None else 2 * p.xi_last + 10.0
    if grid is None:
        grid = np.linspace(0.0, T, n)
    grid = np.asarray(grid, dtype=float)
    interior = grid[1:-1]
    xis = np.asarray(p.xis)
    a_fn, b_fn = br.lower, br.upper
    checks = []
    limits, ode_margins = {}, {}
    for name, fn, sign in (("alpha", a_fn, 1.0), ("beta", b_fn, -1.0)):
        d1, d2 = _derivs(fn, interior, h)
        fv = np.broadcast_to(p.eval_f(interior, fn(interior), d1), interior.shape)
        diff = sign * (d2 - fv)
        # an exactly constant function has d2 == 0 identically; no tolerance needed then
        worst = float(np.min(diff)) + 0.0  # no "-0" in reports
        ode_margins[name] = worst
        op = ">=" if sign > 0 else "<="
        checks.append(Check(f"{name}'' {op} f(t,{name},{name}')", worst >= -tol,
                            f"min margin {worst:.6g} on {interior.size} sampled nodes"))
        v0 = float(np.asarray(fn(np.array([0.0])))[0])
        checks.append(Check(f"{name}(0) {'<=' if sign > 0 else '>='} 0", sign * v0 <= 0,
                            f"{name}(0) = {v0:.6g}"))
        lim, at_T, at_2T = _limit_derivative(fn, T, h)
        dxi, _ = _derivs(fn, xis, h)
        bsum = float(np.dot(p.alphas, dxi))
        limits[name] = {"limit": lim, "at_T": at_T, "at_2T": at_2T, "sum": bsum}
        margin = sign * (lim - bsum)
        checks.append(Check(f"{name}'(inf) {op} sum alpha_i {name}'(xi_i)", margin >= -tol,
                            f"{name}'(inf) ~ {lim:.6g}, sum = {bsum:.6g}"))
    lo, hi = a_fn(grid), b_fn(grid)
    gap = float(np.min(hi - lo))
    checks.append(Check("alpha <= beta", gap >= 0, f"min(beta - alpha) = {gap:.6g}"))
    return BracketReport(checks, int(grid.size), float(T), h, limits, ode_margins)


@dataclass
class MonotoneVerdict:
    passed: bool
    checked: int
    counterexample: Optional[tuple] = None


def check_monotone_in_y(p: MultipointProblem, ts, xs, ys, tol: float = 1e-10) -> MonotoneVerdict:
    """f(t, x, y2) >= f(t, x, y1) - tol for adjacent y1 < y2 on the sampled grid."""
    ts, xs, ys = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (ts, xs, ys))
    if ts.size == 0 or xs.size == 0 or ys.size < 2:
        raise ValueError("grid must be non-empty with at least two y values")
    ys = np.sort(ys)
    T, X, Y = np.meshgrid(ts, xs, ys, indexing="ij")
    F = np.broadcast_to(p.eval_f(T, X, Y), T.shape)
    drop = F[..., :-1] - F[..., 1:]
    bad = np.argwhere(drop > tol)
    if bad.size:
        i, j, l = bad[0]
        ce = (float(ts[i]), float(xs[j]), float(ys[l]), float(ys[l + 1]))
        return MonotoneVerdict(False, int(drop.size), ce)
    return MonotoneVerdict(True, int(drop.size))


def norm_sup_of(e, horizon: float = 200.0, n: int = 20001) -> float:
    """sup_{t >= 0} |e(t)|: dense grid on [0, horizon] plus golden refinement.

    ``horizon`` is the decay hint: beyond it |e| is assumed not to exceed its
    value on the grid (checked against a coarse probe out to 10x horizon).
    """
    ex: Expression = _as_expr(e, SCALAR_VARS)
    fn = lambda t: np.abs(np.broadcast_to(ex(t=t), np.shape(t)))
    grid = np.linspace(0.0, horizon, n)
    vals = fn(grid)
    i = int(np.argmax(vals))
    best = float(vals[i])
    if 0 < i < n - 1:
        _, fx = golden_max(lambda x: float(fn(np.array(x))), grid[i - 1], grid[i + 1], 1e-12)
        best = max(best, fx)
    far = float(np.max(fn(np.linspace(horizon, 10 * horizon, 2001))))
    return max(best, far)


# ---------------------------------------------------------------- report

@dataclass
class TheoremReport:
    mode: str
    C1: float
    C2: float
    k_factor: float
    I1: float
    I2: float
    combined: float
    interval: Optional[RInterval]
    rtilde: Optional[float]
    verdicts: dict
    lhs: object = field(repr=False, default=None)
    ray_bound: str = "direct"
