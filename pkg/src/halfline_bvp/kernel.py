"""Green's kernel of v'' + k v' + M v = w with u(0)=0, v'(inf)=sum alpha_i v'(xi_i).

Two constructions are available and every result is labelled with its mode:

``as_printed``
    The four-branch closed form with frequency sqrt(4M - k^2), prefactor
    exp(-k(t+s)/2)/gamma and the coefficient h_l(s).  The accompanying
    derivative comes in a ``printed`` variant (cos(gamma(s-t)) without the
    gamma factor) and an ``analytic`` variant (exact t-derivative of G).

``derived``
    Variation of parameters with y1(t) = exp(-kt/2) sin(w t),
    w = sqrt(4M - k^2)/2, K(tau) = exp(-k tau/2) sin(w tau)/w and
    G(t, s) = [t > s] K(t - s) + c1(s) y1(t).  This kernel does satisfy the
    differential equation and both boundary conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _pycore, backend
from .model import MultipointProblem
from .quad import Integrand, golden_max, integrate_halfline, integrate_segments, sup_on_ray

MODES = ("as_printed", "derived")
DEGENERACY_TOL = 1e-10
_MODE_CODE = {"as_printed": _pycore.AS_PRINTED, "derived": _pycore.DERIVED}
_WHICH = {"value": _pycore.VALUE, "printed": _pycore.DT_PRINTED, "analytic": _pycore.DT_ANALYTIC}


class NonOscillatoryError(ValueError):
    """k^2 >= 4M: the shifted operator has real characteristic roots."""


class DegenerateShiftError(ValueError):
    """The kernel denominator vanishes; choose a different (k, M)."""


@dataclass(frozen=True)
class ShiftParams:
    k: float
    M: float
    gamma: float
    mode: str = "as_printed"


def make_shift(k: float, M: float, mode: str = "as_printed") -> ShiftParams:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not (k > 0 and M > 0):
        raise ValueError("k and M must be positive")
    disc = 4.0 * M - k * k
    if disc <= 0:
        raise NonOscillatoryError(f"k^2 - 4M = {-disc:g} >= 0; need k^2 < 4M")
    gamma = math.sqrt(disc)
    if mode == "derived":
        gamma /= 2.0
    return ShiftParams(float(k), float(M), gamma, mode)


def denominator_terms(p: MultipointProblem, sp: ShiftParams):
    """Summands of D and their magnitudes before cancellation."""
    xi = np.asarray(p.xis)
    w = np.asarray(p.alphas) * np.exp(-sp.k * xi / 2)
    a = -(sp.k / 2) * np.sin(sp.gamma * xi)
    b = sp.gamma * np.cos(sp.gamma * xi)
    return w * (a + b), np.abs(w) * (np.abs(a) + np.abs(b))


def denominator(p: MultipointProblem, sp: ShiftParams) -> float:
    """D = sum alpha_i exp(-k xi_i/2)(-(k/2) sin(g xi_i) + g cos(g xi_i)).

    Raises DegenerateShiftError when |D| <= 1e-10 times the sum of the
    magnitudes of everything that was added (so a single vanishing term counts).
    """
    terms, mags = denominator_terms(p, sp)
    D = float(np.sum(terms))
    scale = float(np.sum(mags))
    if abs(D) <= DEGENERACY_TOL * scale or scale == 0.0:
        raise DegenerateShiftError(
            f"kernel denominator D = {D:.3e} is degenerate (scale {scale:.3e}); "
            "pick a different (k, M)"
        )
    return D


class GreenKernel:
    """Evaluable kernel for a problem and shift; immutable after construction."""

    def __init__(self, problem: MultipointProblem, shift: ShiftParams):
        self.problem = problem
        self.shift = shift
        self.denominator = denominator(problem, shift)
        xis = problem.xis
        self.segments = [(l, xis[l - 2], xis[l - 1]) for l in range(2, problem.m)]
        self.tail_start = xis[-1]
        self._xis = np.asarray(xis, dtype=float)
        self._alphas = np.asarray(problem.alphas, dtype=float)
        self._mode = _MODE_CODE[shift.mode]

    @property
    def mode(self) -> str:
        return self.shift.mode

    @property
    def k(self) -> float:
        return self.shift.k

    @property
    def gamma(self) -> float:
        return self.shift.gamma

    def __repr__(self):
        return (f"GreenKernel(mode={self.mode}, k={self.k:g}, M={self.shift.M:g}, "
                f"gamma={self.gamma:.6g}, D={self.denominator:.6g})")

    def _args(self):
        return (self.k, self.gamma, self._xis, self._alphas, self.denominator)

    def coef(self, s):
        """h(s) (as_printed) or c1(s) (derived) at arbitrary s >= 0."""
        return backend.interior_coef(self._mode, np.asarray(s, dtype=float), *self._args())

    def h(self, l: int, s: float) -> float:
        """Displayed h_l(s) for the interior segment xi_{l-1} <= s < xi_l."""
        m = self.problem.m
        if not 2 <= l <= m - 1:
            raise IndexError(f"segment index l={l} outside 2..{m - 1}")
        lo, hi = self.problem.xis[l - 2], self.problem.xis[l - 1]
        if not lo <= s < hi:
            raise ValueError(f"s={s} is not in segment [{lo}, {hi})")
        k, g = self.k, self.gamma
        acc = 0.0
        for i in range(l - 1, m - 1):
            xi, a = self.problem.xis[i], self.problem.alphas[i]
            acc += a * math.exp(-k * xi / 2) * (
                -(k / 2) * math.sin(g * (s - xi)) + g * math.cos(g * (s - xi)))
        return acc / self.denominator

    def _values(self, which, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if np.any(t < 0) or np.any(s < 0):
            raise ValueError("kernel is defined for t, s >= 0")
        out = _pycore.kernel_values(self._mode, which, t, s, *self._args())
        return float(out) if out.ndim == 0 else out

    def green(self, t, s):
        """G(t, s), elementwise over broadcastable arguments."""
        return self._values(_pycore.VALUE, t, s)

    def green_dt(self, t, s, formula: str = "analytic", return_kink: bool = False):
        """dG/dt(t, s).  At t == s the limit from t > s is returned.

        ``formula`` is ``"analytic"`` or ``"printed"`` (as_printed mode only).
        With ``return_kink`` a boolean (array) marking t == s is also returned.
        """
        if formula not in ("analytic", "printed"):
            raise ValueError("formula must be 'analytic' or 'printed'")
        if formula == "printed" and self.mode != "as_printed":
            raise ValueError("the printed derivative formula exists only in as_printed mode")
        val = self._values(_WHICH[formula], t, s)
        if return_kink:
            kink = np.asarray(t) == np.asarray(s)
            return val, (bool(kink) if kink.ndim == 0 else kink)
        return val

    def matrix(self, t, s, which: str = "value"):
        """Dense matrix over the outer product of ``t`` and ``s`` (fast path)."""
        return backend.kernel_matrix(self._mode, _WHICH[which], np.asarray(t, float),
                                     np.asarray(s, float), *self._args())

    def rescaled(self, t, s, which: str = "value"):
        """|G| or |dG/dt| times exp(k(t+s)/2) on the outer product grid."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        scale = np.exp(self.k * (t[:, None] + s[None, :]) / 2)
        return np.abs(self.matrix(t, s, which)) * scale


def rebuild_kernel(p: MultipointProblem, k: float, M: float) -> GreenKernel:
    """Kernel reconstructed from the differential equation and boundary conditions."""
    return GreenKernel(p, make_shift(k, M, "derived"))


# ---------------------------------------------------------------- constants

@dataclass
class KernelConstants:
    mode: str
    derivative: str
    C1: Optional[float]
    C2: Optional[float]
    B1: float
    B2: float
    metadata: dict = field(default_factory=dict)


def _best_t_on_branch(gk, which, s, lo, hi, tol):
    """Maximise |rescaled kernel| over t in [lo, hi] for fixed s (one branch)."""
    P = 2 * math.pi / gk.gamma
    n = max(8, int(math.ceil((hi - lo) / (P / 400))))
    ts = np.linspace(lo, hi, n + 1)
    vals = gk.rescaled(ts, np.array([s]), which)[:, 0]
    i = int(np.argmax(vals))
    a, b = ts[max(i - 1, 0)], ts[min(i + 1, ts.size - 1)]
    F = lambda t: float(gk.rescaled(np.array([t]), np.array([s]), which)[0, 0])
    x, fx = golden_max(F, a, b, tol)
    return (x, fx) if fx > vals[i] else (float(ts[i]), float(vals[i]))


def _best_t(gk, which, s, tol):
    """Sup over t >= 0 for fixed s, respecting the kink at t = s."""
    P = 2 * math.pi / gk.gamma
    below = (0.0, 0.0)
    if s > 0:
        below = _best_t_on_branch(gk, which, s, 0.0, math.nextafter(s, 0.0), tol)
    above = _best_t_on_branch(gk, which, s, s, s + P, tol)
    return max(below, above, key=lambda p: p[1])


def _envelope_sup(gk: GreenKernel, which: str, tol: float = 1e-10, n_s: int = 400):
    """Sup of |G| (or |dG/dt|) * exp(k(t+s)/2) per branch family.

    Coarse grid (t step (2 pi/gamma)/400, 400 s-points per interior segment and
    over one tail period) followed by golden-section refinement of the best cell.
    """
    P = 2 * math.pi / gk.gamma
    fams = [(f"interior l={l}", lo, hi) for (l, lo, hi) in gk.segments]
    fams.append(("tail", gk.tail_start, gk.tail_start + P))
    out = {}
    for name, lo, hi in fams:
        s_hi = math.nextafter(hi, lo) if name != "tail" else hi
        ss = np.linspace(lo, s_hi, n_s)
        ts = np.arange(0.0, s_hi + P + P / 400, P / 400)
        ts = np.union1d(ts, ss)
        grid = gk.rescaled(ts, ss, which)
        # left limits at the kink t = s
        left = np.array([
            gk.rescaled(np.array([math.nextafter(s, 0.0)]), np.array([s]), which)[0, 0]
            if s > 0 else 0.0 for s in ss
        ])
        j_left = int(np.argmax(left))
        i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
        j = j_left if left[j_left] > grid[i, j] else j

        def over_s(s):
            return _best_t(gk, which, s, tol)[1]

        s_lo = ss[max(j - 1, 0)]
        s_hi_cell = ss[min(j + 1, ss.size - 1)]
        s_star, val = golden_max(over_s, s_lo, s_hi_cell, tol)
        t_star, val = _best_t(gk, which, s_star, tol)
        out[name] = {"sup": float(val), "argmax": (float(t_star), float(s_star)),
                     "grid": (int(ts.size), int(ss.size))}
    return out


def _abs_integral(gk: GreenKernel, which: str, t: float, env_const: Optional[float]):
    """int_0^inf |G(t, s)| ds (or of |dG/dt|)."""
    bps = sorted(set(gk.problem.xis) | {t})
    f = lambda s: np.abs(gk.matrix(np.array([t]), s, which)[0])
    if gk.mode == "as_printed":
        g = Integrand(f, bps, envelope=(env_const * math.exp(-gk.k * t / 2), gk.k / 2))
        return integrate_halfline(g)[0]
    return integrate_halfline(Integrand(f, bps), cutoff=max(t, gk.tail_start))[0]


def kernel_constants(gk: GreenKernel, derivative: Optional[str] = None,
                     tol: float = 1e-10) -> KernelConstants:
    """Envelope constants (as_printed) and L1-in-s bounds (both modes).

    C1, C2 are global suprema over every branch of |G| exp(k(t+s)/2) and
    |dG/dt| exp(k(t+s)/2); the per-branch suprema are kept in ``metadata``.
    """
    if derivative is None:
        derivative = "printed" if gk.mode == "as_printed" else "analytic"
    meta = {"mode": gk.mode, "derivative": derivative, "tolerance": tol}
    C1 = C2 = None
    k = gk.k
    if gk.mode == "as_printed":
        s1 = _envelope_sup(gk, "value", tol)
        s2 = _envelope_sup(gk, derivative, tol)
        C1 = max(v["sup"] for v in s1.values())
        C2 = max(v["sup"] for v in s2.values())
        meta["C1_branches"] = s1
        meta["C2_branches"] = s2
        F1 = lambda t: _abs_integral(gk, "value", t, C1)
        F2 = lambda t: _abs_integral(gk, derivative, t, C2)
        B1, t1 = sup_on_ray(F1, 0.0, (2 * C1 / k, k / 2), tol=1e-6, points_per_unit=8)
        B2, t2 = sup_on_ray(F2, 0.0, (2 * C2 / k, k / 2), tol=1e-6, points_per_unit=8)
    else:
        B1, t1, tail1 = _derived_l1_sup(gk, "value")
        B2, t2, tail2 = _derived_l1_sup(gk, derivative)
        meta["B_tail_bounds"] = (tail1, tail2)
    meta["B_argmax"] = (float(t1), float(t2))
    return KernelConstants(gk.mode, derivative, C1, C2, B1, B2, meta)


def _derived_l1_sup(gk: GreenKernel, which: str):
    """sup_t int |G(t,s)| ds for the derived kernel.

    On [0, T0] by grid + golden; beyond T0 the bound int|K| + |y1(t)| int|c1|
    (or the derivative analogue) is used, so the result is an upper bound.
    """
    k, w = gk.k, gk.gamma
    T0 = gk.tail_start + 40.0 / k
    F = lambda t: _abs_integral(gk, which, t, None)
    ts = np.linspace(0.0, T0, int(T0 * 8) + 2)
    vals = np.array([F(t) for t in ts])
    i = int(np.argmax(vals))
    x, fx = golden_max(F, ts[max(i - 1, 0)], ts[min(i + 1, ts.size - 1)], 1e-6,
                       fa=vals[max(i - 1, 0)], fb=vals[min(i + 1, ts.size - 1)])
    best, arg = (fx, x) if fx > vals[i] else (float(vals[i]), float(ts[i]))
    if which == "value":
        kern = lambda tau: np.abs(np.exp(-k * tau / 2) * np.sin(w * tau) / w)
        hom_amp = 1.0
    else:
        kern = lambda tau: np.abs(np.exp(-k * tau / 2)
                                  * (-(k / 2) * np.sin(w * tau) + w * np.cos(w * tau)) / w)
        hom_amp = math.hypot(k / 2, w)
    K_l1 = integrate_halfline(Integrand(kern, (), envelope=(math.hypot(k / 2, w) / w + 1 / w, k / 2)))[0]
    if gk.tail_start > 0:
        c_l1 = integrate_segments(lambda s: np.abs(gk.coef(s)), [0.0, *gk.problem.xis[1:]])[0]
    else:
        c_l1 = 0.0
    tail_bound = K_l1 + hom_amp * math.exp(-k * T0 / 2) * c_l1
    if tail_bound > best:
        return tail_bound, math.inf, tail_bound
    return best, arg, tail_bound
