"""Adaptive Gauss-Kronrod quadrature on [0, inf) and suprema on rays.

The half-line is cut at a point T beyond which the integrand is bounded by a
declared exponential envelope A*exp(-c*s); T is chosen so that the neglected
tail (A/c)*exp(-c*T) is below half the absolute tolerance.  The finite part is
integrated with a 7/15-point Gauss-Kronrod pair on segments that never
straddle a declared breakpoint.

Integrands are vectorised: ``evaluator(s)`` receives a 1-D array and returns
either an array of the same length or a 2-D array ``(rows, len(s))`` for
vector-valued integrals (used by the integral operators, one row per node).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_REL_TOL = 1e-8
DEFAULT_ABS_TOL = 1e-10
MAX_SUBDIVISIONS = 20_000
MIN_PANELS = 32  # initial panels across the whole range

# Kronrod nodes on [0, 1] side of [-1, 1]; odd indices are the Gauss-7 nodes.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])           # 15 nodes, ascending
KRONROD_W = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_W = np.zeros(15)
GAUSS_W[[1, 3, 5]] = _WG[:3]
GAUSS_W[[9, 11, 13]] = _WG[2::-1]
GAUSS_W[7] = _WG[3]


class QuadratureError(RuntimeError):
    """Adaptive subdivision did not reach the requested tolerance."""


@dataclass(frozen=True)
class Integrand:
    """Vectorised integrand with kink locations and an optional tail envelope.

    ``envelope=(A, c)`` asserts |g(s)| <= A*exp(-c*s) beyond the last
    breakpoint.
    """

    evaluator: Callable
    breakpoints: Sequence[float] = ()
    envelope: Optional[tuple] = None

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        if any(b2 < b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be sorted ascending")
        object.__setattr__(self, "breakpoints", bp)
        if self.envelope is not None:
            A, c = self.envelope
            if not c > 0:
                raise ValueError("envelope decay rate must be positive")
            if not A >= 0:
                raise ValueError("envelope amplitude must be non-negative")


def _rule(evaluator, a: np.ndarray, b: np.ndarray):
    """Apply GK15 to many segments at once.  Returns (kronrod, |K - G|)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    s = (mid[:, None] + half[:, None] * NODES[None, :]).ravel()
    vals = np.asarray(evaluator(s), dtype=float)
    if vals.ndim == 1:
        vals = vals[None, :]
    if vals.shape[-1] != s.size:
        vals = np.broadcast_to(vals, (vals.shape[0], s.size))
    if not np.all(np.isfinite(vals)):
        bad = s[np.flatnonzero(~np.all(np.isfinite(vals), axis=0))[0]]
        raise QuadratureError(f"integrand is not finite at s = {bad!r}")
    vals = vals.reshape(vals.shape[0], a.size, 15)
    k = vals @ KRONROD_W * half
    g = vals @ GAUSS_W * half
    return k, np.abs(k - g)


def integrate_segments(
    evaluator,
    edges: Sequence[float],
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    max_subdivisions: int = MAX_SUBDIVISIONS,
):
    """Integrate over [edges[0], edges[-1]] never crossing an interior edge.

    Returns ``(value, error)``; both are arrays of shape ``(rows,)`` for
    vector-valued evaluators and floats otherwise.
    """
    edges = np.unique(np.asarray(edges, dtype=float))
    if edges.size < 2:
        probe = np.asarray(evaluator(np.array([edges[0] if edges.size else 0.0])))
        zero = np.zeros(probe.shape[0]) if probe.ndim == 2 else 0.0
        return zero, zero * 0.0
    a = edges[:-1].copy()
    b = edges[1:].copy()
    k, e = _rule(evaluator, a, b)
    scalar = k.shape[0] == 1
    seg_a, seg_b = list(a), list(b)
    seg_k = [k[:, i] for i in range(a.size)]
    seg_e = [e[:, i] for i in range(a.size)]
    total = k.sum(axis=1)
    err = e.sum(axis=1)
    # Priority on the worst row-relative excess for each segment.
    heap = [(-float(np.max(seg_e[i])), i) for i in range(a.size)]
    heapq.heapify(heap)
    n_sub = 0

    def converged():
        return np.all(err <= np.maximum(abs_tol, rel_tol * np.abs(total)))

    while not converged():
        if n_sub >= max_subdivisions:
            raise QuadratureError(
                f"no convergence after {n_sub} subdivisions "
                f"(error estimate {float(np.max(err)):.3g})"
            )
        batch = []
        # Bisect a batch of the worst segments per pass to keep numpy calls large.
        for _ in range(min(len(heap), max(1, len(heap) // 8))):
            batch.append(heapq.heappop(heap)[1])
        ba = np.array([seg_a[i] for i in batch])
        bb = np.array([seg_b[i] for i in batch])
        mid = 0.5 * (ba + bb)
        if np.any((mid <= ba) | (mid >= bb)):
            raise QuadratureError("segment width below floating-point resolution")
        k2, e2 = _rule(evaluator, np.concatenate([ba, mid]), np.concatenate([mid, bb]))
        nb = len(batch)
        for j, i in enumerate(batch):
            total -= seg_k[i]
            err -= seg_e[i]
            left, right = j, j + nb
            seg_k[i], seg_e[i] = k2[:, left], e2[:, left]
            seg_b[i] = mid[j]
            seg_a.append(mid[j])
            seg_b.append(bb[j])
            seg_k.append(k2[:, right])
            seg_e.append(e2[:, right])
            new = len(seg_a) - 1
            total += seg_k[i] + seg_k[new]
            err += seg_e[i] + seg_e[new]
            heapq.heappush(heap, (-float(np.max(seg_e[i])), i))
            heapq.heappush(heap, (-float(np.max(seg_e[new])), new))
        n_sub += nb
        # Cancellation in the running sums can leave tiny negative errors.
        err = np.maximum(err, 0.0)
    total = np.sum(np.array(seg_k), axis=0)
    err = np.sum(np.array(seg_e), axis=0)
    if scalar:
        return float(total[0]), float(err[0])
    return total, err


def tail_cutoff(envelope, abs_tol: float, start: float = 0.0) -> float:
    """Smallest T >= start with (A/c)*exp(-c*T) <= abs_tol/2."""
    A, c = envelope
    if A <= 0:
        return start
    T = math.log(2.0 * A / (c * abs_tol)) / c
    return max(start, T)


def integrate_halfline(
    g: Integrand,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    cutoff: Optional[float] = None,
    start: float = 0.0,
):
    """Integrate ``g`` over [start, inf), or over [start, cutoff] when given.

    Without an explicit cutoff the integrand must carry an envelope; the
    neglected tail is then at most ``abs_tol/2`` and the interior is computed
    to the remaining budget.
    """
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    bps = [b for b in g.breakpoints if b > start]
    if cutoff is None:
        if g.envelope is None:
            raise ValueError(
                "integrand over [0, inf) needs an exponential envelope or an explicit cutoff"
            )
        last = bps[-1] if bps else start
        T = tail_cutoff(g.envelope, abs_tol, start=last)
        tail_bound = (g.envelope[0] / g.envelope[1]) * math.exp(-g.envelope[1] * T)
        budget = abs_tol / 2.0
    else:
        T = float(cutoff)
        tail_bound = 0.0
        budget = abs_tol
        bps = [b for b in bps if b < T]
    if T <= start:
        return integrate_segments(g.evaluator, [start, start], rel_tol, budget)
    edges = [start, *bps, T] if not bps or bps[-1] < T else [start, *bps]
    edges = _presplit(edges, (T - start) / MIN_PANELS)
    val, err = integrate_segments(g.evaluator, edges, rel_tol, budget)
    return val, err + tail_bound


def _presplit(edges, max_width):
    """Cut long segments so the error estimate is not fooled by one wide panel."""
    out = [edges[0]]
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(1, int(math.ceil((b - a) / max_width)))
        out.extend(np.linspace(a, b, n + 1)[1:].tolist())
    return out


def integrate_interval(fn, a: float, b: float, breakpoints=(), rel_tol=DEFAULT_REL_TOL,
                       abs_tol=DEFAULT_ABS_TOL):
    """Convenience wrapper for a finite interval."""
    inner = [x for x in breakpoints if a < x < b]
    edges = _presplit([a, *inner, b], (b - a) / MIN_PANELS) if b > a else [a, b]
    return integrate_segments(fn, edges, rel_tol, abs_tol)


# ---------------------------------------------------------------- suprema

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(F, a: float, b: float, tol: float = 1e-10, fa=None, fb=None):
    """Golden-section search for the maximum of a unimodal F on [a, b].

    Returns ``(x, F(x))`` for the best point seen, endpoints included.
    """
    best_x, best_f = a, F(a) if fa is None else fa
    fbv = F(b) if fb is None else fb
    if fbv > best_f:
        best_x, best_f = b, fbv
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = F(c), F(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = F(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = F(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def grid_then_golden(F, grid, tol: float = 1e-10):
    """Maximise F over sorted ``grid`` points, then refine around the best cell."""
    grid = np.asarray(grid, dtype=float)
    vals = np.array([F(x) for x in grid])
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    if hi <= lo:
        return float(grid[i]), float(vals[i])
    x, fx = golden_max(F, lo, hi, tol)
    if vals[i] >= fx:
        return float(grid[i]), float(vals[i])
    return float(x), float(fx)


def sup_on_ray(F, t_min: float, decay, tol: float = 1e-10, points_per_unit: float = 32.0,
               margin: float = 1e-12):
    """Supremum of a continuous F over [t_min, inf).

    ``decay=(A, c)`` asserts F(t) <= A*exp(-c*t) for large t.  The search window
    is extended until the envelope lies below the best value found by
    ``margin``; then the best grid cell is refined by golden section.
    Returns ``(sup_value, argmax)``.
    """
    A, c = decay
    if not c > 0:
        raise ValueError("decay rate must be positive")
    span = 10.0 / c
    lo = float(t_min)
    best_x, best_f = lo, F(lo)
    hi = lo + span
    grid_pts = [lo]
    grid_vals = [best_f]
    while True:
        n = max(8, int(math.ceil((hi - grid_pts[-1]) * points_per_unit * c)))
        new = np.linspace(grid_pts[-1], hi, n + 1)[1:]
        for x in new:
            fx = F(x)
            grid_pts.append(float(x))
            grid_vals.append(fx)
            if fx > best_f:
                best_x, best_f = float(x), fx
        target = best_f - margin
        if target > 0 and A * math.exp(-c * hi) <= target:
            break
        if target <= 0 and A * math.exp(-c * hi) <= margin:
            break
        if hi - lo > 1e4 / c:
            break
        hi = lo + 2.0 * (hi - lo)
    i = int(np.argmax(grid_vals))
    a = grid_pts[max(i - 1, 0)]
    b = grid_pts[min(i + 1, len(grid_pts) - 1)]
    x, fx = golden_max(F, a, b, tol, fa=grid_vals[max(i - 1, 0)],
                       fb=grid_vals[min(i + 1, len(grid_pts) - 1)])
    if fx >= best_f:
        return fx, x
    return best_f, best_x


def cumulative_integral(fn, grid, abs_tol: float = DEFAULT_ABS_TOL, max_halvings: int = 12):
    """Running integrals int_{grid[0]}^{grid[i]} fn for a sorted grid.

    One GK15 panel per cell; cells whose error estimate exceeds their share of
    ``abs_tol`` are split until they pass.  Returns ``(values, error)``.
    """
    grid = np.asarray(grid, dtype=float)
    a, b = grid[:-1], grid[1:]
    k, e = _rule(fn, a, b)
    k, e = k[0], e[0]
    share = abs_tol / max(1, a.size)
    bad = np.flatnonzero(e > share)
    nsub = 2
    while bad.size and nsub <= 2 ** max_halvings:
        pts = np.linspace(a[bad], b[bad], nsub + 1)
        ks, es = _rule(fn, pts[:-1].T.ravel(), pts[1:].T.ravel())
        k[bad] = ks[0].reshape(bad.size, nsub).sum(axis=1)
        e[bad] = es[0].reshape(bad.size, nsub).sum(axis=1)
        bad = bad[e[bad] > share]
        nsub *= 2
    out = np.concatenate([[0.0], np.cumsum(k)])
    return out, float(np.sum(e))


def gk15(fn, a: float, b: float):
    """Single Gauss-Kronrod panel on [a, b]: ``(value, error_estimate)``."""
    k, e = _rule(fn, np.array([float(a)]), np.array([float(b)]))
    return float(k[0, 0]), float(e[0, 0])
