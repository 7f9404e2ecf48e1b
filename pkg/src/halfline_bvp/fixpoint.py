"""Grid functions, the integral operators T and T*, Picard iteration and residuals.

A function in X (bounded C^1 on [0, inf) with bounded derivative) is stored as
value/derivative pairs on a graded grid over [0, T_max]; between nodes it is
the cubic Hermite interpolant and beyond T_max both u and u' decay like
exp(-k (t - T_max)/2).
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import backend
from .kernel import GreenKernel
from .model import BracketPair, MultipointProblem
from .quad import Integrand, integrate_halfline

DEFAULT_NODES = 400
MIN_DAMPING = 1.0 / 64
GROWTH_PATIENCE = 5


@dataclass(frozen=True)
class GridFunction:
    nodes: np.ndarray
    u: np.ndarray
    du: np.ndarray
    decay: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        u = np.asarray(self.u, dtype=float)
        du = np.asarray(self.du, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("need at least two nodes")
        if nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must start at 0 and increase strictly")
        if u.shape != nodes.shape or du.shape != nodes.shape:
            raise ValueError("u and du must match the node array")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(du))):
            raise ValueError("grid function has non-finite entries")
        if not self.decay > 0:
            raise ValueError("tail decay must be positive")
        for name, arr in (("nodes", nodes), ("u", u), ("du", du)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def t_max(self) -> float:
        return float(self.nodes[-1])

    def __call__(self, x):
        """(u(x), u'(x)) with Hermite interpolation and the exponential tail."""
        return backend.hermite_eval(self.nodes, self.u, self.du, np.asarray(x, float), self.decay)

    def with_values(self, u, du) -> "GridFunction":
        return GridFunction(self.nodes, u, du, self.decay)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.u - other.u, self.du - other.du)


def norm(u: GridFunction) -> float:
    """max(sup |u_j|, sup |u'_j|); the decaying tail cannot exceed the endpoint."""
    return float(max(np.max(np.abs(u.u)), np.max(np.abs(u.du))))


def default_t_max(p: MultipointProblem, k: float) -> float:
    return max(10.0 * (2.0 / k), 2.0 * p.xi_last)


def make_grid(p: MultipointProblem, k: float, n: int = DEFAULT_NODES,
              t_max: Optional[float] = None, grading: float = 3.0) -> np.ndarray:
    """Geometrically graded nodes on [0, t_max] with every xi_i inserted."""
    if n < 5:
        raise ValueError("need at least 5 nodes")
    T = default_t_max(p, k) if t_max is None else float(t_max)
    if T <= p.xi_last:
        raise ValueError("t_max must exceed the last interior point")
    x = np.linspace(0.0, 1.0, n)
    t = T * np.expm1(grading * x) / math.expm1(grading)
    h_min = np.min(np.diff(t))
    xi = np.asarray(p.xis, dtype=float)
    # drop grid points that would sit too close to an inserted xi
    keep = np.ones(t.size, dtype=bool)
    for v in xi[1:]:
        keep &= np.abs(t - v) > 0.25 * h_min
    t = np.union1d(t[keep], xi)
    t[-1] = T
    return t


def zero_function(p: MultipointProblem, k: float, n: int = DEFAULT_NODES,
                  t_max: Optional[float] = None) -> GridFunction:
    nodes = make_grid(p, k, n, t_max)
    return GridFunction(nodes, np.zeros_like(nodes), np.zeros_like(nodes), k / 2)


def from_callables(nodes, fn, dfn, decay: float) -> GridFunction:
    nodes = np.asarray(nodes, dtype=float)
    return GridFunction(nodes, np.broadcast_to(fn(nodes), nodes.shape).copy(),
                        np.broadcast_to(dfn(nodes), nodes.shape).copy(), decay)


# ---------------------------------------------------------------- operators

class _KernelBlocks:
    """Small LRU cache of kernel rows at the grid nodes, keyed on the s array."""

    def __init__(self, gk: GreenKernel, nodes: np.ndarray, derivative: str, size: int = 6):
        self.gk = gk
        self.nodes = nodes
        self.derivative = derivative
        self.size = size
        self._store: OrderedDict = OrderedDict()

    def __call__(self, s: np.ndarray) -> np.ndarray:
        key = s.tobytes()
        hit = self._store.get(key)
        if hit is not None:
            self._store.move_to_end(key)
            return hit
        block = np.vstack([self.gk.matrix(self.nodes, s, "value"),
                           self.gk.matrix(self.nodes, s, self.derivative)])
        self._store[key] = block
        if len(self._store) > self.size:
            self._store.popitem(last=False)
        return block


_BLOCK_CACHE: dict = {}


def _blocks(gk, nodes, derivative):
    key = (id(gk), nodes.tobytes(), derivative)
    entry = _BLOCK_CACHE.get(key)
    if entry is None or entry.gk is not gk:
        if len(_BLOCK_CACHE) > 8:
            _BLOCK_CACHE.clear()
        entry = _BLOCK_CACHE[key] = _KernelBlocks(gk, nodes, derivative)
    return entry


def _default_derivative(gk: GreenKernel) -> str:
    return "printed" if gk.mode == "as_printed" else "analytic"


def integrate_against_kernel(gk: GreenKernel, u: GridFunction, load, derivative=None,
                             rel_tol=1e-10, abs_tol=1e-12) -> GridFunction:
    """v(t_j) = int G(t_j, s) load(s) ds and v'(t_j) likewise with dG/dt.

    The kernel vanishes for s >= max(t, xi_{m-1}) in both modes, so the
    integral is over [0, T_max] exactly; all nodes and every xi_i are breakpoints.
    """
    derivative = derivative or _default_derivative(gk)
    nodes = u.nodes
    n = nodes.size
    blocks = _blocks(gk, nodes, derivative)

    def integrand(s):
        return blocks(s) * np.asarray(load(s), dtype=float)[None, :]

    kinks = np.union1d(nodes, [x for x in gk.problem.xis if x < u.t_max])
    g = Integrand(integrand, kinks)
    vals, _ = integrate_halfline(g, rel_tol=rel_tol, abs_tol=abs_tol, cutoff=u.t_max)
    return u.with_values(vals[:n], vals[n:])


def shifted_load(gk: GreenKernel, p: MultipointProblem, u: GridFunction):
    """s -> f(s, u, u') + k u' + M u."""
    k, M = gk.shift.k, gk.shift.M

    def load(s):
        x, y = u(s)
        return p.eval_f(s, x, y) + k * y + M * x
    return load


def apply_T(gk: GreenKernel, p: MultipointProblem, u: GridFunction, derivative=None,
            **tol) -> GridFunction:
    """(Tu)(t) = int G(t,s)(f(s,u,u') + k u' + M u) ds at every node."""
    return integrate_against_kernel(gk, u, shifted_load(gk, p, u), derivative, **tol)


def truncate_delta(t, x, br: BracketPair):
    """Clamp x into [alpha(t), beta(t)]."""
    lo, hi = br.lower(t), br.upper(t)
    return np.minimum(np.maximum(x, lo), hi)


def apply_Tstar(gk: GreenKernel, p: MultipointProblem, u: GridFunction, br: BracketPair,
                eps: float, derivative=None, **tol) -> GridFunction:
    """Truncated operator with penalty eps*(u - delta(s, u))."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    k, M = gk.shift.k, gk.shift.M

    def load(s):
        x, y = u(s)
        d = truncate_delta(s, x, br)
        return p.eval_f(s, d, y) + k * y + M * x + eps * (x - d)
    return integrate_against_kernel(gk, u, load, derivative, **tol)


def default_eps(k: float, R: Optional[float], lhs_R: Optional[float], rtilde: float) -> float:
    """eps = k (R - LHS(R)) / (2 (R + R~)); 0.01 k when no admissible R is known."""
    if R is None or lhs_R is None or not lhs_R < R:
        return 0.01 * k
    return k * (R - lhs_R) / (2.0 * (R + rtilde))


# ---------------------------------------------------------------- residuals

@dataclass
class ResidualReport:
    """Non-negative residual measures; ``metadata`` holds signed diagnostics."""

    ode_residual: float
    bc0_residual: float
    bc_inf_residual: float
    bc_inf_at_tmax: float
    slope_consistency: float
    scheme_error: float
    norm_u: float
    norm_du: float
    metadata: dict = field(default_factory=dict)
    pointwise: np.ndarray = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k not in ("pointwise", "metadata")}

    def __str__(self):
        items = {**self.as_dict(), **self.metadata}
        return "\n".join(f"{k} = {v:.6g}" for k, v in items.items())


def _second_derivative_fd(t, y):
    """Non-uniform central difference of y at interior nodes."""
    hm = t[1:-1] - t[:-2]
    hp = t[2:] - t[1:-1]
    return (hm**2 * y[2:] - hp**2 * y[:-2] + (hp**2 - hm**2) * y[1:-1]) / (hm * hp * (hm + hp))


def _hermite_second(t, u, du):
    """Average of the left and right Hermite-cubic second derivatives at interior nodes."""
    h = np.diff(t)
    du_ = np.diff(u)
    left_end = 6 * du_ / h**2 - (4 * du[:-1] + 2 * du[1:]) / h    # at t_j of [t_j, t_j+1]
    right_end = -6 * du_ / h**2 + (2 * du[:-1] + 4 * du[1:]) / h  # at t_j+1
    return 0.5 * (left_end[1:] + right_end[:-1])


def verify(p: MultipointProblem, u: GridFunction) -> ResidualReport:
    """Residuals of u'' = f(t, u, u') and the two boundary conditions."""
    t, x, y = u.nodes, u.u, u.du
    if t.size < 5:
        raise ValueError("verify needs at least 5 nodes")
    upp = _second_derivative_fd(t, y)
    fval = np.broadcast_to(p.eval_f(t[1:-1], x[1:-1], y[1:-1]), upp.shape)
    pointwise = np.zeros_like(t)
    pointwise[1:-1] = np.abs(upp - fval)
    scheme = float(np.max(np.abs(upp - _hermite_second(t, x, y))))
    hm = t[1:-1] - t[:-2]
    hp = t[2:] - t[1:-1]
    slope = (hm**2 * x[2:] - hp**2 * x[:-2] + (hp**2 - hm**2) * x[1:-1]) / (hm * hp * (hm + hp))
    _, dxi = u(np.asarray(p.xis))
    bc_sum = float(np.dot(p.alphas, dxi))
    return ResidualReport(
        ode_residual=float(np.max(pointwise)),
        bc0_residual=abs(float(x[0])),
        bc_inf_residual=abs(0.0 - bc_sum),
        bc_inf_at_tmax=abs(float(y[-1]) - bc_sum),
        slope_consistency=float(np.max(np.abs(y[1:-1] - slope))),
        scheme_error=scheme,
        norm_u=float(np.max(np.abs(x))),
        norm_du=float(np.max(np.abs(y))),
        metadata={"du_at_tmax": float(y[-1]), "t_max": float(t[-1])},
        pointwise=pointwise,
    )


# ---------------------------------------------------------------- Picard

@dataclass
class SolveResult:
    u: GridFunction
    converged: bool
    iterations: int
    increment: float
    damping: float
    history: list
    report: Optional[ResidualReport]
    certified: bool
    message: str = ""


def picard_solve(gk: GreenKernel, p: MultipointProblem, u0: GridFunction,
                 damping: float = 1.0, tol: float = 1e-8, max_iter: int = 200,
                 bracket: Optional[BracketPair] = None, eps: Optional[float] = None,
                 derivative=None) -> SolveResult:
    """Damped iteration u <- (1 - lam) u + lam * T u (or T* with a bracket).

    The damping halves whenever the increment norm has grown for five
    consecutive steps, down to 1/64.  Non-convergence is reported, not raised.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    if bracket is not None and eps is None:
        raise ValueError("bracketed iteration needs eps")
    lam = damping
    u = u0
    best, best_inc = u0, math.inf
    history = []
    growth = 0
    inc = math.inf
    for it in range(1, max_iter + 1):
        if bracket is None:
            Tu = apply_T(gk, p, u, derivative)
        else:
            Tu = apply_Tstar(gk, p, u, bracket, eps, derivative)
        new = u.with_values((1 - lam) * u.u + lam * Tu.u, (1 - lam) * u.du + lam * Tu.du)
        inc = norm(new - u)
        history.append((inc, lam))
        if len(history) > 1 and inc > history[-2][0]:
            growth += 1
        else:
            growth = 0
        if growth >= GROWTH_PATIENCE and lam > MIN_DAMPING:
            lam = max(lam / 2, MIN_DAMPING)
            growth = 0
        u = new
        if inc < best_inc:
            best, best_inc = u, inc
        if not math.isfinite(inc) or inc > 1e12:
            break
        if inc < tol:
            rep = verify(p, u)
            return SolveResult(u, True, it, inc, lam, history, rep, gk.mode == "derived",
                               "converged")
    rep = verify(p, best) if best.nodes.size >= 5 else None
    msg = f"no convergence after {len(history)} iterations (best increment {best_inc:.3g})"
    return SolveResult(best, False, len(history), best_inc, lam, history, rep, False, msg)
