"""Problem data for u'' = f(t, u, u'), u(0) = 0, u'(inf) = sum alpha_i u'(xi_i)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .expr import BOUND_VARS, F_VARS, SCALAR_VARS, Expression, parse

RESONANCE_TOL = 1e-12
NONTRIVIAL_TOL = 1e-12
DEFAULT_R_SAMPLES = (0.5, 1.0, 2.0, 10.0)


def _as_expr(e, allowed) -> Expression:
    if isinstance(e, Expression):
        extra = e.variables - set(allowed)
        if extra:
            raise ValueError(f"expression {e.text!r} uses undeclared variables {sorted(extra)}")
        return e
    return parse(str(e), allowed)


@dataclass(frozen=True)
class MultipointProblem:
    """Weights ``alphas``, nodes ``xis`` and nonlinearity ``f(t, x, y)``.

    Construction only checks shapes; the mathematical invariants (first node
    at zero, increasing nodes, positive weights, resonance) are reported by
    :func:`validate_problem` so that broken inputs can still be inspected.
    """

    alphas: tuple
    xis: tuple
    f: Expression

    def __init__(self, alphas: Sequence[float], xis: Sequence[float], f):
        alphas = tuple(float(a) for a in alphas)
        xis = tuple(float(x) for x in xis)
        if len(alphas) != len(xis):
            raise ValueError("alphas and xis must have the same length")
        if len(alphas) < 1:
            raise ValueError("need at least one node (m >= 2)")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "xis", xis)
        object.__setattr__(self, "f", _as_expr(f, F_VARS))

    @property
    def m(self) -> int:
        return len(self.alphas) + 1

    @property
    def xi_last(self) -> float:
        return self.xis[-1]

    def eval_f(self, t, x, y):
        return self.f(t=t, x=x, y=y)


@dataclass(frozen=True)
class BoundFamily:
    """Majorant family r -> phi_r(t) for |f| on the ball of radius r.

    ``kind`` is ``"L1"`` (integrable majorants) or ``"Linf"`` (bounded ones).
    """

    kind: str
    phi: Expression

    def __init__(self, kind: str, phi):
        if kind not in ("L1", "Linf"):
            raise ValueError(f"bound family kind must be L1 or Linf, got {kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "phi", _as_expr(phi, BOUND_VARS))

    def __call__(self, t, r):
        return self.phi(t=t, r=r)


@dataclass(frozen=True)
class BracketPair:
    """Candidate lower solution ``alpha_low`` and upper solution ``beta_up``."""

    alpha_low: Expression
    beta_up: Expression

    def __init__(self, alpha_low, beta_up):
        object.__setattr__(self, "alpha_low", _as_expr(alpha_low, SCALAR_VARS))
        object.__setattr__(self, "beta_up", _as_expr(beta_up, SCALAR_VARS))

    def lower(self, t):
        return _scalar_fn(self.alpha_low, t)

    def upper(self, t):
        return _scalar_fn(self.beta_up, t)

    def ordered_on(self, grid) -> bool:
        grid = np.asarray(grid, dtype=float)
        return bool(np.all(self.lower(grid) <= self.upper(grid)))


def _scalar_fn(e: Expression, t):
    """Evaluate an expression in t, broadcasting constants to the shape of t."""
    out = e(t=t)
    if np.ndim(t) and np.ndim(out) == 0:
        return np.full(np.shape(t), out)
    return out


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __str__(self) -> str:
        lines = [f"[{'pass' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in self.checks]
        return "\n".join(lines)


def validate_problem(p: MultipointProblem) -> ValidationReport:
    xis = np.asarray(p.xis)
    alphas = np.asarray(p.alphas)
    total = float(np.sum(alphas))
    rep = ValidationReport()
    rep.checks.append(Check("m >= 2", p.m >= 2, f"m = {p.m}"))
    rep.checks.append(Check("xi_1 = 0", xis[0] == 0.0, f"xi_1 = {float(xis[0])!r}"))
    rep.checks.append(Check(
        "xi strictly increasing", bool(np.all(np.diff(xis) > 0)), f"xis = {tuple(p.xis)}"
    ))
    rep.checks.append(Check("alpha_i > 0", bool(np.all(alphas > 0)), f"alphas = {tuple(p.alphas)}"))
    rep.checks.append(Check(
        "resonance sum(alpha) = 1",
        abs(total - 1.0) <= RESONANCE_TOL,
        f"sum = {total!r}, tolerance {RESONANCE_TOL:g}",
    ))
    return rep


def check_nontriviality(p: MultipointProblem, t_samples) -> Optional[float]:
    """First sampled t0 with |f(t0, 0, 0)| > 1e-12, or None."""
    t = np.atleast_1d(np.asarray(t_samples, dtype=float))
    if t.size == 0:
        raise ValueError("nontriviality grid is empty")
    vals = np.atleast_1d(p.eval_f(t, 0.0, 0.0))
    vals = np.broadcast_to(vals, t.shape)
    hits = np.flatnonzero(np.abs(vals) > NONTRIVIAL_TOL)
    return float(t[hits[0]]) if hits.size else None


def check_bound_family(
    bf: BoundFamily,
    r_samples=DEFAULT_R_SAMPLES,
    t_check: float = 50.0,
    n_t: int = 2001,
) -> ValidationReport:
    """Sampled checks of non-negativity and integrability/boundedness.

    Only the listed radii are examined; the hypotheses quantify over every
    r > 0, which cannot be certified by sampling.
    """
    from .quad import Integrand, integrate_halfline

    t = np.linspace(0.0, t_check, n_t)
    rep = ValidationReport()
    for r in r_samples:
        vals = np.broadcast_to(bf(t, r), t.shape)
        rep.checks.append(Check(
            f"phi_r >= 0 (r={r:g})", bool(np.all(vals >= 0)),
            f"min over [0, {t_check:g}] = {vals.min():.6g}",
        ))
        if bf.kind == "Linf":
            rep.checks.append(Check(
                f"sup phi_r finite (r={r:g})", bool(np.isfinite(vals.max())),
                f"sampled sup = {vals.max():.6g}",
            ))
        else:
            g = Integrand(lambda s, r=r: np.broadcast_to(bf(s, r), np.shape(s)), breakpoints=())
            try:
                val, err = integrate_halfline(g, cutoff=t_check)
                tail = float(vals[-1]) * t_check
                ok = np.isfinite(val) and tail < max(1e-6, 1e-3 * abs(val))
                detail = f"int_0^{t_check:g} = {val:.6g}, endpoint value {vals[-1]:.3g}"
            except Exception as exc:  # quadrature failure means not integrable here
                ok, detail = False, str(exc)
            rep.checks.append(Check(f"phi_r integrable (r={r:g})", bool(ok), detail))
    rep.checks.append(Check("radii sampled", True, f"r in {tuple(r_samples)} only"))
    return rep
