"""Resonant multi-point boundary value problems on the half-line.

Solves u'' = f(t, u, u'), u(0) = 0, u'(inf) = sum alpha_i u'(xi_i) with
sum alpha_i = 1 through a shift perturbation k u' + M u, its Green's kernel
and a fixed-point formulation.
"""

from .backend import NAME as BACKEND
from .expr import parse
from .fixpoint import GridFunction, apply_T, apply_Tstar, norm, picard_solve, verify
from .kernel import GreenKernel, kernel_constants, make_shift, rebuild_kernel
from .model import BoundFamily, BracketPair, MultipointProblem, validate_problem

__version__ = "0.1.0"
