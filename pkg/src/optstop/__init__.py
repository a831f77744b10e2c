"""Optimal stopping of integral functionals of one-dimensional diffusions.

The package solves problems of the form

    V*(x) = sup_tau E_x int_0^tau exp(-lam s) f(X_s) ds,
    dX = b(X) dt + sigma(X) dB,

where b, sigma and f may be discontinuous and f is positive on a single
favorable interval, zero on two flanking plateaus and negative on both tails.
"""

from .funcmodel import (
    PiecewiseFunction,
    ProblemSpec,
    Segment,
    SignTemplate,
    validate_coeffs,
    validate_shape,
)
from .htransform import HTransform, build_h, classify, htransform_of
from .mcsim import HorizonCap, LeftExit, RightExit, TwoSidedExit, simulate_payoff
from .oracle import green_kernel, green_value, green_value_one_sided
from .pipeline import solve_general
from .problem_io import load_problem, parse_problem
from .scale import build_scale, pull_back, transform_problem
from .shooting import solve_shooting, validate_solution
from .solver import find_cstar, make_sequence, payoff_two_sided, solve

__all__ = [
    "PiecewiseFunction",
    "ProblemSpec",
    "Segment",
    "SignTemplate",
    "validate_coeffs",
    "validate_shape",
    "HTransform",
    "build_h",
    "classify",
    "htransform_of",
    "HorizonCap",
    "LeftExit",
    "RightExit",
    "TwoSidedExit",
    "simulate_payoff",
    "green_kernel",
    "green_value",
    "green_value_one_sided",
    "solve_general",
    "load_problem",
    "parse_problem",
    "build_scale",
    "pull_back",
    "transform_problem",
    "solve_shooting",
    "validate_solution",
    "find_cstar",
    "make_sequence",
    "payoff_two_sided",
    "solve",
]

__version__ = "0.1.0"
