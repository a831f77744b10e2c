"""Green-function payoffs for exit rules of driftless, undiscounted problems.

For a continuous local martingale started at ``x`` and stopped on leaving
``(a, b)``, the expected occupation density at ``y`` (in ``d<X>`` units) is
the kernel ``G(a, b, x, y)``. Hence

    E_x int_0^T f(X_s) ds = int_a^b G(a, b, x, y) f(y) / sigma(y)^2 dy,

which is computed here by plain quadrature, independently of the h-transform.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, NonConvergent, PreconditionError
from .funcmodel import ProblemSpec, quad


def green_kernel(a: float, b: float, x: float, y: float) -> float:
    """``2 (min(x, y) - a)(b - max(x, y)) / (b - a)``."""
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise DomainError(f"green_kernel needs finite a < b, got ({a}, {b})")
    for name, v in (("x", x), ("y", y)):
        if not a <= v <= b:
            raise DomainError(f"{name} = {v} outside [{a}, {b}]")
    return 2.0 * (min(x, y) - a) * (b - max(x, y)) / (b - a)


def _check(spec: ProblemSpec):
    if not spec.is_driftless or spec.lam != 0.0:
        raise PreconditionError("the Green oracle needs a driftless spec with lambda = 0")


def green_value(spec: ProblemSpec, a: float, b: float, x: float) -> float:
    """Expected payoff of the exit rule from ``(a, b)`` started at ``x``."""
    _check(spec)
    if not (a < b):
        raise DomainError(f"need a < b, got ({a}, {b})")
    if x <= a or x >= b:
        return 0.0
    lo, hi = spec.interval
    if a < lo or b > hi:
        raise DomainError(f"({a}, {b}) leaves the state interval ({lo}, {hi})")
    cuts = sorted({a, b, x} | {p for p in spec.breakpoints() if a < p < b})
    sigma, f = spec.sigma, spec.f
    L = b - a

    # split the kernel so each piece is a polynomial of degree one in y
    def left(y):
        return 2.0 * (y - a) * (b - x) / L * float(f(y)) / float(sigma(y)) ** 2

    def right(y):
        return 2.0 * (x - a) * (b - y) / L * float(f(y)) / float(sigma(y)) ** 2

    unit = max(1.0, spec.template.span)
    total = 0.0
    for s, e in zip(cuts[:-1], cuts[1:]):
        if e <= s:
            continue
        fn = left if e <= x else right
        for u, v in _geometric(s, e, unit, anchor_left=e > x):
            total += quad(fn, u, v)
    return total


def _geometric(s: float, e: float, unit: float, anchor_left: bool) -> list:
    # long pieces are cut at doubling distances from the end nearest the
    # favorable region so decaying integrands are not stepped over
    if e - s <= 8.0 * unit:
        return [(s, e)]
    pts = [s, e]
    d = unit
    while d < e - s:
        pts.append(s + d if anchor_left else e - d)
        d *= 2.0
    pts = sorted(set(pts))
    return list(zip(pts[:-1], pts[1:]))


def green_value_one_sided(spec: ProblemSpec, side: str, level: float, x: float,
                          tol: float = 1e-7, max_expansions: int = 40) -> float:
    """Payoff of a one-sided rule as the limit over expanding co-boundaries.

    ``side='left'`` stops at the first passage below ``level``; the missing
    right barrier is pushed out geometrically until two successive values
    agree to ``tol``.
    """
    _check(spec)
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if (side == "left" and x <= level) or (side == "right" and x >= level):
        return 0.0
    lo, hi = spec.interval
    tpl = spec.template
    step = max(1.0, tpl.span, abs(x - level))
    history = []
    prev = None
    for k in range(max_expansions):
        d = step * 2.0 ** k
        if side == "left":
            far = x + d
            if far >= hi:
                far = hi - (hi - x) * 2.0 ** (-k - 1)
            v = green_value(spec, level, far, x)
        else:
            far = x - d
            if far <= lo:
                far = lo + (x - lo) * 2.0 ** (-k - 1)
            v = green_value(spec, far, level, x)
        history.append((far, v))
        if prev is not None and abs(v - prev) <= tol:
            return v
        prev = v
    raise NonConvergent(f"one-sided Green value did not settle after {max_expansions} expansions", history)


def grid_check(spec: ProblemSpec, V, a: float, b: float, n: int = 21) -> list:
    """``(x, V(x), oracle(x), |diff|)`` rows on ``n`` points of ``[a, b]``."""
    rows = []
    for x in np.linspace(a, b, n):
        v = float(V(float(x)))
        g = green_value(spec, a, b, float(x))
        rows.append((float(x), v, g, abs(v - g)))
    return rows
