"""Value functions and solution records shared by the solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


class ValueFunction:
    """A continuous ``V`` vanishing off ``support`` together with ``V'``."""

    support: tuple = (-math.inf, math.inf)
    symbolic = False

    def formula(self, x: float) -> float:
        """The analytic expression without clipping to the support."""
        raise NotImplementedError

    def formula_derivative(self, x: float) -> float:
        raise NotImplementedError

    def _inside(self, x: float) -> bool:
        lo, hi = self.support
        return lo < x < hi

    def value(self, x: float) -> float:
        return self.formula(x) if self._inside(x) else 0.0

    def slope(self, x: float) -> float:
        return self.formula_derivative(x) if self._inside(x) else 0.0

    def __call__(self, x):
        if np.ndim(x) == 0:
            return float(self.value(float(x)))
        return np.array([self.value(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))

    def derivative(self, x):
        if np.ndim(x) == 0:
            return float(self.slope(float(x)))
        return np.array([self.slope(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))


class IntegralValue(ValueFunction):
    """``V(x) = int_anchor^x (h(y) - c) dy`` on ``support``, zero elsewhere.

    ``anchor`` may be ``-inf`` or ``+inf`` for the tail-anchored value
    functions of the non-solvable cases.
    """

    def __init__(self, H, c: float, anchor: float, support: tuple):
        self.H = H
        self.c = float(c)
        self.anchor = anchor
        self.support = (float(support[0]), float(support[1]))
        self.symbolic = H.is_symbolic

    def formula(self, x: float) -> float:
        a = self.anchor
        if a <= x:
            return self.H.area(a, x, self.c)
        return -self.H.area(x, a, self.c)

    def formula_derivative(self, x: float) -> float:
        return float(self.H.h(x)) - self.c

    def __repr__(self):
        return f"IntegralValue(c={self.c!r}, anchor={self.anchor!r}, support={self.support!r})"


class CallableValue(ValueFunction):
    """Value function given by plain callables (trajectories, test fixtures)."""

    def __init__(self, value_fn, deriv_fn, support: tuple, clip: bool = True):
        self._v = value_fn
        self._d = deriv_fn
        self.support = (float(support[0]), float(support[1]))
        self.clip = clip

    def formula(self, x: float) -> float:
        return float(self._v(x))

    def formula_derivative(self, x: float) -> float:
        return float(self._d(x))

    def _inside(self, x: float) -> bool:
        return True if not self.clip else super()._inside(x)


class PulledBackValue(ValueFunction):
    """``V(x) = V~(p(x))`` for a natural-scale value function ``V~``."""

    def __init__(self, inner: ValueFunction, transform):
        self.inner = inner
        self.t = transform
        lo, hi = inner.support

        def back(y):
            if not math.isfinite(y):
                return transform.interval[0] if y < 0 else transform.interval[1]
            return float(transform.inverse(y))

        self.support = (back(lo), back(hi))

    def formula(self, x: float) -> float:
        return self.inner.formula(float(self.t.p(x)))

    def formula_derivative(self, x: float) -> float:
        return self.inner.formula_derivative(float(self.t.p(x))) * float(self.t.pderiv(x))


class InfiniteValue:
    """Sentinel for ``V* = +inf`` everywhere."""

    support = (-math.inf, math.inf)

    def __call__(self, x):
        return math.inf if np.ndim(x) == 0 else np.full(np.shape(x), math.inf)

    def __repr__(self):
        return "Infinite"


INFINITE = InfiniteValue()


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass
class TwoSided:
    x1s: float
    x2s: float
    V: ValueFunction
    cstar: float | None = None
    report: object = None
    meta: dict = field(default_factory=dict)
    kind = "TwoSided"

    def as_dict(self) -> dict:
        d = {"variant": self.kind, "x1": _num(self.x1s), "x2": _num(self.x2s),
             "cstar": _num(self.cstar), "meta": self.meta}
        if self.report is not None:
            d["validation"] = self.report.as_dict()
        return d


@dataclass
class OneSidedLeft:
    alpha: float
    V: ValueFunction
    level: float | None = None
    meta: dict = field(default_factory=dict)
    kind = "OneSidedLeft"

    def as_dict(self) -> dict:
        return {"variant": self.kind, "alpha": _num(self.alpha), "level": _num(self.level),
                "meta": self.meta}


@dataclass
class OneSidedRight:
    beta: float
    V: ValueFunction
    level: float | None = None
    meta: dict = field(default_factory=dict)
    kind = "OneSidedRight"

    def as_dict(self) -> dict:
        return {"variant": self.kind, "beta": _num(self.beta), "level": _num(self.level),
                "meta": self.meta}


@dataclass
class NoOptimum:
    value: object
    classification: object = None
    plan: object = None
    meta: dict = field(default_factory=dict)
    kind = "NoOptimum"

    @property
    def V(self):
        return self.value

    @property
    def infinite(self) -> bool:
        return isinstance(self.value, InfiniteValue)

    def as_dict(self) -> dict:
        d = {"variant": self.kind, "message": "no optimal stopping time exists",
             "value": "Infinite" if self.infinite else "finite", "meta": self.meta}
        if self.plan is not None:
            d["sequence"] = {"mode": self.plan.mode}
        return d


def value_at(solution, x: float) -> float:
    V = solution.V
    if V is None:
        raise DomainError("solution carries no value function")
    return float(V(x))
