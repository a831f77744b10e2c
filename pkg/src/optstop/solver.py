"""Exact solutions for driftless, undiscounted problems.

All quantities derive from the h-transform: the two-sided boundaries are
the tail roots of ``h = c*`` where the smooth-fit area ``S(c*)`` vanishes;
the other cases use tail-anchored integrals of ``H``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from scipy import optimize

from .errors import (
    BracketError,
    NotSolvable,
    PreconditionError,
    RootDomainError,
    ValidationError,
)
from .funcmodel import ProblemSpec
from .htransform import Classification, HTransform, classify, htransform_of
from .values import (
    INFINITE,
    IntegralValue,
    NoOptimum,
    OneSidedLeft,
    OneSidedRight,
    TwoSided,
)


def find_cstar(H: HTransform, classification: Classification | None = None):
    """Return ``(c*, alpha_{c*}, beta_{c*})`` with ``S(c*) = 0``."""
    cl = classification or classify(H)
    if cl.kind != "Solvable":
        raise NotSolvable(f"problem is {cl.kind}; no two-sided solution exists")
    m1, m2 = H.m1, H.m2
    if not m1 < m2:
        raise BracketError(f"empty level range (m1, m2) = ({m1}, {m2})")

    def S(c):
        return H.area(H.root_alpha(c), H.root_beta(c), c)

    lo_c = hi_c = None
    c = 0.5 * (m1 + m2)
    s = S(c)
    if s == 0.0:
        return c, H.root_alpha(c), H.root_beta(c)
    if s > 0:
        lo_c = c
        for k in range(2, 64):
            c = m2 - (m2 - m1) * 2.0 ** (-k)
            if not m1 < c < m2:
                break
            s = S(c)
            if s <= 0:
                hi_c = c
                break
            lo_c = c
    else:
        hi_c = c
        for k in range(2, 64):
            c = m1 + (m2 - m1) * 2.0 ** (-k)
            if not m1 < c < m2:
                break
            s = S(c)
            if s >= 0:
                lo_c = c
                break
            hi_c = c
    if lo_c is None or hi_c is None:
        raise BracketError(f"S has no sign change on ({m1}, {m2})")
    if s == 0.0:
        cstar = c
    else:
        cstar = optimize.brentq(S, lo_c, hi_c, xtol=1e-15, rtol=1e-15, maxiter=500)
    return cstar, H.root_alpha(cstar), H.root_beta(cstar)


def build_value_two_sided(H: HTransform, cstar: float, alpha: float, beta: float) -> IntegralValue:
    return IntegralValue(H, cstar, alpha, (alpha, beta))


def payoff_two_sided(H: HTransform, a: float, b: float) -> IntegralValue:
    """Expected payoff of stopping at the first exit from ``(a, b)``."""
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise ValueError("payoff_two_sided needs finite a < b")
    c = H.area(a, b, 0.0) / (b - a)
    return IntegralValue(H, c, a, (a, b))


def value_case1(H: HTransform, classification: Classification | None = None):
    cl = classification or classify(H)
    if cl.kind != "Case1":
        raise PreconditionError(f"value_case1 needs Case1, got {cl.kind}")
    if math.isinf(cl.Kplus) or math.isinf(cl.Kminus):
        return INFINITE
    if cl.Kminus <= cl.Kplus:
        return IntegralValue(H, cl.m, H.lo, (H.lo, H.hi))
    return IntegralValue(H, cl.m, H.hi, (H.lo, H.hi))


def value_one_sided(H: HTransform, classification: Classification | None = None):
    cl = classification or classify(H)
    if cl.kind == "Case2":
        level = H.h_plus_inf
        alpha = H.root_alpha(level)
        return OneSidedLeft(alpha, IntegralValue(H, level, alpha, (alpha, H.hi)), level,
                            {"classification": cl.as_dict()})
    if cl.kind == "Case3":
        level = H.h_minus_inf
        beta = H.root_beta(level)
        return OneSidedRight(beta, IntegralValue(H, level, beta, (H.lo, beta)), level,
                             {"classification": cl.as_dict()})
    raise PreconditionError(f"one-sided solution needs Case2 or Case3, got {cl.kind}")


# ---------------------------------------------------------------------------
# sequences for case 1
# ---------------------------------------------------------------------------


@dataclass
class SequencePlan:
    """Deterministic map ``n -> (a_n, b_n, c_n)`` for ``n >= 1``."""

    H: HTransform
    mode: str
    _fn: Callable = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, n: int) -> tuple:
        if n < 1:
            raise ValueError("sequence index starts at 1")
        if n not in self._cache:
            self._cache[n] = self._fn(n)
        return self._cache[n]

    def value(self, n: int) -> IntegralValue:
        """``U_n(x) = int_{a_n}^x H(y, c_n) dy`` on ``(a_n, b_n)``."""
        a, b, c = self(n)
        return IntegralValue(self.H, c, a, (a, b))

    def payoff(self, n: int) -> IntegralValue:
        a, b, _ = self(n)
        return payoff_two_sided(self.H, a, b)


def _expand_root(fn, start: float, direction: float, limit: float, bound: float = 1e15):
    """Root of a function that changes sign moving from ``start`` in ``direction``."""
    f0 = fn(start)
    step = 1.0
    prev = start
    while True:
        cand = start + direction * step
        if math.isfinite(limit) and (cand - limit) * direction >= 0:
            cand = 0.5 * (prev + limit)
        fc = fn(cand)
        if fc == 0.0:
            return cand
        if (fc > 0) != (f0 > 0):
            a, b = sorted((prev, cand))
            return optimize.brentq(fn, a, b, xtol=1e-14, rtol=1e-15, maxiter=500)
        prev = cand
        step *= 2.0
        if step > bound:
            raise BracketError("zero-area bracket not found")


def _asymptotic_plan(H: HTransform, cl: Classification) -> SequencePlan:
    tpl = H.template
    m = cl.m
    span = tpl.span
    left = cl.Kminus <= cl.Kplus
    if left:
        D = H.plateau_left - m
        need_root = H.h_minus_inf
    else:
        D = m - H.plateau_right
        need_root = H.h_plus_inf

    def triple(k: int):
        delta = min(D * 2.0 ** (-k), 1.0 / k)
        if left:
            c = m + delta
            a = H.root_alpha(c, bound=1e18) if c > need_root else tpl.x1l - span * 2.0 ** k
            F = lambda b: H.area(a, b, c)
            if F(tpl.x2r) < 0:
                return None
            b = _expand_root(F, tpl.x2r, 1.0, H.hi)
        else:
            c = m - delta
            b = H.root_beta(c, bound=1e18) if c < need_root else tpl.x2r + span * 2.0 ** k
            F = lambda a: H.area(a, b, c)
            if F(tpl.x1l) > 0:
                return None
            a = _expand_root(F, tpl.x1l, -1.0, H.lo)
        return a, b, c

    n0 = 0
    while triple(n0 + 1) is None:
        n0 += 1
        if n0 > 60:
            raise PreconditionError("no admissible starting level for the sequence")

    return SequencePlan(H, "asymptotically-optimal", lambda n: triple(n + n0))


def _pathological_plan(H: HTransform, cl: Classification) -> SequencePlan:
    if not (H.h_plus_inf == H.h_minus_inf):
        raise PreconditionError("pathological sequence needs h(+inf) = h(-inf)")
    if not (math.isinf(cl.Kplus) and math.isfinite(cl.Kminus)):
        raise PreconditionError("pathological sequence needs K+ = inf and K- < inf")
    tpl = H.template
    m, kminus = cl.m, cl.Kminus
    span = tpl.span
    top = float(H.h(tpl.x1r))
    state = {"n": 0, "c": None, "a": None, "delta": 0.5 * (top - m)}
    out = {}

    def ok(c, b):
        alpha = H.root_alpha(c, bound=1e18)
        gamma = H.root_gamma(c)
        cond_b = H.area(alpha, gamma, c) > kminus
        cond_c = -H.area(gamma, b, c) <= kminus
        return cond_b and cond_c, alpha

    def advance():
        n = state["n"] + 1
        b = tpl.x2r + n * span
        delta = state["delta"]
        for _ in range(200):
            c = m + delta
            good = m < c < top and (state["c"] is None or c < state["c"])
            if good:
                try:
                    good, alpha = ok(c, b)
                except RootDomainError:
                    good = False
            if good:
                a = _expand_root(lambda s: H.area(s, b, c), alpha, -1.0, H.lo, bound=1e18)
                if state["a"] is None or a < state["a"]:
                    state.update(n=n, c=c, a=a, delta=delta)
                    out[n] = (a, b, c)
                    return
            delta *= 0.5
        raise PreconditionError(f"could not satisfy the sequence conditions at n = {n}")

    def triple(n: int):
        while state["n"] < n:
            advance()
        return out[n]

    return SequencePlan(H, "pathological", triple)


def make_sequence(H: HTransform, mode: str = "asymptotically-optimal",
                  classification: Classification | None = None) -> SequencePlan:
    cl = classification or classify(H)
    if cl.kind != "Case1":
        raise PreconditionError(f"sequences are defined for Case1 problems, got {cl.kind}")
    if mode == "asymptotically-optimal":
        return _asymptotic_plan(H, cl)
    if mode == "pathological":
        return _pathological_plan(H, cl)
    raise ValueError(f"unknown sequence mode {mode!r}")


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def solve(spec: ProblemSpec, validate: bool = True, bracket_bound: float = 1e6):
    """Solve a driftless, undiscounted problem exactly."""
    if not spec.is_driftless:
        raise PreconditionError("solve needs b == 0; apply the scale transform first")
    if spec.lam != 0.0:
        raise PreconditionError("solve needs lambda = 0; use the shooting solver")
    spec.validate()
    H = htransform_of(spec, bracket_bound)
    cl = classify(H)
    meta = {"classification": cl.as_dict(),
            "exactness": "symbolic" if H.is_symbolic else "quadrature"}
    if cl.kind == "Solvable":
        from .shooting import validate_solution

        cstar, alpha, beta = find_cstar(H, cl)
        V = build_value_two_sided(H, cstar, alpha, beta)
        report = validate_solution(spec, V, alpha, beta) if validate else None
        if report is not None and not report.ok:
            raise ValidationError("two-sided candidate failed validation: " + "; ".join(report.reasons),
                                  report)
        return TwoSided(alpha, beta, V, cstar, report, meta)
    if cl.kind == "Case1":
        plan = make_sequence(H, "asymptotically-optimal", cl)
        return NoOptimum(value_case1(H, cl), cl, plan, meta)
    sol = value_one_sided(H, cl)
    sol.meta.update(meta)
    return sol
