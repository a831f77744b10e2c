"""Piecewise analytic functions with exact antiderivatives.

Coefficients ``b``, ``sigma`` and the gain ``f`` are represented as
:class:`PiecewiseFunction` objects: ordered segments, each a sum of terms from
a small family that is closed under antidifferentiation (up to two levels):

========================  ==========================================
term                      value
========================  ==========================================
``Poly(coeffs, x0)``      sum_k coeffs[k] (x - x0)^k
``Exp(c, a, x0)``         c exp(a (x - x0))
``Power(c, p, x0)``       c |x - x0|^p   (x0 outside the open segment)
``Log(c, x0)``            c log|x - x0|
``XLog(c, x0)``           c (|u| log|u| - |u|),  u = x - x0
``NormCdf(c, s, x0)``     c Phi(s (x - x0))
``NormCdfInt(c, s, x0)``  c (u Phi(u) + phi(u)),  u = s (x - x0)
========================  ==========================================

Limits at segment ends (including +-inf and singular points) are decided
symbolically, so tail integrals are either exact numbers or a certified
+-inf. Segments that leave the family (compositions produced by a change of
scale) fall back to :class:`NumericSegment`, integrated by adaptive
quadrature.

Extended reals are plain floats with ``math.inf``; :func:`ext_add` refuses
``inf - inf``.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate, optimize, special

from .errors import (
    CoefficientError,
    DomainError,
    IndeterminateError,
    IntegrabilityError,
    ShapeError,
)

INF = math.inf

# ---------------------------------------------------------------------------
# extended reals
# ---------------------------------------------------------------------------


def ext_add(*values: float) -> float:
    """Sum extended reals; ``inf + (-inf)`` raises IndeterminateError."""
    pos = any(v == INF for v in values)
    neg = any(v == -INF for v in values)
    if pos and neg:
        raise IndeterminateError("inf - inf")
    if pos:
        return INF
    if neg:
        return -INF
    return float(math.fsum(values))


def ext_sub(a: float, b: float) -> float:
    return ext_add(a, -b)


def is_finite(v: float) -> bool:
    return math.isfinite(v)


# ---------------------------------------------------------------------------
# terms
# ---------------------------------------------------------------------------

# Divergence order of a term at an end point: (exp rate, power, log power).
Order = tuple


def _sgn(v: float) -> float:
    return 1.0 if v > 0 else (-1.0 if v < 0 else 0.0)


def _phi(u):
    return np.exp(-0.5 * np.asarray(u, dtype=float) ** 2) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Poly:
    coeffs: tuple
    x0: float = 0.0
    singular = False

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def degree(self) -> int:
        d = len(self.coeffs) - 1
        while d > 0 and self.coeffs[d] == 0.0:
            d -= 1
        return d

    def __call__(self, x):
        return npoly.polyval(np.asarray(x, dtype=float) - self.x0, self.coeffs)

    def antiderivative(self, side: float) -> "Poly":
        return Poly((0.0,) + tuple(c / (k + 1) for k, c in enumerate(self.coeffs)), self.x0)

    def limit(self, point: float, approach: float):
        if math.isfinite(point):
            return float(self(point)), None
        d = self.degree
        lead = self.coeffs[d] if self.coeffs else 0.0
        if d == 0:
            return lead, None
        s = _sgn(lead) * (_sgn(point) ** d)
        return s * INF, (0.0, float(d), 0.0)

    def scaled(self, k: float) -> "Poly":
        return Poly(tuple(k * c for c in self.coeffs), self.x0)


@dataclass(frozen=True)
class Exp:
    c: float
    a: float
    x0: float = 0.0
    singular = False

    def __call__(self, x):
        return self.c * np.exp(self.a * (np.asarray(x, dtype=float) - self.x0))

    def antiderivative(self, side: float):
        if self.a == 0.0:
            return Poly((0.0, self.c), self.x0)
        return Exp(self.c / self.a, self.a, self.x0)

    def limit(self, point: float, approach: float):
        if math.isfinite(point):
            return float(self(point)), None
        if self.c == 0.0 or self.a == 0.0:
            return self.c, None
        rate = self.a * _sgn(point)
        if rate < 0:
            return 0.0, None
        return _sgn(self.c) * INF, (rate, 0.0, 0.0)

    def scaled(self, k: float) -> "Exp":
        return Exp(k * self.c, self.a, self.x0)


@dataclass(frozen=True)
class Power:
    """``c |x - x0|^p``; the open segment must not contain ``x0``."""

    c: float
    p: float
    x0: float = 0.0
    singular = True

    def __call__(self, x):
        u = np.abs(np.asarray(x, dtype=float) - self.x0)
        with np.errstate(divide="ignore"):
            return self.c * u ** self.p

    def antiderivative(self, side: float):
        if self.p == -1.0:
            return Log(side * self.c, self.x0)
        return Power(side * self.c / (self.p + 1.0), self.p + 1.0, self.x0)

    def limit(self, point: float, approach: float):
        if self.c == 0.0:
            return 0.0, None
        if math.isfinite(point):
            if point != self.x0:
                return float(self(point)), None
            if self.p > 0:
                return 0.0, None
            if self.p == 0:
                return self.c, None
            return _sgn(self.c) * INF, (0.0, -self.p, 0.0)
        if self.p < 0:
            return 0.0, None
        if self.p == 0:
            return self.c, None
        return _sgn(self.c) * INF, (0.0, self.p, 0.0)

    def scaled(self, k: float) -> "Power":
        return Power(k * self.c, self.p, self.x0)


@dataclass(frozen=True)
class Log:
    c: float
    x0: float = 0.0
    singular = True

    def __call__(self, x):
        with np.errstate(divide="ignore"):
            return self.c * np.log(np.abs(np.asarray(x, dtype=float) - self.x0))

    def antiderivative(self, side: float):
        return XLog(side * self.c, self.x0)

    def limit(self, point: float, approach: float):
        if self.c == 0.0:
            return 0.0, None
        if math.isfinite(point) and point != self.x0:
            return float(self(point)), None
        s = _sgn(self.c) if not math.isfinite(point) else -_sgn(self.c)
        return s * INF, (0.0, 0.0, 1.0)

    def scaled(self, k: float) -> "Log":
        return Log(k * self.c, self.x0)


@dataclass(frozen=True)
class XLog:
    c: float
    x0: float = 0.0
    singular = True

    def __call__(self, x):
        u = np.abs(np.asarray(x, dtype=float) - self.x0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)) - u, 0.0)
        return self.c * out

    def antiderivative(self, side: float):
        raise IntegrabilityError("antiderivative of u log u terms is not supported")

    def limit(self, point: float, approach: float):
        if self.c == 0.0:
            return 0.0, None
        if math.isfinite(point):
            return float(self(point)), None
        return _sgn(self.c) * INF, (0.0, 1.0, 1.0)

    def scaled(self, k: float) -> "XLog":
        return XLog(k * self.c, self.x0)


@dataclass(frozen=True)
class NormCdf:
    c: float
    s: float = 1.0
    x0: float = 0.0
    singular = False

    def __call__(self, x):
        return self.c * special.ndtr(self.s * (np.asarray(x, dtype=float) - self.x0))

    def antiderivative(self, side: float):
        return NormCdfInt(self.c / self.s, self.s, self.x0)

    def limit(self, point: float, approach: float):
        if math.isfinite(point):
            return float(self(point)), None
        return (self.c if self.s * point > 0 else 0.0), None

    def scaled(self, k: float) -> "NormCdf":
        return NormCdf(k * self.c, self.s, self.x0)


@dataclass(frozen=True)
class NormCdfInt:
    c: float
    s: float = 1.0
    x0: float = 0.0
    singular = False

    def __call__(self, x):
        u = self.s * (np.asarray(x, dtype=float) - self.x0)
        return self.c * (u * special.ndtr(u) + _phi(u))

    def antiderivative(self, side: float):
        raise IntegrabilityError("second antiderivative of normal cdf terms is not supported")

    def limit(self, point: float, approach: float):
        if math.isfinite(point):
            return float(self(point)), None
        if self.s * point < 0 or self.c == 0.0:
            return 0.0, None
        return _sgn(self.c) * INF, (0.0, 1.0, 0.0)

    def scaled(self, k: float) -> "NormCdfInt":
        return NormCdfInt(k * self.c, self.s, self.x0)


TERM_TYPES = (Poly, Exp, Power, Log, XLog, NormCdf, NormCdfInt)


def _combine_limits(parts) -> float:
    """Sum term limits, resolving divergent terms by dominance."""
    finite = [v for v, order in parts if order is None]
    divergent = [(order, v) for v, order in parts if order is not None]
    if not divergent:
        return float(math.fsum(finite))
    top = max(order for order, _ in divergent)
    signs = {v for order, v in divergent if order == top}
    if len(signs) > 1:
        raise IndeterminateError("competing divergent terms of equal order")
    return signs.pop()


# ---------------------------------------------------------------------------
# quadrature helper
# ---------------------------------------------------------------------------


def quad(fn: Callable[[float], float], a: float, b: float, points=None) -> float:
    """Adaptive quadrature that raises instead of warning."""
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if points is not None and math.isfinite(a) and math.isfinite(b):
                pts = [p for p in points if a < p < b]
                val, err = integrate.quad(fn, a, b, points=pts or None, limit=400,
                                          epsabs=1e-13, epsrel=1e-12)
            else:
                val, err = integrate.quad(fn, a, b, limit=400, epsabs=1e-13, epsrel=1e-12)
        except integrate.IntegrationWarning as exc:
            raise IntegrabilityError(f"quadrature on [{a}, {b}] failed: {exc}") from exc
    if not math.isfinite(val):
        raise IntegrabilityError(f"quadrature on [{a}, {b}] is not finite")
    return float(val)


# ---------------------------------------------------------------------------
# segments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """One analytic piece on the open interval ``(lo, hi)``."""

    lo: float
    hi: float
    terms: tuple = ()
    const: float = 0.0
    numeric = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"segment needs lo < hi, got ({self.lo}, {self.hi})")
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if not isinstance(t, TERM_TYPES):
                raise TypeError(f"unsupported term {t!r}")
            if t.singular and self.lo < t.x0 < self.hi:
                raise ValueError(f"singular point {t.x0} inside segment ({self.lo}, {self.hi})")

    # side of x0 for |x - x0| terms
    def _side(self, t) -> float:
        return 1.0 if self.lo >= t.x0 else -1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.const, dtype=float)
        for t in self.terms:
            out = out + t(x)
        return out

    @property
    def is_zero(self) -> bool:
        return self.const == 0.0 and all(_term_is_zero(t) for t in self.terms)

    @property
    def is_constant(self) -> bool:
        return all(_term_is_zero(t) for t in self.terms) or not self.terms

    @property
    def constant_value(self) -> float:
        return self.const

    def antiderivative(self) -> "Segment":
        terms = [t.antiderivative(self._side(t)) for t in self.terms if not _term_is_zero(t)]
        if self.const != 0.0:
            terms.append(Poly((0.0, self.const), 0.0))
        return Segment(self.lo, self.hi, _merge_terms(terms), 0.0)

    def limit(self, end: float) -> float:
        """One-sided limit at ``lo`` or ``hi`` from inside the segment."""
        approach = 1.0 if end == self.lo else -1.0
        parts = [(self.const, None)] + [t.limit(end, approach) for t in self.terms]
        return _combine_limits(parts)

    def value_at(self, x: float) -> float:
        if x == self.lo or x == self.hi:
            return self.limit(x)
        return float(self(x))

    def integrate(self, a: float, b: float) -> float:
        F = self.antiderivative()
        return ext_sub(F.value_at(b), F.value_at(a))

    def shifted(self, c: float) -> "Segment":
        return Segment(self.lo, self.hi, self.terms, self.const + c)

    def scaled(self, k: float) -> "Segment":
        return Segment(self.lo, self.hi, tuple(t.scaled(k) for t in self.terms), k * self.const)

    def restricted(self, lo: float, hi: float) -> "Segment":
        return Segment(lo, hi, self.terms, self.const)

    def affine_sigma(self):
        """Return (a0, a1, x0) if this segment is a + b (x - x0), else None."""
        polys = [t for t in self.terms if not _term_is_zero(t)]
        if not polys:
            return self.const, 0.0, 0.0
        if len(polys) == 1 and isinstance(polys[0], Poly) and polys[0].degree <= 1:
            p = polys[0]
            c = list(p.coeffs) + [0.0, 0.0]
            return c[0] + self.const, c[1], p.x0
        return None


def _term_is_zero(t) -> bool:
    if isinstance(t, Poly):
        return all(c == 0.0 for c in t.coeffs)
    return getattr(t, "c", 1.0) == 0.0


def _merge_terms(terms: Iterable) -> tuple:
    """Fold Poly terms sharing a centre into one term."""
    out = []
    polys: dict = {}
    for t in terms:
        if isinstance(t, Poly):
            prev = polys.get(t.x0)
            if prev is None:
                polys[t.x0] = t
            else:
                n = max(len(prev.coeffs), len(t.coeffs))
                a = list(prev.coeffs) + [0.0] * (n - len(prev.coeffs))
                b = list(t.coeffs) + [0.0] * (n - len(t.coeffs))
                polys[t.x0] = Poly(tuple(x + y for x, y in zip(a, b)), t.x0)
        else:
            out.append(t)
    return tuple(polys.values()) + tuple(out)


@dataclass(frozen=True, eq=False)
class NumericSegment:
    """A piece given by a vectorised callable; integrals use quadrature.

    Produced by compositions that leave the closed family. ``base`` is set on
    antiderivative segments and ``ref`` is the point where they vanish.
    When ``prim`` is given, antiderivatives use it instead of quadrature.
    """

    lo: float
    hi: float
    fn: Callable = field(repr=False)
    const: float = 0.0
    label: str = "numeric"
    base: "object" = field(default=None, repr=False)
    ref: float = math.nan
    _cache: dict = field(default_factory=dict, repr=False)
    # a known primitive of ``fn`` (without ``const``), when the caller has one
    prim: Callable | None = field(default=None, repr=False)
    numeric = True

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.base is None:
            return np.asarray(self.fn(x), dtype=float) + self.const
        tab = self._table()
        if tab is not None:
            inside = (x >= tab.xmin) & (x <= tab.xmax)
            if np.all(inside):
                return np.asarray(tab(x), dtype=float) + self.const
        flat = np.array([self._prim(v) for v in np.ravel(x)], dtype=float)
        return flat.reshape(x.shape) + self.const

    # antiderivatives are tabulated once on a core range around ``ref``;
    # points outside it continue from the nearest table end by quadrature
    TABLE_REACH = 200.0

    def _table(self):
        if "table" not in self._cache:
            from .hermite import HermiteTable

            width = self.hi - self.lo
            lo, hi = self.lo, self.hi
            a = lo + 1e-7 * width if math.isfinite(width) else max(lo, self.ref - self.TABLE_REACH)
            b = hi - 1e-7 * width if math.isfinite(width) else min(hi, self.ref + self.TABLE_REACH)
            if math.isfinite(lo) and not math.isfinite(width):
                a = lo + 1e-7 * max(1.0, abs(lo))
            if math.isfinite(hi) and not math.isfinite(width):
                b = hi - 1e-7 * max(1.0, abs(hi))
            try:
                base = self.base
                tab = HermiteTable(lambda t: np.asarray(base(t), dtype=float), [a, b], self.ref,
                                   tol=1e-12)
            except (IntegrabilityError, FloatingPointError, ValueError):
                tab = None
            self._cache["table"] = tab
        return self._cache["table"]

    def _prim(self, x: float) -> float:
        fn = lambda t: float(self.base(t))
        tab = self._table()
        if tab is None:
            return quad(fn, self.ref, x)
        if x < tab.xmin:
            return float(tab(tab.xmin)) - quad(fn, x, tab.xmin)
        if x > tab.xmax:
            return float(tab(tab.xmax)) + quad(fn, tab.xmax, x)
        return float(tab(x))

    @property
    def is_zero(self) -> bool:
        return False

    @property
    def is_constant(self) -> bool:
        return False

    def antiderivative(self) -> "NumericSegment":
        if self.prim is not None:
            prim, c = self.prim, self.const
            return NumericSegment(self.lo, self.hi,
                                  fn=lambda y: np.asarray(prim(y), dtype=float) + c * np.asarray(y),
                                  label=f"int({self.label})")
        ref = _interior_point(self.lo, self.hi)
        return NumericSegment(self.lo, self.hi, fn=None, label=f"int({self.label})",
                              base=self, ref=ref)

    def limit(self, end: float) -> float:
        if self.base is None:
            if math.isfinite(end):
                return float(self.fn(np.asarray(end))) + self.const
            probe = math.copysign(1e12, end)
            return float(self.fn(np.asarray(probe))) + self.const
        tab = self._table()
        fn = lambda t: float(self.base(t))
        if tab is not None:
            edge = tab.xmax if end > self.ref else tab.xmin
            return float(tab(edge)) + tail_integral(fn, edge, end) + self.const
        return tail_integral(fn, self.ref, end) + self.const

    def value_at(self, x: float) -> float:
        if x == self.lo or x == self.hi:
            return self.limit(x)
        return float(self(x))

    def integrate(self, a: float, b: float) -> float:
        return quad(lambda t: float(self(t)), a, b)

    def shifted(self, c: float) -> "NumericSegment":
        return NumericSegment(self.lo, self.hi, self.fn, self.const + c, self.label,
                              self.base, self.ref, self._cache, self.prim)

    def scaled(self, k: float) -> "NumericSegment":
        if self.base is not None:
            inner = self.base.scaled(k)
            return NumericSegment(self.lo, self.hi, None, k * self.const, self.label,
                                  inner, self.ref)
        fn, prim = self.fn, self.prim
        return NumericSegment(self.lo, self.hi, lambda x: k * np.asarray(fn(x)),
                              k * self.const, self.label,
                              prim=None if prim is None else (lambda x: k * np.asarray(prim(x))))

    def restricted(self, lo: float, hi: float) -> "NumericSegment":
        return NumericSegment(lo, hi, self.fn, self.const, self.label, self.base, self.ref,
                              prim=self.prim)

    def affine_sigma(self):
        return None


def tail_integral(fn: Callable[[float], float], ref: float, end: float,
                  max_pieces: int = 200) -> float:
    """``int_ref^end fn`` where ``fn`` may blow up at ``end``; ``+-inf`` if divergent.

    The range is cut into pieces that halve towards a finite ``end`` (or
    double towards an infinite one). The integral is declared divergent when
    the pieces stop shrinking.
    """
    if ref == end:
        return 0.0
    direction = 1.0 if end > ref else -1.0
    total = 0.0
    prev_piece = None
    stalled = 0
    a = ref
    for k in range(max_pieces):
        if math.isfinite(end):
            b = end - (end - ref) * 2.0 ** -(k + 1)
            if b == a:
                return total
        else:
            b = ref + direction * 2.0 ** k
        try:
            piece = quad(fn, a, b)
        except IntegrabilityError:
            piece = math.nan
        if not math.isfinite(piece):
            mid = float(fn(0.5 * (a + b)))
            return math.copysign(INF, mid * direction) if mid != 0 else math.nan
        total += piece
        if prev_piece is not None and abs(piece) >= 0.9 * abs(prev_piece) and abs(piece) > 1e-300:
            stalled += 1
            if stalled >= 8:
                return math.copysign(INF, piece)
        else:
            stalled = 0
        if abs(piece) <= 1e-16 * max(1.0, abs(total)) and k > 4:
            return total
        prev_piece = piece
        a = b
    return total


def _interior_point(lo: float, hi: float) -> float:
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return lo + 1.0
    if math.isfinite(hi):
        return hi - 1.0
    return 0.0


# ---------------------------------------------------------------------------
# piecewise functions
# ---------------------------------------------------------------------------


class PiecewiseFunction:
    """Real function on an interval, tiled by analytic segments.

    At a breakpoint the right-adjacent segment is used. Values on a
    Lebesgue-null set never matter to the stopping problem, so the choice is a
    convention only.
    """

    def __init__(self, segments: Sequence):
        segs = tuple(segments)
        if not segs:
            raise ValueError("at least one segment required")
        for left, right in zip(segs, segs[1:]):
            if left.hi != right.lo:
                raise ValueError(f"segments do not tile: {left.hi} != {right.lo}")
        self.segments = segs
        self._los = [s.lo for s in segs]

    # -- structure -------------------------------------------------------
    @property
    def lo(self) -> float:
        return self.segments[0].lo

    @property
    def hi(self) -> float:
        return self.segments[-1].hi

    @property
    def domain(self) -> tuple:
        return (self.lo, self.hi)

    @property
    def breakpoints(self) -> tuple:
        return tuple(s.lo for s in self.segments[1:])

    @property
    def is_symbolic(self) -> bool:
        return not any(s.numeric for s in self.segments)

    @property
    def is_zero(self) -> bool:
        return all(s.is_zero for s in self.segments)

    def __repr__(self):
        return f"PiecewiseFunction({list(self.segments)!r})"

    @classmethod
    def constant(cls, c: float, lo: float = -INF, hi: float = INF) -> "PiecewiseFunction":
        return cls([Segment(lo, hi, (), float(c))])

    def _check(self, x: float):
        if math.isnan(x) or x < self.lo or x > self.hi or (math.isinf(x) and x in (self.lo, self.hi)):
            raise DomainError(f"x = {x} outside state interval ({self.lo}, {self.hi})")

    def index(self, x: float) -> int:
        self._check(x)
        i = bisect.bisect_right(self._los, x) - 1
        return min(max(i, 0), len(self.segments) - 1)

    def segment_at(self, x: float):
        return self.segments[self.index(x)]

    # -- evaluation ------------------------------------------------------
    def __call__(self, x):
        if np.ndim(x) == 0:
            x = float(x)
            return float(self.segments[self.index(x)].value_at(x)) if x in (self.lo, self.hi) \
                else float(self.segments[self.index(x)](x))
        x = np.asarray(x, dtype=float)
        if np.any(np.isnan(x)) or np.any(x < self.lo) or np.any(x > self.hi):
            raise DomainError(f"points outside state interval ({self.lo}, {self.hi})")
        idx = np.clip(np.searchsorted(self._los, x, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty(x.shape, dtype=float)
        for k in np.unique(idx):
            mask = idx == k
            out[mask] = self.segments[k](x[mask])
        return out

    def limit(self, end: float) -> float:
        """Limit at a domain end (``self.lo`` or ``self.hi``) from inside."""
        if end == self.lo:
            return self.segments[0].limit(end)
        if end == self.hi:
            return self.segments[-1].limit(end)
        raise DomainError(f"{end} is not an end of the state interval")

    def left_limit(self, x: float) -> float:
        """Limit from the left at an interior point."""
        i = self.index(x)
        seg = self.segments[i]
        if x == seg.lo and i > 0:
            return self.segments[i - 1].limit(x)
        return seg.value_at(x)

    # -- calculus --------------------------------------------------------
    def integrate(self, a: float, b: float) -> float:
        """Integral over ``[a, b]`` with finite end points inside the domain."""
        if not (math.isfinite(a) and math.isfinite(b)):
            raise DomainError("integrate needs finite bounds; use improper_integral")
        if a > b:
            return -self.integrate(b, a)
        self._check(a)
        self._check(b)
        total = []
        for seg in self.segments:
            s, t = max(seg.lo, a), min(seg.hi, b)
            if s < t:
                val = seg.integrate(s, t)
                if not math.isfinite(val):
                    raise IntegrabilityError(f"divergent integral on [{s}, {t}]")
                total.append(val)
        return float(math.fsum(total))

    def improper_integral(self, a: float, direction: str) -> float:
        """Integral from ``a`` to the right or left end of the domain.

        Returns an exact value for convergent tails and a certified +-inf for
        divergent ones.
        """
        if direction not in ("left", "right"):
            raise ValueError("direction must be 'left' or 'right'")
        if a in (self.lo, self.hi) and not math.isfinite(a):
            raise DomainError("start point must be finite")
        self._check(a)
        parts = []
        if direction == "right":
            for seg in self.segments:
                s = max(seg.lo, a)
                if s < seg.hi:
                    parts.append(seg.integrate(s, seg.hi) if seg is self.segments[-1]
                                 else _finite(seg.integrate(s, seg.hi), s, seg.hi))
        else:
            for seg in self.segments:
                t = min(seg.hi, a)
                if seg.lo < t:
                    parts.append(seg.integrate(seg.lo, t) if seg is self.segments[0]
                                 else _finite(seg.integrate(seg.lo, t), seg.lo, t))
        return ext_add(*parts) if parts else 0.0

    def antiderivative(self, anchor: float) -> "PiecewiseFunction":
        """Continuous antiderivative vanishing at ``anchor``."""
        k0 = self.index(anchor)
        prims = [s.antiderivative() for s in self.segments]
        consts = [0.0] * len(prims)
        consts[k0] = -prims[k0].value_at(anchor)
        for k in range(k0 + 1, len(prims)):
            left = prims[k - 1].limit(prims[k - 1].hi) + consts[k - 1]
            right = prims[k].limit(prims[k].lo)
            if not (math.isfinite(left) and math.isfinite(right)):
                raise IntegrabilityError(f"antiderivative diverges at breakpoint {prims[k].lo}")
            consts[k] = left - right
        for k in range(k0 - 1, -1, -1):
            right = prims[k + 1].limit(prims[k + 1].lo) + consts[k + 1]
            left = prims[k].limit(prims[k].hi)
            if not (math.isfinite(left) and math.isfinite(right)):
                raise IntegrabilityError(f"antiderivative diverges at breakpoint {prims[k].hi}")
            consts[k] = right - left
        return PiecewiseFunction([p.shifted(c) for p, c in zip(prims, consts)])

    # -- algebra ---------------------------------------------------------
    def shift(self, c: float) -> "PiecewiseFunction":
        return PiecewiseFunction([s.shifted(c) for s in self.segments])

    def scale(self, k: float) -> "PiecewiseFunction":
        return PiecewiseFunction([s.scaled(k) for s in self.segments])

    def refine(self, points: Iterable[float]) -> "PiecewiseFunction":
        """Split segments at the given points (no change of values)."""
        pts = sorted({float(p) for p in points if self.lo < p < self.hi})
        out = []
        for seg in self.segments:
            cuts = [p for p in pts if seg.lo < p < seg.hi]
            edges = [seg.lo] + cuts + [seg.hi]
            for s, t in zip(edges, edges[1:]):
                out.append(seg.restricted(s, t))
        return PiecewiseFunction(out)


def _finite(v: float, a: float, b: float) -> float:
    if not math.isfinite(v):
        raise IntegrabilityError(f"divergent integral on [{a}, {b}]")
    return v


def common_breakpoints(*fns: PiecewiseFunction) -> list:
    pts = set()
    for fn in fns:
        pts.update(fn.breakpoints)
    return sorted(pts)


def piecewise(pieces: Sequence) -> PiecewiseFunction:
    """Build from ``(lo, hi, spec)`` tuples; ``spec`` is a number, a term or a list of terms."""
    segs = []
    for lo, hi, spec in pieces:
        if isinstance(spec, (int, float)):
            segs.append(Segment(lo, hi, (), float(spec)))
        elif isinstance(spec, TERM_TYPES):
            segs.append(Segment(lo, hi, (spec,)))
        else:
            spec = list(spec)
            const = sum(float(s) for s in spec if isinstance(s, (int, float)))
            terms = tuple(s for s in spec if not isinstance(s, (int, float)))
            segs.append(Segment(lo, hi, terms, const))
    return PiecewiseFunction(segs)


# ---------------------------------------------------------------------------
# roots and sign analysis
# ---------------------------------------------------------------------------


def _sample_points(lo: float, hi: float, n: int = 400) -> np.ndarray:
    if math.isfinite(lo) and math.isfinite(hi):
        w = hi - lo
        core = np.linspace(lo, hi, n + 2)[1:-1]
        edge = np.concatenate([lo + w * np.logspace(-12, -3, 20), hi - w * np.logspace(-12, -3, 20)])
        return np.unique(np.concatenate([core, edge]))
    offs = np.concatenate([np.logspace(-10, 0, 60), np.linspace(1.0, 50.0, n // 2),
                           np.logspace(np.log10(50.0), 4, n // 4)])
    if math.isfinite(lo):
        return lo + offs
    if math.isfinite(hi):
        return hi - offs[::-1]
    pos = np.concatenate([np.linspace(0, 50, n // 2), np.logspace(np.log10(50.0), 4, n // 4)])
    return np.unique(np.concatenate([-pos[::-1], pos]))


def segment_roots(seg) -> list:
    """Zeros of a segment on its open interval.

    Returns a sorted list of ``(x, crosses)`` where ``crosses`` tells whether
    the sign changes there. Identically zero segments return ``None``.
    """
    if seg.is_zero:
        return None
    if not seg.numeric:
        live = [t for t in seg.terms if not _term_is_zero(t)]
        if not live:
            return []
        if len(live) == 1 and isinstance(live[0], Poly):
            return _poly_roots(seg, live[0])
        if len(live) == 1 and seg.const == 0.0 and isinstance(live[0], (Exp, Power)):
            return []
    xs = _sample_points(seg.lo, seg.hi)
    with np.errstate(all="ignore"):
        ys = np.asarray(seg(xs), dtype=float)
    ok = np.isfinite(ys)
    xs, ys = xs[ok], ys[ok]
    roots = []
    scale = float(np.max(np.abs(ys))) if ys.size else 1.0
    for i in range(len(xs) - 1):
        y0, y1 = ys[i], ys[i + 1]
        if y0 == 0.0:
            roots.append(float(xs[i]))
        elif y0 * y1 < 0:
            roots.append(optimize.brentq(lambda t: float(seg(t)), xs[i], xs[i + 1], xtol=1e-15,
                                         rtol=4 * np.finfo(float).eps, maxiter=500))
    # touching zeros: local minima of |f| that reach zero without a sign change
    absy = np.abs(ys)
    for i in range(1, len(xs) - 1):
        if absy[i] <= absy[i - 1] and absy[i] <= absy[i + 1] and ys[i - 1] * ys[i + 1] > 0:
            res = optimize.minimize_scalar(lambda t: abs(float(seg(t))), bounds=(xs[i - 1], xs[i + 1]),
                                           method="bounded", options={"xatol": 1e-13})
            if res.fun <= 1e-12 * max(scale, 1.0):
                roots.append(float(res.x))
    roots = sorted(set(roots))
    return [(r, _crosses(seg, r)) for r in roots]


def _poly_roots(seg, p: Poly) -> list:
    coeffs = list(p.coeffs)
    coeffs[0] += seg.const
    if all(c == 0 for c in coeffs[1:]):
        return []
    rs = npoly.polyroots(coeffs)
    out = []
    for r in rs:
        if abs(r.imag) <= 1e-9 * max(1.0, abs(r.real)):
            x = float(r.real) + p.x0
            if seg.lo < x < seg.hi:
                out.append(x)
    uniq = []
    for x in sorted(out):
        if not uniq or x - uniq[-1] > 1e-10 * max(1.0, abs(x)):
            uniq.append(x)
    return [(x, _crosses(seg, x)) for x in uniq]


def _crosses(seg, r: float) -> bool:
    eps = 1e-6 * max(1.0, abs(r))
    a, b = max(seg.lo, r - eps), min(seg.hi, r + eps)
    a = a if a > seg.lo else 0.5 * (seg.lo + r) if math.isfinite(seg.lo) else r - eps
    b = b if b < seg.hi else 0.5 * (seg.hi + r) if math.isfinite(seg.hi) else r + eps
    return float(seg(a)) * float(seg(b)) < 0


# ---------------------------------------------------------------------------
# structural conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SignTemplate:
    """Points ``x1l <= x1r < x2l <= x2r`` of the one-favorable-region pattern."""

    x1l: float
    x1r: float
    x2l: float
    x2r: float

    def __post_init__(self):
        if not (self.x1l <= self.x1r < self.x2l <= self.x2r):
            raise ShapeError(f"template points out of order: {self.as_tuple()}")

    def as_tuple(self) -> tuple:
        return (self.x1l, self.x1r, self.x2l, self.x2r)

    def mapped(self, fn: Callable[[float], float]) -> "SignTemplate":
        return SignTemplate(*(float(fn(v)) for v in self.as_tuple()))

    @property
    def span(self) -> float:
        return max(1.0, self.x2r - self.x1l)


def _sign_tokens(f: PiecewiseFunction) -> list:
    tokens = []  # (sign, lo, hi)
    for seg in f.segments:
        roots = segment_roots(seg)
        if roots is None:
            tokens.append((0, seg.lo, seg.hi))
            continue
        for r, crosses in roots:
            if not crosses:
                raise ShapeError(f"f touches zero at x = {r:.12g} without changing sign; "
                                 "1/f is not locally bounded there")
        edges = [seg.lo] + [r for r, _ in roots] + [seg.hi]
        for s, t in zip(edges, edges[1:]):
            mid = _interior_point(s, t)
            val = float(seg(mid))
            sgn = int(np.sign(val))
            if sgn == 0:
                raise ShapeError(f"cannot determine the sign of f on ({s}, {t})")
            if s != seg.lo or _limit_is_zero(seg, s):
                tokens.append((0, s, s))
            tokens.append((sgn, s, t))
            if t == seg.hi and _limit_is_zero(seg, t):
                tokens.append((0, t, t))
    # merge runs
    merged = []
    for tok in tokens:
        if merged and merged[-1][0] == tok[0]:
            sgn, lo, _ = merged[-1]
            merged[-1] = (sgn, lo, tok[2])
        else:
            merged.append(tok)
    return merged


def _limit_is_zero(seg, end: float) -> bool:
    if not math.isfinite(end):
        return False
    try:
        return abs(seg.limit(end)) == 0.0
    except IndeterminateError:
        return False


def validate_shape(f: PiecewiseFunction) -> SignTemplate:
    """Extract the sign template of ``f`` or raise :class:`ShapeError`.

    Accepted pattern (left to right): negative, optional zero plateau,
    positive, optional zero plateau, negative. A sign change without a zero
    plateau yields a degenerate plateau ``x1l == x1r`` (resp. ``x2l == x2r``).
    """
    toks = _sign_tokens(f)
    # interior zero points adjacent to a jump are absorbed into the neighbour pattern
    signs = [t[0] for t in toks]
    pattern = "".join({-1: "-", 0: "0", 1: "+"}[s] for s in signs)
    if pattern not in ("-+-", "-0+-", "-+0-", "-0+0-"):
        raise ShapeError(f"sign pattern {pattern!r} of f is not negative/zero/positive/zero/negative")
    i_pos = signs.index(1)
    pos = toks[i_pos]
    left = toks[i_pos - 1]
    right = toks[i_pos + 1]
    x1l, x1r = (left[1], left[2]) if left[0] == 0 else (pos[1], pos[1])
    x2l, x2r = (right[1], right[2]) if right[0] == 0 else (pos[2], pos[2])
    if not (math.isfinite(x1l) and math.isfinite(x2r)):
        raise ShapeError("favorable region must be bounded")
    return SignTemplate(x1l, x1r, x2l, x2r)


@dataclass
class CheckResult:
    name: str
    passed: bool
    segment: int | None = None
    function: str | None = None
    message: str = ""


@dataclass
class CoeffReport:
    """Pass/fail record of the non-degeneracy and integrability checks."""

    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {"ok": self.ok, "checks": [c.__dict__ for c in self.checks]}


def _local_order(fn, x: float, side: float) -> float:
    """Exponent q with |fn(x + side*e)| ~ e^q as e -> 0 (0 for finite nonzero limits)."""
    e1, e2 = 1e-4, 1e-7
    v1 = abs(float(fn(x + side * e1)))
    v2 = abs(float(fn(x + side * e2)))
    if v1 == 0.0 and v2 == 0.0:
        return INF
    if v2 == 0.0:
        return INF
    if not math.isfinite(v2):
        return -INF
    q = math.log(v1 / v2) / math.log(e1 / e2)
    return 0.0 if abs(q) < 1e-3 else q


def validate_coeffs(b: PiecewiseFunction, sigma: PiecewiseFunction,
                    f: PiecewiseFunction) -> CoeffReport:
    """Check sigma != 0 and local integrability of 1/sigma^2, b/sigma^2, f/sigma^2."""
    checks = []
    if not (b.domain == sigma.domain == f.domain):
        checks.append(CheckResult("common domain", False,
                                  message=f"domains differ: b {b.domain}, sigma {sigma.domain}, f {f.domain}"))
        return CoeffReport(checks)
    ok = True
    for i, seg in enumerate(sigma.segments):
        roots = segment_roots(seg)
        if roots is None or roots:
            where = "identically" if roots is None else f"at x = {roots[0][0]:.12g}"
            checks.append(CheckResult("sigma(x) != 0", False, i, "sigma",
                                      f"sigma vanishes {where} on segment {i} ({seg.lo}, {seg.hi})"))
            ok = False
    if ok:
        checks.append(CheckResult("sigma(x) != 0", True))
    # integrability near breakpoints interior to the domain
    pts = common_breakpoints(b, sigma, f)
    for name, num in (("1/sigma^2", None), ("b/sigma^2", b), ("f/sigma^2", f)):
        bad = None
        for x in pts:
            for side in (-1.0, 1.0):
                qs = _local_order(sigma, x, side)
                qn = 0.0 if num is None else _local_order(num, x, side)
                if qn == INF:
                    continue
                if qn - 2.0 * qs <= -1.0:
                    bad = (x, side)
                    break
            if bad:
                break
        if bad:
            idx = sigma.index(bad[0])
            checks.append(CheckResult(f"{name} locally integrable", False, idx, name,
                                      f"{name} not integrable near x = {bad[0]:.12g}"))
        else:
            checks.append(CheckResult(f"{name} locally integrable", True))
    return CoeffReport(checks)


# ---------------------------------------------------------------------------
# problem specification
# ---------------------------------------------------------------------------


@dataclass
class ProblemSpec:
    """Coefficients, gain function and discount rate of a stopping problem."""

    b: PiecewiseFunction
    sigma: PiecewiseFunction
    f: PiecewiseFunction
    lam: float = 0.0
    name: str = ""
    _template: SignTemplate | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("discount rate must be >= 0")

    @property
    def interval(self) -> tuple:
        return self.f.domain

    @property
    def is_driftless(self) -> bool:
        return self.b.is_zero

    @property
    def template(self) -> SignTemplate:
        if self._template is None:
            self._template = validate_shape(self.f)
        return self._template

    def coeff_report(self) -> CoeffReport:
        return validate_coeffs(self.b, self.sigma, self.f)

    def validate(self) -> "ProblemSpec":
        rep = self.coeff_report()
        if not rep.ok:
            msg = "; ".join(c.message for c in rep.failures)
            raise CoefficientError(f"Engelbert-Schmidt condition violated: {msg}")
        _ = self.template
        return self

    def breakpoints(self) -> list:
        return common_breakpoints(self.b, self.sigma, self.f)
