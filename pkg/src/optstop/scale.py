"""Scale function, reduction to natural scale, and pull-back of solutions.

The scale function ``p(x) = int_{c0}^x exp(-int_{c0}^y 2b/sigma^2)`` turns the
diffusion into a local martingale ``Y = p(X)`` with volatility
``(p' sigma) o p^{-1}``. Three build modes are used:

``identity``
    ``b == 0``; nothing to do.
``exact``
    ``2b/sigma^2`` is piecewise constant. Then ``p`` is piecewise
    exponential, ``p^{-1}`` is closed form and ``p' o p^{-1}`` is affine, so
    the transformed volatility and gain stay inside the symbolic family
    whenever ``sigma`` and ``f`` are piecewise constant.
``grid``
    Everything else. ``p`` is tabulated on breakpoint-aligned cells with
    20-point Gauss-Legendre increments, refined until cubic Hermite
    interpolation (using the exact slope ``p'``) reproduces half-cell
    integrals to about 1e-13. Outside the table adaptive quadrature and
    bracketing take over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import CoefficientError, DomainError, IntegrabilityError
from .funcmodel import (
    INF,
    Exp,
    NumericSegment,
    PiecewiseFunction,
    Poly,
    ProblemSpec,
    Segment,
    common_breakpoints,
    quad,
    tail_integral,
)
from .hermite import HermiteTable


@dataclass(eq=False)
class ScaleTransform:
    """Monotone map ``p`` with ``p(c0) = 0`` and its inverse."""

    c0: float
    interval: tuple
    mode: str
    inner: PiecewiseFunction | None = None
    Jt: tuple = (-INF, INF)
    _p: object = field(default=None, repr=False)
    _pd: object = field(default=None, repr=False)
    _table: HermiteTable | None = field(default=None, repr=False)
    _pieces: list = field(default_factory=list, repr=False)

    @property
    def is_identity(self) -> bool:
        return self.mode == "identity"

    @property
    def exact(self) -> bool:
        return self.mode in ("identity", "exact")

    # -- maps ------------------------------------------------------------
    def pderiv(self, x):
        if self.is_identity:
            return np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0
        return self._pd(x)

    def p(self, x):
        if self.is_identity:
            return np.asarray(x, dtype=float) - self.c0 if np.ndim(x) else float(x) - self.c0
        if self.mode == "exact":
            return self._p(x)
        return self._grid_p(x)

    __call__ = p

    def inverse(self, y):
        if self.is_identity:
            return np.asarray(y, dtype=float) + self.c0 if np.ndim(y) else float(y) + self.c0
        scalar = np.ndim(y) == 0
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if np.any(y < self.Jt[0]) or np.any(y > self.Jt[1]):
            raise DomainError(f"y outside transformed interval {self.Jt}")
        if self.mode == "exact":
            out = self._exact_inverse(y)
        else:
            out = self._grid_inverse(y)
        return float(out[0]) if scalar else out

    # -- exact mode --------------------------------------------------------
    def _exact_inverse(self, y):
        out = np.empty_like(y)
        ys = np.array([pc[4] for pc in self._pieces])
        idx = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, len(self._pieces) - 1)
        for j in np.unique(idx):
            r, p_r, P_r, k, _, _ = self._pieces[j]
            m = idx == j
            u = y[m] - p_r
            if k == 0.0:
                out[m] = r + u / P_r
            else:
                out[m] = r - np.log1p(-k * u / P_r) / k
        return out

    # -- grid mode ---------------------------------------------------------
    def _grid_p(self, x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.interval
        if np.any(x < lo) or np.any(x > hi):
            raise DomainError(f"x outside state interval {self.interval}")
        tab = self._table
        out = np.asarray(tab(x), dtype=float)
        below = x < tab.xmin
        above = x > tab.xmax
        for i in np.flatnonzero(below | above):
            xi = float(x[i])
            if math.isinf(xi):
                out[i] = self.Jt[0] if xi < 0 else self.Jt[1]
            elif above[i]:
                out[i] = float(tab(tab.xmax)) + quad(lambda s: float(self._pd(s)), tab.xmax, xi)
            else:
                out[i] = float(tab(tab.xmin)) - quad(lambda s: float(self._pd(s)), xi, tab.xmin)
        return float(out[0]) if scalar else out

    def _grid_inverse(self, y):
        tab = self._table
        out = np.asarray(tab.inverse(y), dtype=float)
        ylo, yhi = float(tab(tab.xmin)), float(tab(tab.xmax))
        for i in np.flatnonzero((y < ylo) | (y > yhi)):
            out[i] = self._bracket_inverse(float(y[i]))
        return out

    def _bracket_inverse(self, y: float) -> float:
        tab = self._table
        lo, hi = self.interval
        if math.isinf(y):
            return lo if y < 0 else hi
        if y > float(tab(tab.xmax)):
            a, step = tab.xmax, 1.0
            b = min(hi, a + step)
            while self._grid_p(b) < y:
                a, step = b, 2 * step
                b = hi if math.isfinite(hi) and a + step >= hi else a + step
                if step > 1e15:
                    raise DomainError("inverse bracket expansion failed")
        else:
            b, step = tab.xmin, 1.0
            a = max(lo, b - step)
            while self._grid_p(a) > y:
                b, step = a, 2 * step
                a = lo if math.isfinite(lo) and b - step <= lo else b - step
                if step > 1e15:
                    raise DomainError("inverse bracket expansion failed")
        return optimize.brentq(lambda s: self._grid_p(s) - y, a, b, xtol=1e-12, rtol=4e-16)

    # -- reporting ---------------------------------------------------------
    def grid_dump(self, xs) -> np.ndarray:
        """Columns x, p(x), p'(x) for a CSV dump."""
        xs = np.asarray(xs, dtype=float)
        return np.column_stack([xs, self.p(xs), self.pderiv(xs)])


def identity_transform(interval: tuple) -> ScaleTransform:
    return ScaleTransform(0.0, tuple(interval), "identity", None, tuple(interval))


def _drift_ratio(b: PiecewiseFunction, sigma: PiecewiseFunction) -> PiecewiseFunction:
    """2b/sigma^2 on the common refinement, symbolic whenever sigma is constant."""
    pts = common_breakpoints(b, sigma)
    bb, ss = b.refine(pts), sigma.refine(pts)
    segs = []
    for sb, sv in zip(bb.segments, ss.segments):
        if sb.is_zero:
            segs.append(Segment(sb.lo, sb.hi, (), 0.0))
        elif not sv.numeric and sv.is_constant and not sb.numeric:
            segs.append(sb.scaled(2.0 / sv.const ** 2))
        else:
            segs.append(NumericSegment(sb.lo, sb.hi,
                                       fn=lambda x, sb=sb, sv=sv: 2.0 * sb(x) / sv(x) ** 2,
                                       label="2b/sigma^2"))
    return PiecewiseFunction(segs)


def build_scale(b: PiecewiseFunction, sigma: PiecewiseFunction, c0: float,
                core: tuple | None = None) -> ScaleTransform:
    """Scale function anchored at ``c0``.

    ``core`` is the region where the table must be accurate (defaults to a
    window around ``c0``); beyond it the table extends while ``p'`` stays
    within ``exp(+-50)`` of ``p'(c0)``.
    """
    interval = b.domain
    if not interval[0] < c0 < interval[1]:
        raise DomainError(f"anchor c0 = {c0} outside state interval")
    if b.is_zero:
        t = identity_transform(interval)
        t.c0 = 0.0
        return t
    try:
        ratio = _drift_ratio(b, sigma)
        inner_sym = ratio.is_symbolic
        inner = ratio.antiderivative(c0) if inner_sym else None
    except IntegrabilityError as exc:
        raise CoefficientError(f"b/sigma^2 is not locally integrable: {exc}") from None

    if inner_sym and all(s.is_constant for s in ratio.segments):
        return _build_exact(ratio, inner, c0, interval)

    if inner is None:
        tab_inner = HermiteTable(lambda x: np.asarray(ratio(x)), _table_edges(ratio, c0, core, None),
                                 c0, tol=1e-14)
        inner_eval = tab_inner
    else:
        inner_eval = inner
    pd = _PDeriv(inner_eval)
    edges = _table_edges(ratio, c0, core, inner_eval)
    table = HermiteTable(pd, edges, c0)
    t = ScaleTransform(c0, interval, "grid", inner, _p=None, _pd=pd, _table=table)
    t.Jt = (_tail_value(t, interval[0]), _tail_value(t, interval[1]))
    return t


class _PDeriv:
    def __init__(self, inner):
        self.inner = inner

    def __call__(self, x):
        with np.errstate(over="ignore"):
            return np.exp(-np.asarray(self.inner(x), dtype=float))


def _table_edges(ratio: PiecewiseFunction, c0: float, core, inner) -> list:
    lo, hi = ratio.domain
    bps = list(ratio.breakpoints)
    a = min([c0] + bps) - 2.0
    bnd = max([c0] + bps) + 2.0
    if core is not None:
        a, bnd = min(a, core[0]), max(bnd, core[1])
    a = max(a, lo if math.isfinite(lo) else -INF)
    bnd = min(bnd, hi if math.isfinite(hi) else INF)

    def reach(x0, direction, limit):
        if math.isfinite(limit):
            return limit - direction * 1e-12 * max(1.0, abs(limit))
        if inner is None:
            return x0 + direction * 50.0
        step, x = 1.0, x0
        base = float(np.asarray(inner(c0)))
        while abs(x - x0) < 1e4:
            nxt = x + direction * step
            if abs(float(np.asarray(inner(nxt))) - base) > 50.0:
                return nxt
            x, step = nxt, step * 1.5
        return x

    left = reach(a, -1.0, lo) if (not math.isfinite(lo) or a - lo < 1e-9) else lo + 1e-12 * max(1.0, abs(lo))
    right = reach(bnd, 1.0, hi) if (not math.isfinite(hi) or hi - bnd < 1e-9) else hi - 1e-12 * max(1.0, abs(hi))
    if math.isfinite(lo):
        left = lo + 1e-12 * max(1.0, abs(lo))
    if math.isfinite(hi):
        right = hi - 1e-12 * max(1.0, abs(hi))
    return [left] + [x for x in bps if left < x < right] + [right]


def _tail_value(t: ScaleTransform, end: float) -> float:
    tab = t._table
    if end < 0 and not math.isfinite(end) or end < tab.xmin:
        start, sgn = tab.xmin, -1.0
    else:
        start, sgn = tab.xmax, 1.0
    base = float(tab(start))
    try:
        rest = quad(lambda s: float(t._pd(s)), start, end) if sgn > 0 else \
            quad(lambda s: float(t._pd(s)), end, start)
    except IntegrabilityError:
        return sgn * INF
    if not math.isfinite(end):
        # integrable only if p' has actually decayed at the far end
        far = end if math.isfinite(end) else math.copysign(1e8, end)
        if float(t._pd(far)) * 1e8 > 1e-6:
            return sgn * INF
    return base + sgn * rest


def _build_exact(ratio: PiecewiseFunction, inner: PiecewiseFunction, c0: float,
                 interval: tuple) -> ScaleTransform:
    segs = []
    for seg_k, seg_i in zip(ratio.segments, inner.segments):
        k = seg_k.const
        r = seg_k.lo if math.isfinite(seg_k.lo) else (seg_k.hi if math.isfinite(seg_k.hi) else c0)
        I_r = seg_i.value_at(r) if seg_k.lo < r < seg_k.hi else seg_i.limit(r)
        P_r = math.exp(-I_r)
        if k == 0.0:
            segs.append(Segment(seg_k.lo, seg_k.hi, (), P_r))
        else:
            segs.append(Segment(seg_k.lo, seg_k.hi, (Exp(P_r, -k, r),)))
    pd = PiecewiseFunction(segs)
    p = pd.antiderivative(c0)
    pieces = []
    for seg_k, seg_p, seg_d in zip(ratio.segments, p.segments, pd.segments):
        k = seg_k.const
        r = seg_k.lo if math.isfinite(seg_k.lo) else (seg_k.hi if math.isfinite(seg_k.hi) else c0)
        p_r = seg_p.limit(r) if r in (seg_k.lo, seg_k.hi) else float(seg_p(r))
        P_r = seg_d.limit(r) if r in (seg_k.lo, seg_k.hi) else float(seg_d(r))
        y_lo = seg_p.limit(seg_k.lo)
        pieces.append((r, p_r, P_r, k, y_lo, seg_k.lo))
    Jt = (p.limit(interval[0]), p.limit(interval[1]))
    return ScaleTransform(c0, interval, "exact", inner, Jt, _p=p, _pd=pd, _pieces=pieces)


def default_anchor(spec: ProblemSpec) -> float:
    tpl = spec.template
    return 0.5 * (tpl.x1r + tpl.x2l)


def _affine_sigma_segment(seg_sigma, seg_k, piece, lo_y, hi_y):
    """sigma~ on one exact-mode piece: sigma * (P_r - k (y - p_r))."""
    r, p_r, P_r, k, _, _ = piece
    s = seg_sigma.const
    if k == 0.0:
        return Segment(lo_y, hi_y, (), s * P_r)
    return Segment(lo_y, hi_y, (Poly((s * P_r, -s * k), p_r),))


def transform_problem(spec: ProblemSpec, c0: float | None = None):
    """Return ``(driftless spec on Jt, ScaleTransform)``."""
    if spec.is_driftless:
        return spec, identity_transform(spec.interval)
    if c0 is None:
        c0 = default_anchor(spec)
    tpl = spec.template
    t = build_scale(spec.b, spec.sigma, c0,
                    core=(tpl.x1l - 3 * tpl.span, tpl.x2r + 3 * tpl.span))
    pts = spec.breakpoints()
    sig = spec.sigma.refine(pts)
    f = spec.f.refine(pts)
    ylo, yhi = t.Jt
    edges = [ylo] + [float(t.p(x)) for x in pts] + [yhi]
    sig_segs, f_segs = [], []
    for i, (ss, fs) in enumerate(zip(sig.segments, f.segments)):
        a, b = edges[i], edges[i + 1]
        if t.mode == "exact" and not ss.numeric and ss.is_constant:
            sig_segs.append(_affine_sigma_segment(ss, None, _piece_at(t, ss), a, b))
        else:
            sig_segs.append(NumericSegment(a, b, fn=_composed_sigma(t, ss), label="sigma~"))
        if not fs.numeric and fs.is_constant:
            f_segs.append(Segment(a, b, (), fs.const))
        else:
            f_segs.append(NumericSegment(a, b, fn=_composed(t, fs), label="f~"))
    sigma_t = PiecewiseFunction(sig_segs)
    f_t = PiecewiseFunction(f_segs)
    b_t = PiecewiseFunction([Segment(s.lo, s.hi, (), 0.0) for s in f_segs])
    out = ProblemSpec(b_t, sigma_t, f_t, spec.lam, name=spec.name)
    out._template = tpl.mapped(t.p)
    if any(s.numeric for s in sig_segs + f_segs):
        out._h_hint = _speed_hint(spec, t, out._template, edges)
    return out, t


class _SpeedIntegrals:
    """``h~`` and its running area, computed in the original coordinate.

    With ``y = p(x)``, ``h~(y) = int -2 f / (sigma^2 p') dx`` and
    ``int h~ dy = int h~(p(x)) p'(x) dx``. Both integrands stay smooth in
    ``x`` even where the natural-scale ones blow up at the ends of ``Jt``.
    """

    def __init__(self, spec: ProblemSpec, t: ScaleTransform, x_anchor: float):
        self.t = t
        self.lo, self.hi = spec.interval
        f, sig, pd = spec.f, spec.sigma, t.pderiv
        def g(x):
            with np.errstate(over="ignore", divide="ignore"):
                return -2.0 * np.asarray(f(x)) / (np.asarray(sig(x)) ** 2 * pd(x))

        self.g = g
        tpl = spec.template
        reach = 10.0 * max(1.0, tpl.span)
        a, b = tpl.x1l - reach, tpl.x2r + reach
        if math.isfinite(self.lo):
            a = max(a, self.lo + 1e-7 * max(1.0, abs(self.lo)))
        if math.isfinite(self.hi):
            b = min(b, self.hi - 1e-7 * max(1.0, abs(self.hi)))
        edges = [a] + [q for q in spec.breakpoints() if a < q < b] + [b]
        self.Htab = HermiteTable(self.g, edges, x_anchor, tol=1e-10)
        self.dA = lambda x: self.H(x) * pd(x)
        self.Atab = HermiteTable(self.dA, edges, x_anchor, tol=1e-10)

    def x_of(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        ylo, yhi = self.t.Jt
        out = np.empty_like(y)
        low, high = y <= ylo, y >= yhi
        mid = ~(low | high)
        out[low], out[high] = self.lo, self.hi
        if np.any(mid):
            out[mid] = self.t.inverse(y[mid])
        return out

    def _eval(self, tab, fn, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inside = (x >= tab.xmin) & (x <= tab.xmax)
        out = np.empty_like(x)
        if np.any(inside):
            out[inside] = tab(x[inside])
        for i in np.flatnonzero(~inside):
            out[i] = self._continue(tab, fn, float(x[i]))
        return out

    def _continue(self, tab, fn, x: float) -> float:
        edge = tab.xmin if x < tab.xmin else tab.xmax
        scalar = lambda s: float(np.asarray(fn(np.asarray([s])))[0])
        if x in (self.lo, self.hi) or not math.isfinite(x):
            return float(tab(edge)) + tail_integral(scalar, edge, x)
        return float(tab(edge)) + quad(scalar, edge, x)

    def H(self, x):
        return self._eval(self.Htab, self.g, x)

    def A(self, x):
        return self._eval(self.Atab, self.dA, x)


def _speed_hint(spec: ProblemSpec, t: ScaleTransform, template_y, edges: list):
    from .htransform import default_h_anchor

    y_anchor = default_h_anchor(t.Jt, template_y)
    si = _SpeedIntegrals(spec, t, float(t.inverse(y_anchor)))

    def hy(y):
        v = si.H(si.x_of(y))
        return v if np.ndim(y) else float(v[0])

    def ay(y):
        v = si.A(si.x_of(y))
        return v if np.ndim(y) else float(v[0])

    segs = [NumericSegment(a, b, fn=hy, label="h~", prim=ay) for a, b in zip(edges[:-1], edges[1:])]
    return PiecewiseFunction(segs), y_anchor


def _piece_at(t: ScaleTransform, seg):
    xs = [pc[5] for pc in t._pieces]
    j = max(0, np.searchsorted(xs, seg.lo, side="right") - 1)
    return t._pieces[j]


def _composed(t: ScaleTransform, seg):
    def fn(y):
        return seg(t.inverse(np.asarray(y, dtype=float)))
    return fn


def _composed_sigma(t: ScaleTransform, seg):
    def fn(y):
        x = t.inverse(np.asarray(y, dtype=float))
        return t.pderiv(x) * seg(x)
    return fn


# ---------------------------------------------------------------------------
# pull-back
# ---------------------------------------------------------------------------


def pull_back(solution, t: ScaleTransform):
    """Map a solution of the natural-scale problem back to original coordinates."""
    from .values import (
        InfiniteValue,
        NoOptimum,
        OneSidedLeft,
        OneSidedRight,
        PulledBackValue,
        TwoSided,
    )

    if t.is_identity and t.c0 == 0.0:
        return solution

    def V(v):
        if isinstance(v, InfiniteValue) or v is None:
            return v
        return PulledBackValue(v, t)

    inv = lambda y: float(t.inverse(y)) if math.isfinite(y) else (t.interval[0] if y < 0 else t.interval[1])
    if isinstance(solution, TwoSided):
        return TwoSided(inv(solution.x1s), inv(solution.x2s), V(solution.V), solution.cstar,
                        solution.report, dict(solution.meta, scale_mode=t.mode))
    if isinstance(solution, OneSidedLeft):
        return OneSidedLeft(inv(solution.alpha), V(solution.V), solution.level,
                            dict(solution.meta, scale_mode=t.mode))
    if isinstance(solution, OneSidedRight):
        return OneSidedRight(inv(solution.beta), V(solution.V), solution.level,
                             dict(solution.meta, scale_mode=t.mode))
    if isinstance(solution, NoOptimum):
        return NoOptimum(V(solution.value), solution.classification, solution.plan,
                         dict(solution.meta, scale_mode=t.mode))
    raise TypeError(f"cannot pull back {type(solution).__name__}")
