"""The h-transform of a driftless, undiscounted problem and its classification.

With ``g = -2 f / sigma^2`` and ``h(x) = int_0^x g`` the problem is governed
by the shifted transform ``H(x, c) = h(x) - c``: optimal boundaries are the
tail roots of ``H(., c*)`` that enclose zero signed area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import optimize

from .errors import RootDomainError
from .funcmodel import (
    NumericSegment,
    PiecewiseFunction,
    Power,
    ProblemSpec,
    Segment,
    SignTemplate,
    common_breakpoints,
    ext_add,
    validate_shape,
)

ROOT_TOL = 1e-12


def _g_segment(fs, ss):
    """-2 f / sigma^2 on one common segment, symbolic where the family allows."""
    if fs.is_zero:
        return Segment(fs.lo, fs.hi, (), 0.0)
    if not fs.numeric and not ss.numeric:
        if ss.is_constant:
            return fs.scaled(-2.0 / ss.const ** 2)
        aff = ss.affine_sigma()
        if aff is not None and fs.is_constant:
            a0, a1, x0 = aff
            root = x0 - a0 / a1
            if not fs.lo < root < fs.hi:
                return Segment(fs.lo, fs.hi, (Power(-2.0 * fs.const / a1 ** 2, -2.0, root),))
    return NumericSegment(fs.lo, fs.hi, fn=lambda x, fs=fs, ss=ss: -2.0 * fs(x) / ss(x) ** 2,
                          label="g")


def build_g(f: PiecewiseFunction, sigma: PiecewiseFunction) -> PiecewiseFunction:
    pts = common_breakpoints(f, sigma)
    ff, ss = f.refine(pts), sigma.refine(pts)
    return PiecewiseFunction([_g_segment(a, b) for a, b in zip(ff.segments, ss.segments)])


@dataclass(eq=False)
class HTransform:
    """``g``, ``h`` and the derived tail limits, plateau values and roots."""

    g: PiecewiseFunction
    h: PiecewiseFunction
    template: SignTemplate
    anchor: float = 0.0
    bracket_bound: float = 1e6
    h_minus_inf: float = field(init=False)
    h_plus_inf: float = field(init=False)
    plateau_left: float = field(init=False)
    plateau_right: float = field(init=False)
    _hints: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.h_minus_inf = self.h.limit(self.h.lo)
        self.h_plus_inf = self.h.limit(self.h.hi)
        self.plateau_left = float(self.h(self.template.x1l))
        self.plateau_right = float(self.h(self.template.x2r))

    @property
    def lo(self) -> float:
        return self.h.lo

    @property
    def hi(self) -> float:
        return self.h.hi

    @property
    def is_symbolic(self) -> bool:
        return self.h.is_symbolic

    def H(self, x, c: float):
        return self.h(x) - c

    def h_at(self, x: float) -> float:
        """h including the limits at the ends of the state interval."""
        if x == self.lo or x == self.hi:
            return self.h.limit(x)
        return float(self.h(x))

    # -- signed areas ------------------------------------------------------
    def hint(self, c: float) -> PiecewiseFunction:
        """Antiderivative of ``H(., c)`` vanishing at the anchor."""
        c = float(c)
        F = self._hints.get(c)
        if F is None:
            if len(self._hints) > 256:
                self._hints.clear()
            F = self.h.shift(-c).antiderivative(self.anchor)
            self._hints[c] = F
        return F

    def area(self, a: float, b: float, c: float) -> float:
        """``int_a^b H(y, c) dy`` for ``a <= b``; ends may be infinite."""
        if a > b:
            return -self.area(b, a, c)
        if a == b:
            return 0.0
        F = self.hint(c)
        fa = F.limit(a) if a == self.lo else float(F(a))
        fb = F.limit(b) if b == self.hi else float(F(b))
        return ext_add(fb, -fa)

    # -- roots ---------------------------------------------------------------
    def _root(self, c: float, lo: float, hi: float, increasing: bool, grow_from: str,
              bound: float | None = None) -> float:
        """Root of h = c on a monotone branch between ``lo`` and ``hi`` (possibly infinite)."""
        bound = self.bracket_bound if bound is None else bound
        sgn = 1.0 if increasing else -1.0
        f = lambda x: sgn * (float(self.h(x)) - c)
        if grow_from == "right":  # unbounded (or open) side is the left end
            b = hi
            a, step = None, 1.0
            while a is None:
                cand = hi - step
                if math.isfinite(lo) and cand <= lo:
                    k = 1
                    while True:
                        cand = lo + (hi - lo) * 2.0 ** (-k)
                        if f(cand) < 0:
                            break
                        k += 1
                        if k > 60:
                            raise RootDomainError(f"no root of h = {c} found near the left end {lo}")
                    a = cand
                    break
                if f(cand) < 0:
                    a = cand
                    break
                if step > bound:
                    raise RootDomainError(
                        f"bracket for h = {c} not found within {bound} of {hi}; "
                        "increase bracket_bound")
                b = cand
                step *= 2.0
        else:
            a = lo
            b, step = None, 1.0
            while b is None:
                cand = lo + step
                if math.isfinite(hi) and cand >= hi:
                    k = 1
                    while True:
                        cand = hi - (hi - lo) * 2.0 ** (-k)
                        if f(cand) > 0:
                            break
                        k += 1
                        if k > 60:
                            raise RootDomainError(f"no root of h = {c} found near the right end {hi}")
                    b = cand
                    break
                if f(cand) > 0:
                    b = cand
                    break
                if step > bound:
                    raise RootDomainError(
                        f"bracket for h = {c} not found within {bound} of {lo}; "
                        "increase bracket_bound")
                a = cand
                step *= 2.0
        fa, fb = f(a), f(b)
        if fa == 0.0:
            return a
        if fb == 0.0:
            return b
        x = optimize.brentq(f, a, b, xtol=1e-300, rtol=1e-15, maxiter=500)
        return x

    def root_alpha(self, c: float, allow_edge: bool = False, bound: float | None = None) -> float:
        """Root of ``h = c`` left of ``x1l``; needs ``h(-inf) < c < h(x1l)``."""
        x1l = self.template.x1l
        if allow_edge and c == self.plateau_left:
            return x1l
        if not c < self.plateau_left:
            raise RootDomainError(f"alpha_c needs H(x1l, c) > 0, but h(x1l) = {self.plateau_left} <= c = {c}")
        if not c > self.h_minus_inf:
            raise RootDomainError(f"alpha_c needs H(-inf, c) < 0, but h(-inf) = {self.h_minus_inf} >= c = {c}")
        return self._root(c, self.lo, x1l, True, "right", bound)

    def root_beta(self, c: float, allow_edge: bool = False, bound: float | None = None) -> float:
        """Root of ``h = c`` right of ``x2r``; needs ``h(x2r) < c < h(+inf)``."""
        x2r = self.template.x2r
        if allow_edge and c == self.plateau_right:
            return x2r
        if not c > self.plateau_right:
            raise RootDomainError(f"beta_c needs H(x2r, c) < 0, but h(x2r) = {self.plateau_right} >= c = {c}")
        if not c < self.h_plus_inf:
            raise RootDomainError(f"beta_c needs H(+inf, c) > 0, but h(+inf) = {self.h_plus_inf} <= c = {c}")
        return self._root(c, x2r, self.hi, True, "left", bound)

    def root_gamma(self, c: float) -> float:
        """Root of ``h = c`` in the favorable region; needs ``h(x2l) < c < h(x1r)``."""
        tpl = self.template
        top = float(self.h(tpl.x1r))
        bot = float(self.h(tpl.x2l))
        if not bot < c < top:
            raise RootDomainError(f"gamma_c needs h(x2l) = {bot} < c < h(x1r) = {top}, got c = {c}")
        f = lambda x: float(self.h(x)) - c
        return optimize.brentq(f, tpl.x1r, tpl.x2l, xtol=1e-300, rtol=1e-15, maxiter=500)

    # -- smooth-fit area -----------------------------------------------------
    @property
    def m1(self) -> float:
        return max(self.plateau_right, self.h_minus_inf)

    @property
    def m2(self) -> float:
        return min(self.plateau_left, self.h_plus_inf)

    def smoothfit_report(self, c: float) -> dict:
        a = self.root_alpha(c, allow_edge=True)
        b = self.root_beta(c, allow_edge=True)
        degenerate = a == self.template.x1l or b == self.template.x2r
        return {"c": c, "alpha": a, "beta": b, "S": self.area(a, b, c),
                "boundary_degenerate": degenerate}

    def smoothfit_area(self, c: float) -> float:
        """``S(c) = int_{alpha_c}^{beta_c} H(y, c) dy``."""
        return self.smoothfit_report(c)["S"]


def default_h_anchor(interval: tuple, template: SignTemplate) -> float:
    lo, hi = interval
    if lo < 0.0 < hi:
        return 0.0
    return 0.5 * (template.x1r + template.x2l)


def build_h(f: PiecewiseFunction, sigma: PiecewiseFunction, template: SignTemplate | None = None,
            bracket_bound: float = 1e6, hint=None) -> HTransform:
    """g = -2 f / sigma^2 and its antiderivative h (h(0) = 0 when 0 is in the interval).

    ``hint`` is an ``(h, anchor)`` pair computed elsewhere, used as is.
    """
    if template is None:
        template = validate_shape(f)
    g = build_g(f, sigma)
    if hint is not None:
        h, anchor = hint
        return HTransform(g, h, template, anchor, bracket_bound)
    anchor = default_h_anchor(f.domain, template)
    h = g.antiderivative(anchor)
    return HTransform(g, h, template, anchor, bracket_bound)


def htransform_of(spec: ProblemSpec, bracket_bound: float = 1e6) -> HTransform:
    if not spec.is_driftless:
        raise ValueError("h-transform needs a driftless spec; apply the scale transform first")
    return build_h(spec.f, spec.sigma, spec.template, bracket_bound,
                   hint=getattr(spec, "_h_hint", None))


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

KINDS = ("Solvable", "Case1", "Case2", "Case3")


@dataclass
class Classification:
    kind: str
    m: float | None = None
    Kplus: float | None = None
    Kminus: float | None = None
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "m": self.m, "Kplus": self.Kplus, "Kminus": self.Kminus,
                "details": self.details}


def classify(H: HTransform) -> Classification:
    """Decide Solvable / Case1 / Case2 / Case3 from the tail limits of h."""
    hm, hp = H.h_minus_inf, H.h_plus_inf
    hl, hr = H.plateau_left, H.plateau_right
    d = {"h(-inf)": hm, "h(+inf)": hp, "h(x1l)": hl, "h(x2r)": hr,
         "template": list(H.template.as_tuple())}
    a1 = hp > hm
    d["A1"] = a1
    if not a1:
        m = 0.5 * (hp + hm)
        gamma = H.root_gamma(m)
        kplus = H.area(H.lo, gamma, m)
        kminus = -H.area(gamma, H.hi, m)
        d.update({"A2": None, "A3": None, "gamma_m": gamma})
        return Classification("Case1", m, kplus, kminus, d)

    # (A2): non-vacuous only when h(+inf) < h(x1l)
    a2 = True
    if hp < hl:
        alpha = H.root_alpha(hp)
        i2 = H.area(alpha, H.hi, hp)
        a2 = i2 < 0
        d.update({"A2_vacuous": False, "A2_integral": i2, "alpha_h(+inf)": alpha})
    else:
        d["A2_vacuous"] = True
    a3 = True
    if hm > hr:
        beta = H.root_beta(hm)
        i3 = H.area(H.lo, beta, hm)
        a3 = i3 > 0
        d.update({"A3_vacuous": False, "A3_integral": i3, "beta_h(-inf)": beta})
    else:
        d["A3_vacuous"] = True
    d["A2"], d["A3"] = a2, a3
    if a2 and a3:
        return Classification("Solvable", details=d)
    if not a2 and not a3:
        d["conflict"] = "both (A2) and (A3) fail"
    return Classification("Case2" if not a2 else "Case3", details=d)


def root_alpha(H: HTransform, c: float) -> float:
    return H.root_alpha(c)


def root_beta(H: HTransform, c: float) -> float:
    return H.root_beta(c)


def root_gamma(H: HTransform, c: float) -> float:
    return H.root_gamma(c)


def smoothfit_area(H: HTransform, c: float) -> float:
    return H.smoothfit_area(c)


__all__ = [
    "HTransform", "Classification", "build_g", "build_h", "htransform_of", "classify",
    "root_alpha", "root_beta", "root_gamma", "smoothfit_area",
]
