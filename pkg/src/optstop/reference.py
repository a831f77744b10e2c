"""Reference problems with hand-checkable answers.

==========  ==================================================  ===============================
name        data (sigma = 1, b = 0, lambda = 0 unless noted)     known answer
==========  ==================================================  ===============================
box         f = 1 on (-1, 1), -kappa outside                     boundaries +-(1 + 1/kappa)
exp         f = 1 on (-1, 1), -e^{-(|x| - 1)} outside            Case1, m = 0, K+ = K- = 3
asym        f = -1 left of -1, 1 on (-1, 1), -e^{-(x-1)}/2       Case2, alpha = -2.5, V(0) = 4.25
heavy       f = -1/(2x^2) left, 1, -3/2 e^{-(x-1)} right          Case1, K+ = inf, K- = 5.25
drift       box with b = -theta                                  solve after the scale transform
ou          b = x, sigma = sqrt 2, lambda = 2, 3 - 4 Phi(|x|)    symmetric two-sided
ko          J = (0, inf), b = -theta, lambda > 0, quadratic f    shape fixture
==========  ==================================================  ===============================
"""

from __future__ import annotations

import math

from .funcmodel import (
    INF,
    Exp,
    NormCdf,
    PiecewiseFunction,
    Poly,
    Power,
    ProblemSpec,
    piecewise,
)


def _const(c: float, lo: float = -INF, hi: float = INF) -> PiecewiseFunction:
    return PiecewiseFunction.constant(c, lo, hi)


def box(kappa: float = 1.0) -> ProblemSpec:
    f = piecewise([(-INF, -1.0, -kappa), (-1.0, 1.0, 1.0), (1.0, INF, -kappa)])
    name = "box" if kappa == 1.0 else f"box-kappa{kappa:g}"
    return ProblemSpec(_const(0.0), _const(1.0), f, name=name)


def exp_tails(kappa: float = 1.0) -> ProblemSpec:
    f = piecewise([(-INF, -1.0, Exp(-kappa, 1.0, -1.0)), (-1.0, 1.0, 1.0),
                   (1.0, INF, Exp(-kappa, -1.0, 1.0))])
    return ProblemSpec(_const(0.0), _const(1.0), f, name="exp")


def asym(eps: float = 0.5) -> ProblemSpec:
    f = piecewise([(-INF, -1.0, -1.0), (-1.0, 1.0, 1.0), (1.0, INF, Exp(-eps, -1.0, 1.0))])
    return ProblemSpec(_const(0.0), _const(1.0), f, name="asym")


def heavy() -> ProblemSpec:
    """Power left tail: ``f = -1/(2 x^2)`` below -1, 1 on (-1, 1), ``-3/2 e^{-(x-1)}`` above 1.

    ``h`` tends to the same limit at both ends, the left area is infinite
    and the right one is 5.25.
    """
    f = piecewise([(-INF, -1.0, Power(-0.5, -2.0, 0.0)), (-1.0, 1.0, 1.0),
                   (1.0, INF, Exp(-1.5, -1.0, 1.0))])
    return ProblemSpec(_const(0.0), _const(1.0), f, name="heavy")


def drift_box(theta: float = 0.5) -> ProblemSpec:
    f = piecewise([(-INF, -1.0, -1.0), (-1.0, 1.0, 1.0), (1.0, INF, -1.0)])
    return ProblemSpec(_const(-theta), _const(1.0), f, name=f"drift-theta{theta:g}")


def ou(lam: float = 2.0) -> ProblemSpec:
    f = piecewise([(-INF, 0.0, [NormCdf(-4.0, -1.0), 3.0]), (0.0, INF, [NormCdf(-4.0, 1.0), 3.0])])
    return ProblemSpec(piecewise([(-INF, INF, Poly((0.0, 1.0)))]), _const(math.sqrt(2.0)), f,
                       lam=lam, name="ou")


def ko(lam: float = 0.5, delta: float = 1.0, theta: float = 1.0) -> ProblemSpec:
    """Quadratic gain on the half line.

    Negative, positive, negative (as required) when
    ``lam*delta < 1 < lam*delta + theta^2*delta``.
    """
    f = piecewise([(0.0, INF, Poly((-delta, 2.0 * delta * theta, lam * delta - 1.0)))])
    return ProblemSpec(_const(-theta, 0.0, INF), _const(1.0, 0.0, INF), f, lam=lam, name="ko")


REFERENCES = {
    "box": box,
    "exp": exp_tails,
    "asym": asym,
    "heavy": heavy,
    "drift": drift_box,
    "ou": ou,
    "ko": ko,
}
