import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optstop.errors import CoefficientError, ShapeError
from optstop.funcmodel import (
    INF,
    Exp,
    NormCdf,
    NumericSegment,
    PiecewiseFunction,
    Poly,
    Power,
    ProblemSpec,
    ext_add,
    piecewise,
    quad,
    tail_integral,
    validate_shape,
)

coef = st.floats(-3.0, 3.0, allow_nan=False)


def test_ext_add_rejects_opposite_infinities():
    assert ext_add(1.0, INF) == INF
    with pytest.raises(Exception):
        ext_add(INF, -INF)


@settings(max_examples=40, deadline=None)
@given(c0=coef, c1=coef, c2=coef, k=coef, a=st.floats(-2.0, 0.0), b=st.floats(0.1, 2.0))
def test_antiderivative_matches_quadrature(c0, c1, c2, k, a, b):
    f = piecewise([(-INF, 0.0, [Poly((c0, c1, c2)), Exp(k, 0.5, 0.0)]),
                   (0.0, INF, [NormCdf(c1, 1.0, 0.0), Exp(c2, -1.0, 0.0)])])
    F = f.antiderivative(0.0)
    ref = quad(lambda x: float(f(x)), a, b, points=[0.0])
    assert float(F(b)) - float(F(a)) == pytest.approx(ref, rel=1e-9, abs=1e-10)
    assert float(F(0.0)) == pytest.approx(0.0, abs=1e-14)


def test_improper_tails_are_exact():
    f = piecewise([(-INF, -1.0, Exp(-1.0, 1.0, -1.0)), (-1.0, 1.0, 1.0),
                   (1.0, INF, Exp(-1.0, -1.0, 1.0))])
    F = f.antiderivative(0.0)
    assert F.limit(INF) == pytest.approx(0.0, abs=1e-15)
    assert F.limit(-INF) == pytest.approx(0.0, abs=1e-15)


def test_power_tail_limit():
    f = piecewise([(-INF, -1.0, Power(-0.5, -2.0, 0.0)), (-1.0, INF, 0.0)])
    F = f.antiderivative(-1.0)
    # int_{-inf}^{-1} -1/(2x^2) dx = -1/2
    assert F.limit(-INF) == pytest.approx(0.5, rel=1e-14)


def test_numeric_segment_with_primitive():
    seg = NumericSegment(0.0, 2.0, fn=lambda y: np.cos(y), prim=lambda y: np.sin(y))
    pf = PiecewiseFunction([seg]).shift(0.5)
    F = pf.antiderivative(1.0)
    x = 1.7
    assert float(F(x)) == pytest.approx(math.sin(x) - math.sin(1.0) + 0.5 * (x - 1.0), rel=1e-13)


def test_tail_integral_flags_divergence():
    assert tail_integral(lambda x: 1.0 / x, 1.0, INF) == INF
    assert tail_integral(lambda x: math.exp(-x), 0.0, INF) == pytest.approx(1.0, rel=1e-12)
    assert tail_integral(lambda x: -1.0 / math.sqrt(x), 1.0, 0.0) == pytest.approx(2.0, rel=1e-9)


def test_sign_template_with_plateaus():
    f = piecewise([(-INF, -2.0, -1.0), (-2.0, -1.0, 0.0), (-1.0, 1.0, 1.0), (1.0, 3.0, 0.0),
                   (3.0, INF, -1.0)])
    assert validate_shape(f).as_tuple() == (-2.0, -1.0, 1.0, 3.0)


def test_sign_template_from_smooth_roots():
    f = piecewise([(-INF, INF, Poly((1.0, 0.0, -1.0)))])
    assert validate_shape(f).as_tuple() == pytest.approx((-1.0, -1.0, 1.0, 1.0), abs=1e-12)


def test_two_positive_regions_rejected():
    f = piecewise([(-INF, -2.0, -1.0), (-2.0, -1.0, 1.0), (-1.0, 1.0, -1.0), (1.0, 2.0, 1.0),
                   (2.0, INF, -1.0)])
    with pytest.raises(ShapeError):
        validate_shape(f)


def test_vanishing_sigma_names_the_condition():
    f = piecewise([(-INF, -1.0, -1.0), (-1.0, 1.0, 1.0), (1.0, INF, -1.0)])
    sigma = piecewise([(-INF, 0.0, 1.0), (0.0, 1.0, 0.0), (1.0, INF, 1.0)])
    spec = ProblemSpec(PiecewiseFunction.constant(0.0), sigma, f)
    with pytest.raises(CoefficientError, match="Engelbert-Schmidt"):
        spec.validate()


def test_right_segment_wins_at_breakpoints():
    f = piecewise([(-INF, 0.0, -1.0), (0.0, INF, 2.0)])
    assert float(f(0.0)) == 2.0
    assert f.left_limit(0.0) == -1.0
