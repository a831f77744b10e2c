import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optstop.htransform import classify, htransform_of
from optstop.reference import asym, box, exp_tails, heavy


@pytest.fixture(scope="module")
def H_box():
    return htransform_of(box())


def test_box_h_is_piecewise_linear(H_box):
    # g = -2 f: h(x) = -2x on (-1, 1), slope +2 outside
    for x, v in ((0.5, -1.0), (-0.5, 1.0), (3.0, -2.0 + 4.0), (-3.0, 2.0 - 4.0)):
        assert float(H_box.h(x)) == pytest.approx(v, abs=1e-14)
    assert H_box.h_minus_inf == -math.inf
    assert H_box.h_plus_inf == math.inf


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-1.9, 1.9))
def test_roots_solve_h_equals_c(H_box, c):
    a, b = H_box.root_alpha(c), H_box.root_beta(c)
    assert a < -1.0 < 1.0 < b
    assert float(H_box.h(a)) == pytest.approx(c, abs=1e-12)
    assert float(H_box.h(b)) == pytest.approx(c, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(c1=st.floats(-1.9, 1.9), c2=st.floats(-1.9, 1.9))
def test_smooth_fit_area_decreases_in_level(H_box, c1, c2):
    if abs(c1 - c2) < 1e-6:
        return
    lo, hi = sorted((c1, c2))
    S = lambda c: H_box.area(H_box.root_alpha(c), H_box.root_beta(c), c)
    assert S(lo) > S(hi)


def test_classification_kinds():
    assert classify(htransform_of(box())).kind == "Solvable"
    cl = classify(htransform_of(exp_tails()))
    assert cl.kind == "Case1"
    assert cl.m == pytest.approx(0.0, abs=1e-12)
    cl = classify(htransform_of(asym()))
    assert cl.kind == "Case2"
    # int_{-2.5}^{inf} (h + 1) = 2.25 + 2 - 1 > 0, so the left condition fails
    assert cl.details["A2_integral"] == pytest.approx(3.25, abs=1e-9)
    cl = classify(htransform_of(heavy()))
    assert cl.kind == "Case1" and cl.Kplus == math.inf


def test_mirror_image_swaps_one_sided_case():
    from optstop.funcmodel import Exp, PiecewiseFunction, ProblemSpec, piecewise

    f = piecewise([(-math.inf, -1.0, Exp(-0.5, 1.0, -1.0)), (-1.0, 1.0, 1.0), (1.0, math.inf, -1.0)])
    spec = ProblemSpec(PiecewiseFunction.constant(0.0), PiecewiseFunction.constant(1.0), f)
    assert classify(htransform_of(spec)).kind == "Case3"


def test_area_is_additive(H_box):
    c = 0.3
    whole = H_box.area(-2.5, 2.0, c)
    parts = H_box.area(-2.5, 0.1, c) + H_box.area(0.1, 2.0, c)
    assert whole == pytest.approx(parts, abs=1e-13)
    xs = np.linspace(-2.5, 2.0, 200001)
    trap = np.trapezoid(np.asarray(H_box.h(xs)) - c, xs)
    assert whole == pytest.approx(trap, abs=1e-8)
