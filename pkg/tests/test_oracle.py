import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optstop.errors import DomainError, PreconditionError
from optstop.htransform import htransform_of
from optstop.oracle import green_kernel, green_value, green_value_one_sided, grid_check
from optstop.reference import asym, box, drift_box
from optstop.solver import payoff_two_sided, solve

unit = st.floats(0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(-5.0, 0.0), w=st.floats(0.1, 5.0), s=unit, t=unit)
def test_kernel_symmetric_nonnegative_and_vanishing(a, w, s, t):
    b = a + w
    x, y = a + s * w, a + t * w
    g = green_kernel(a, b, x, y)
    assert g == pytest.approx(green_kernel(a, b, y, x), abs=1e-12)
    assert g >= 0.0
    assert green_kernel(a, b, a, y) == 0.0 and green_kernel(a, b, x, b) == 0.0
    assert g <= green_kernel(a, b, y, y) + 1e-12


def test_kernel_rejects_bad_input():
    with pytest.raises(DomainError):
        green_kernel(1.0, 0.0, 0.5, 0.5)
    with pytest.raises(DomainError):
        green_kernel(0.0, 1.0, 1.5, 0.5)


def test_expected_exit_time():
    # f = 1, sigma = 1: E tau = (x - a)(b - x)
    from optstop.funcmodel import PiecewiseFunction, ProblemSpec, piecewise

    f = piecewise([(-np.inf, -1.0, -1.0), (-1.0, 1.0, 1.0), (1.0, np.inf, -1.0)])
    spec = ProblemSpec(PiecewiseFunction.constant(0.0), PiecewiseFunction.constant(1.0), f)
    assert green_value(spec, -0.9, 0.9, 0.3) == pytest.approx(1.2 * 0.6, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-4.0, -0.2), b=st.floats(0.2, 4.0), s=st.floats(0.01, 0.99))
def test_oracle_equals_payoff(a, b, s):
    spec = box()
    x = a + s * (b - a)
    P = payoff_two_sided(htransform_of(spec), a, b)
    assert green_value(spec, a, b, x) == pytest.approx(P(x), abs=1e-9)


def test_grid_check_on_optimal_rule():
    sol = solve(box())
    rows = grid_check(box(), sol.V, sol.x1s, sol.x2s)
    assert len(rows) == 21 and max(r[3] for r in rows) < 1e-10


def test_one_sided_limit():
    v = green_value_one_sided(asym(), "left", -2.5, 0.0)
    assert v == pytest.approx(4.25, abs=1e-5)
    assert green_value_one_sided(asym(), "left", -2.5, -3.0) == 0.0


def test_drift_needs_natural_scale():
    with pytest.raises(PreconditionError):
        green_value(drift_box(), -1.0, 1.0, 0.0)


def test_one_sided_rule_without_finite_limit():
    from optstop.errors import NonConvergent

    with pytest.raises(NonConvergent) as info:
        green_value_one_sided(box(), "left", -2.0, 0.0)
    fars, vals = zip(*info.value.history)
    assert vals[-1] < vals[0]
