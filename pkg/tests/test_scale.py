import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from optstop.funcmodel import quad
from optstop.hermite import HermiteTable
from optstop.pipeline import solve_general
from optstop.reference import drift_box, ou
from optstop.scale import build_scale, pull_back, transform_problem
from optstop.solver import solve


@pytest.fixture(scope="module")
def drift():
    spec = drift_box(0.5)
    return spec, transform_problem(spec)


def test_exact_scale_for_constant_drift(drift):
    spec, (natural, t) = drift
    assert t.mode == "exact"
    # b = -1/2, sigma = 1: p'(x) = exp(x - c0)
    xs = np.linspace(-3.0, 3.0, 13)
    np.testing.assert_allclose(t.pderiv(xs), np.exp(xs - t.c0), rtol=1e-13)
    np.testing.assert_allclose(t.p(xs), np.exp(xs - t.c0) - 1.0, rtol=1e-12, atol=1e-14)
    assert t.Jt == (pytest.approx(-1.0), math.inf)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-6.0, 6.0))
def test_inverse_round_trip(drift, x):
    _, (_, t) = drift
    assert float(t.inverse(t.p(x))) == pytest.approx(x, abs=1e-11)


def test_tabulated_scale_for_linear_drift():
    spec = ou(0.0)
    _, t = transform_problem(spec)
    assert t.mode == "grid"
    xs = np.linspace(-4.0, 4.0, 17)
    exact = math.sqrt(math.pi / 2) * erf(xs / math.sqrt(2.0))
    np.testing.assert_allclose(t.p(xs) - float(t.p(0.0)), exact, atol=1e-10)
    assert t.Jt[1] - t.Jt[0] == pytest.approx(math.sqrt(2.0 * math.pi), rel=1e-9)


def test_natural_problem_is_driftless_with_mapped_template(drift):
    spec, (natural, t) = drift
    assert natural.is_driftless
    tpl, ntpl = spec.template, natural.template
    assert ntpl.x1l == pytest.approx(float(t.p(tpl.x1l)))
    assert ntpl.x2r == pytest.approx(float(t.p(tpl.x2r)))


def test_pull_back_values_agree(drift):
    spec, (natural, t) = drift
    nat_sol = solve(natural)
    sol = pull_back(nat_sol, t)
    for x in (-1.0, 0.0, 0.7, 2.0):
        assert sol.V(x) == pytest.approx(nat_sol.V(float(t.p(x))), rel=1e-12, abs=1e-14)
    assert sol.x1s == pytest.approx(float(t.inverse(nat_sol.x1s)), abs=1e-12)


def test_invariance_under_the_scale_anchor():
    spec = drift_box(0.5)
    a = pull_back(solve(transform_problem(spec, 0.0)[0]), transform_problem(spec, 0.0)[1])
    b_nat, tb = transform_problem(spec, 1.3)
    b = pull_back(solve(b_nat), tb)
    assert a.x1s == pytest.approx(b.x1s, abs=1e-9)
    assert a.x2s == pytest.approx(b.x2s, abs=1e-9)
    assert a.V(0.2) == pytest.approx(b.V(0.2), rel=1e-9)


def test_hermite_table_keeps_precision_near_anchor():
    # the increments far out dwarf everything near the anchor
    fn = lambda x: np.exp(0.5 * np.asarray(x) ** 2)
    tab = HermiteTable(fn, [-12.0, 12.0], 0.0, tol=1e-10)
    ref = quad(lambda x: float(fn(x)), 0.0, 0.3)
    assert float(tab(0.3)) == pytest.approx(ref, rel=1e-9)
    assert float(tab(0.0)) == 0.0


def test_build_scale_rejects_missing_anchor():
    spec = drift_box(0.5)
    with pytest.raises(Exception):
        build_scale(spec.b, spec.sigma, math.inf)


@pytest.mark.slow
def test_tabulated_transform_matches_shooting():
    from optstop.shooting import solve_shooting

    spec = ou(0.0)
    sol = solve_general(spec)
    shot = solve_shooting(spec, validate=False)
    assert sol.report.ok
    assert sol.x1s == pytest.approx(shot.x1s, abs=1e-6)
    assert sol.x2s == pytest.approx(shot.x2s, abs=1e-6)
    assert sol.x1s + sol.x2s == pytest.approx(0.0, abs=1e-8)
