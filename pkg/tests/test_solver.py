import math

import pytest

from optstop.errors import NotSolvable, PreconditionError
from optstop.htransform import classify, htransform_of
from optstop.reference import box, exp_tails, heavy
from optstop.solver import find_cstar, make_sequence, payoff_two_sided, solve
from optstop.values import NoOptimum, TwoSided


@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0, 4.0])
def test_box_family_boundaries(kappa):
    sol = solve(box(kappa))
    assert isinstance(sol, TwoSided)
    edge = 1.0 + 1.0 / kappa
    assert sol.x1s == pytest.approx(-edge, abs=1e-10)
    assert sol.x2s == pytest.approx(edge, abs=1e-10)
    assert sol.report.ok


def test_box_value_closed_form():
    sol = solve(box())
    # V = 2 - x^2 on (-1, 1) and (2 - |x|)^2 on 1 < |x| < 2
    for x, v in ((0.0, 2.0), (0.5, 1.75), (1.5, 0.25), (-1.5, 0.25), (2.5, 0.0)):
        assert sol.V(x) == pytest.approx(v, abs=1e-12)
    for x in (sol.x1s, sol.x2s):
        assert sol.V.derivative(x) == pytest.approx(0.0, abs=1e-12)


def test_payoff_never_beats_the_value():
    H = htransform_of(box())
    sol = solve(box())
    for a, b in ((-1.5, 1.0), (-3.0, 2.0), (-2.0, 1.9), (-0.5, 0.5)):
        P = payoff_two_sided(H, a, b)
        for x in (-0.4, 0.0, 0.3):
            assert P(x) <= sol.V(x) + 1e-12


def test_cstar_only_for_solvable():
    with pytest.raises(NotSolvable):
        find_cstar(htransform_of(exp_tails()))


def test_exp_tails_have_no_optimum_but_finite_value():
    sol = solve(exp_tails())
    assert isinstance(sol, NoOptimum) and not sol.infinite
    assert sol.V(0.0) == pytest.approx(3.0, abs=1e-9)


def test_asymptotic_sequence_increases_to_the_value():
    H = htransform_of(exp_tails())
    plan = make_sequence(H)
    vals = [plan.payoff(n)(0.0) for n in range(1, 21)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert 3.0 - vals[-1] < 1e-3
    assert plan(3) == plan(3)


def test_pathological_sequence_stays_bounded():
    H = htransform_of(heavy())
    cl = classify(H)
    plan = make_sequence(H, "pathological", cl)
    for n in range(1, 6):
        a, b, c = plan(n)
        U = plan.value(n)
        assert max(U(x) for x in (a + 0.5 * (b - a) * k / 10 for k in range(1, 20))) <= cl.Kminus + 1e-6


def test_sequences_need_case1():
    with pytest.raises(PreconditionError):
        make_sequence(htransform_of(box()))


def test_heavy_value_is_infinite():
    sol = solve(heavy())
    assert sol.infinite
    assert math.isinf(sol.V(0.0))
