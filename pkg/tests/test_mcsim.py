import math

import pytest

from optstop.errors import PreconditionError
from optstop.mcsim import (
    HorizonCap,
    LeftExit,
    TwoSidedExit,
    default_seed,
    simulate_payoff,
    zscore,
)
from optstop.oracle import green_value
from optstop.reference import asym, box, drift_box


def test_box_inner_rule_matches_oracle():
    spec = box()
    est = simulate_payoff(spec, TwoSidedExit(-1.0, 1.0), 0.0, n_paths=20_000, seed=3)
    ref = green_value(spec, -1.0, 1.0, 0.0)
    assert ref == pytest.approx(1.0)
    assert abs(zscore(est, ref)) < 4.0
    assert est.truncated_fraction == 0.0


def test_same_seed_same_answer():
    spec = box()
    r = TwoSidedExit(-2.0, 2.0)
    a = simulate_payoff(spec, r, 0.3, n_paths=2000, seed=9)
    b = simulate_payoff(spec, r, 0.3, n_paths=2000, seed=9)
    c = simulate_payoff(spec, r, 0.3, n_paths=2000, seed=10)
    assert a.mean == b.mean and a.stderr == b.stderr
    assert c.mean != a.mean


def test_environment_seed(monkeypatch):
    monkeypatch.setenv("OPTSTOP_SEED", "1234")
    assert default_seed() == 1234
    est = simulate_payoff(box(), TwoSidedExit(-1.0, 1.0), 0.0, n_paths=100)
    assert est.seed == 1234


def test_start_on_boundary_is_immediate():
    est = simulate_payoff(box(), TwoSidedExit(-1.0, 1.0), 1.0, n_paths=10)
    assert est.mean == 0.0 and est.stderr == 0.0 and est.diagnostics["immediate"]


def test_one_sided_rules_need_a_cap():
    with pytest.raises(PreconditionError):
        simulate_payoff(asym(), LeftExit(-2.5), 0.0, n_paths=10)


def test_capped_one_sided_rule_is_flagged():
    est = simulate_payoff(asym(), HorizonCap(25.0, LeftExit(-2.5)), 0.0, n_paths=4000, seed=1)
    assert est.truncation_biased and est.truncated_fraction > 0.0
    # truncation only removes a payoff in [-4.5, 0] per path (bounded below by the right tail)
    assert est.mean <= 4.25 + 4 * est.stderr


def test_antithetic_pairs():
    est = simulate_payoff(box(), TwoSidedExit(-2.0, 2.0), 0.0, n_paths=4000, seed=2, antithetic=True)
    assert abs(zscore(est, 2.0)) < 4.0
    with pytest.raises(ValueError):
        simulate_payoff(box(), TwoSidedExit(-2.0, 2.0), 0.0, n_paths=5, antithetic=True)


def test_drift_problem_in_natural_scale():
    from optstop.pipeline import solve_general

    spec = drift_box(0.5)
    sol = solve_general(spec)
    est = simulate_payoff(spec, TwoSidedExit(sol.x1s, sol.x2s), 0.0, n_paths=20_000, seed=4)
    assert abs(zscore(est, sol.V(0.0))) < 4.0


def test_zscore_edge_cases():
    from optstop.mcsim import Estimate

    e = Estimate(1.0, 0.0, 10, 0, 0.0)
    assert zscore(e, 1.0) == 0.0
    assert zscore(e, 0.0) == math.inf
