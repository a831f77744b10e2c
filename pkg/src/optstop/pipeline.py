"""Route a problem to the right solver."""

from __future__ import annotations

from .errors import ValidationError
from .funcmodel import ProblemSpec
from .scale import pull_back, transform_problem
from .shooting import solve_shooting, validate_solution
from .solver import solve
from .values import TwoSided


def solve_general(spec: ProblemSpec, validate: bool = True, window: tuple | None = None,
                  tol: float = 1e-12, return_transform: bool = False):
    """Exact solution when ``lam = 0`` (after the scale transform if ``b != 0``),
    shooting otherwise.

    Drift problems are solved in natural scale and pulled back; a two-sided
    result is then validated again in the original coordinates. With
    ``return_transform`` the result is ``(solution, natural spec, transform)``
    (the last two are ``None`` for shooting).
    """
    spec.validate()
    if spec.lam > 0:
        sol = solve_shooting(spec, window=window, tol=tol, validate=validate)
        return (sol, None, None) if return_transform else sol
    natural, t = transform_problem(spec)
    if spec.is_driftless:
        sol = solve(spec, validate=validate)
        return (sol, natural, t) if return_transform else sol
    # a tabulated transform makes every natural-scale evaluation go through a
    # numeric inverse; there the check in original coordinates is the only one
    in_natural = validate and t.mode != "grid"
    sol = pull_back(solve(natural, validate=in_natural), t)
    if isinstance(sol, TwoSided) and validate:
        rep = validate_solution(spec, sol.V, sol.x1s, sol.x2s)
        sol.meta["natural_scale_validation"] = (sol.report.as_dict() if in_natural and sol.report
                                                else None)
        sol.report = rep
        if not rep.ok:
            raise ValidationError("pulled-back solution failed validation: " + "; ".join(rep.reasons), rep)
    return (sol, natural, t) if return_transform else sol
