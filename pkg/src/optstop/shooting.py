"""Shooting solver for the free boundary problem and post-hoc validation.

On ``(x1, x2)`` the candidate value satisfies

    V' = W,   W' = (2 / sigma^2) (lam V - b W - f),   V(x1) = W(x1) = 0,

and the right boundary is where ``V`` returns to zero with ``W = 0``. The
system is integrated one coefficient segment at a time so the high-order
stepper never sees a discontinuity.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate, optimize

from .errors import NoRoot, ValidationError
from .funcmodel import ProblemSpec
from .values import CallableValue, TwoSided, ValueFunction

BLOWUP = 1e12
RTOL = 1e-11
ATOL = 1e-12


def _fast(seg):
    if not seg.numeric and seg.is_constant:
        c = float(seg.const)
        return lambda x: c
    return lambda x: float(seg(x))


@dataclass
class Trajectory:
    """Piecewise dense solution ``(V, W)`` started at ``x1``."""

    x1: float
    chunks: list = field(default_factory=list)
    events: list = field(default_factory=list)
    end: float = math.nan
    status: str = "complete"

    def _sol(self, x: float):
        starts = [c[0] for c in self.chunks]
        i = max(0, bisect.bisect_right(starts, x) - 1)
        return self.chunks[i][2]

    def state(self, x: float) -> tuple:
        if x < self.x1 or x > self.end:
            raise ValueError(f"x = {x} outside trajectory range [{self.x1}, {self.end}]")
        y = self._sol(x)(x)
        return float(y[0]), float(y[1])

    def V(self, x):
        if np.ndim(x) == 0:
            return self.state(float(x))[0]
        return np.array([self.state(float(v))[0] for v in np.ravel(x)]).reshape(np.shape(x))

    def W(self, x):
        if np.ndim(x) == 0:
            return self.state(float(x))[1]
        return np.array([self.state(float(v))[1] for v in np.ravel(x)]).reshape(np.shape(x))

    @property
    def nodes(self) -> np.ndarray:
        return np.unique(np.concatenate([c[2].ts for c in self.chunks]))

    def first(self, kind: str, direction: int | None = None, after: float = -math.inf):
        for ev in self.events:
            if ev["kind"] == kind and ev["x"] > after and (direction is None or ev["direction"] == direction):
                return ev
        return None


def _scan_chunk(sol, x1: float, traj: Trajectory):
    ts = sol.ts
    pts = np.empty(2 * ts.size - 1)
    pts[0::2] = ts
    pts[1::2] = 0.5 * (ts[:-1] + ts[1:])
    ys = sol(pts)
    for comp, kind in ((0, "V-zero"), (1, "W-zero")):
        v = ys[comp]
        va, vb = v[:-1], v[1:]
        start = (pts[:-1] == x1) & (va == 0.0)
        hits = np.flatnonzero(((va * vb < 0) | ((vb == 0.0) & (va != 0.0))) & ~start)
        for i in hits:
            xa, xb = pts[i], pts[i + 1]
            if vb[i] == 0.0:
                x = xb
            else:
                x = optimize.brentq(lambda t: sol(t)[comp], xa, xb, xtol=1e-15, rtol=1e-15)
            traj.events.append({"x": float(x), "kind": kind, "direction": 1 if vb[i] > va[i] else -1})


def integrate_ivp(spec: ProblemSpec, x1: float, xmax: float, y0=(0.0, 0.0), rtol: float = RTOL,
                  atol: float = ATOL, chunk: float | None = None, stop=None,
                  max_step: float = math.inf) -> Trajectory:
    """Integrate ``(V, W)`` from ``x1`` to ``xmax`` segment by segment.

    ``stop(traj)`` is consulted after every chunk; returning True ends the
    integration early. Blow-up (``|V|`` or ``|W|`` above 1e12) ends it with a
    ``blow-up`` event.
    """
    lo, hi = spec.interval
    if not (lo < x1 < xmax <= hi):
        raise ValueError(f"need {lo} < x1 < xmax <= {hi}, got x1 = {x1}, xmax = {xmax}")
    edge = xmax == hi
    if edge:
        xmax = hi - 1e-9 * max(1.0, abs(hi))
    pts = [x1] + [p for p in spec.breakpoints() if x1 < p < xmax] + [xmax]
    if chunk is not None:
        fine = [pts[0]]
        for a, b in zip(pts[:-1], pts[1:]):
            n = max(1, int(math.ceil((b - a) / chunk)))
            fine.extend(np.linspace(a, b, n + 1)[1:].tolist())
        pts = fine
    lam = spec.lam
    traj = Trajectory(x1)
    y = np.array(y0, dtype=float)

    def blow_v(x, y):
        return abs(y[0]) - BLOWUP

    def blow_w(x, y):
        return abs(y[1]) - BLOWUP

    blow_v.terminal = blow_w.terminal = True
    for a, b in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (a + b)
        bf = _fast(spec.b.segment_at(mid))
        sf = _fast(spec.sigma.segment_at(mid))
        ff = _fast(spec.f.segment_at(mid))

        def rhs(x, yy, bf=bf, sf=sf, ff=ff):
            s = sf(x)
            return [yy[1], 2.0 / (s * s) * (lam * yy[0] - bf(x) * yy[1] - ff(x))]

        sol = integrate.solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol,
                                  dense_output=True, events=[blow_v, blow_w], max_step=max_step)
        if sol.status == -1 or sol.t.size < 2:
            traj.events.append({"x": float(sol.t[-1]), "kind": "blow-up", "direction": 0})
            traj.status = "blow-up"
            if sol.t.size >= 2:
                traj.chunks.append((a, float(sol.t[-1]), sol.sol))
                traj.end = float(sol.t[-1])
            break
        traj.chunks.append((a, float(sol.t[-1]), sol.sol))
        traj.end = float(sol.t[-1])
        _scan_chunk(sol.sol, x1, traj)
        y = sol.y[:, -1]
        if sol.status == 1:
            traj.events.append({"x": traj.end, "kind": "blow-up", "direction": int(np.sign(y[0]))})
            traj.status = "blow-up"
            break
        if stop is not None and stop(traj):
            traj.status = "stopped"
            break
    else:
        if edge:
            traj.events.append({"x": traj.end, "kind": "domain-edge", "direction": 0})
            traj.status = "domain-edge"
    traj.events.sort(key=lambda e: e["x"])
    return traj


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------


@dataclass
class ShotResult:
    kind: str  # Hit | NoReturn | ImmediateDrop
    x2hat: float | None = None
    resid: float | None = None

    @property
    def value(self) -> float:
        if self.kind == "Hit":
            return self.resid
        return math.inf if self.kind == "NoReturn" else -math.inf


F_FLOOR = 1e-8


def default_window(spec: ProblemSpec) -> tuple:
    """``[x1l - 50 (x2r - x1l), x1l)``, cut where ``|f|`` becomes negligible.

    Starting points where ``|f|`` is below ``F_FLOOR`` times its scale on the
    favorable region give trajectories that differ from each other only at
    round-off level, so they cannot carry sign information.
    """
    tpl = spec.template
    span = tpl.x2r - tpl.x1l
    lo, hi = spec.interval
    wlo = tpl.x1l - 50.0 * span
    if math.isfinite(lo):
        wlo = max(wlo, lo + 1e-9 * max(1.0, abs(lo)))
    probe = np.linspace(tpl.x1l, tpl.x2r, 201)
    scale = float(np.max(np.abs(spec.f(probe))))
    step = min(1e-3 * span, 1e-3)
    x = tpl.x1l - step
    while x > wlo:
        if abs(float(spec.f(x))) < F_FLOOR * scale:
            wlo = x
            break
        step *= 1.25
        x = tpl.x1l - step
    return (wlo, tpl.x1l)


def _xmax(spec: ProblemSpec) -> float:
    tpl = spec.template
    span = tpl.x2r - tpl.x1l
    return min(spec.interval[1], tpl.x2r + 50.0 * span)


def _positive_first(traj: Trajectory) -> bool:
    for s in traj.chunks:
        for t in s[2].ts:
            if t > traj.x1:
                v = float(s[2](t)[0])
                if v != 0.0:
                    return v > 0
    return False


def shoot_residual(spec: ProblemSpec, x1: float, xmax: float | None = None,
                   rtol: float = RTOL, atol: float = ATOL) -> ShotResult:
    """``W`` at the first return of ``V`` to zero after being positive."""
    xmax = _xmax(spec) if xmax is None else xmax
    scale = [0.0]

    def stop(traj):
        if not _positive_first(traj):
            return True
        return _first_return(traj, scale) is not None

    traj = integrate_ivp(spec, x1, xmax, rtol=rtol, atol=atol, stop=stop)
    if not _positive_first(traj):
        return ShotResult("ImmediateDrop")
    hit = _first_return(traj, scale)
    if hit is None:
        return ShotResult("NoReturn")
    return ShotResult("Hit", hit, traj.W(hit))


def _first_return(traj: Trajectory, scale) -> float | None:
    ev = traj.first("V-zero")
    # a tangential return shows up as a local minimum of V at (numerically) zero height
    mn = traj.first("W-zero", direction=1)
    if mn is not None and (ev is None or mn["x"] < ev["x"]):
        vmax = max(abs(float(s[2](t)[0])) for s in traj.chunks for t in s[2].ts)
        if abs(traj.V(mn["x"])) <= 1e-9 * max(1.0, vmax):
            return mn["x"]
    return None if ev is None else ev["x"]


def _gap(spec: ProblemSpec, x1: float, xmax: float, rtol: float, atol: float):
    """Height of the first local minimum of V (after V has risen), with +-inf sentinels."""

    def stop(traj):
        if not _positive_first(traj):
            return True
        return traj.first("W-zero", direction=1) is not None

    traj = integrate_ivp(spec, x1, xmax, rtol=rtol, atol=atol, stop=stop,
                         chunk=max(1.0, spec.template.span))
    if not _positive_first(traj):
        return -math.inf, None, traj
    mn = traj.first("W-zero", direction=1)
    if mn is not None:
        return traj.V(mn["x"]), mn["x"], traj
    v_end = traj.V(traj.end)
    return (math.inf if v_end > 0 else -math.inf), None, traj


def solve_shooting(spec: ProblemSpec, window: tuple | None = None, tol: float = 1e-12,
                   n_scan: int = 64, rtol: float = RTOL, atol: float = ATOL,
                   validate: bool = True) -> TwoSided:
    """Two-sided solution by one-parameter shooting on ``x1``.

    The scan uses the height of the first local minimum of ``V`` after
    departure; it changes sign exactly where ``V`` returns to zero
    tangentially, i.e. where both smooth-fit conditions hold.
    """
    window = default_window(spec) if window is None else window
    xmax = _xmax(spec)
    wlo, whi = window
    xs = np.linspace(wlo, whi, n_scan + 1)[:-1]
    # denser sampling next to the favorable region, where the root usually sits
    near = whi - (whi - wlo) * np.logspace(-6, 0, n_scan // 2, endpoint=False)
    xs = np.unique(np.concatenate([xs, near]))
    samples = []
    for x in xs:
        g, _, _ = _gap(spec, float(x), xmax, rtol, atol)
        samples.append((float(x), g))
    changes = [(a, b) for (a, ga), (b, gb) in zip(samples[:-1], samples[1:])
               if ga > 0 and gb < 0 or ga < 0 and gb > 0 or ga == 0]
    report = {"window": [wlo, whi], "xmax": xmax, "n_scan": len(xs),
              "samples": [[x, g if math.isfinite(g) else ("inf" if g > 0 else "-inf")]
                          for x, g in samples],
              "sign_changes": len(changes), "blowup_threshold": BLOWUP,
              "lambda": spec.lam}
    if not changes:
        label = "inconclusive for lambda > 0" if spec.lam > 0 else "no nontrivial solution"
        raise NoRoot(f"no sign change of the shooting gap in window {list(window)} ({label})", report)
    a, b = changes[-1]
    ga = dict(samples)[a]
    x2 = None
    for _ in range(200):
        mid = 0.5 * (a + b)
        g, xm, _ = _gap(spec, mid, xmax, rtol, atol)
        if xm is not None and abs(g) <= tol:
            a = b = mid
            x2 = xm
            break
        if (g > 0) == (ga > 0):
            a, ga = mid, g
        else:
            b = mid
        if b - a <= 1e-14 * max(1.0, abs(mid)):
            break
    x1 = 0.5 * (a + b)

    def stop(traj):
        return traj.first("W-zero", direction=1) is not None

    traj = integrate_ivp(spec, x1, xmax, rtol=rtol, atol=atol, stop=stop,
                         chunk=max(1.0, spec.template.span))
    mn = traj.first("W-zero", direction=1)
    if mn is None:
        raise NoRoot("bisection converged but the final trajectory has no return point", report)
    x2 = mn["x"]
    V = TrajectoryValue(traj, x1, x2)
    shot = shoot_residual(spec, x1, xmax, rtol, atol)
    report.update({"x1": x1, "x2": x2, "gap": traj.V(x2),
                   "first_return": {"kind": shot.kind, "x2hat": shot.x2hat, "resid": shot.resid}})
    vrep = validate_solution(spec, V, x1, x2) if validate else None
    if vrep is not None and not vrep.ok:
        raise ValidationError("shooting candidate failed validation: " + "; ".join(vrep.reasons), vrep)
    return TwoSided(x1, x2, V, None, vrep, {"shooting": report})


class TrajectoryValue(ValueFunction):
    """Value function read off a shooting trajectory."""

    def __init__(self, traj: Trajectory, x1: float, x2: float):
        self.traj = traj
        self.support = (x1, x2)

    def formula(self, x: float) -> float:
        return self.traj.V(x)

    def formula_derivative(self, x: float) -> float:
        return self.traj.W(x)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

TOL_ODE = 1e-6
TOL_FIT = 1e-6
TOL_BOUNDARY = 1e-6
TOL_AC = 1e-7
FD_STEP = 1e-3
MARGIN = 1e-9


@dataclass
class ValidationReport:
    residual_ode: float
    smooth_fit: tuple
    boundary_values: tuple
    positivity_ok: bool
    strict_inclusion_ok: bool
    abs_continuity_ok: bool
    abs_continuity_error: float
    trivial: bool
    reasons: list
    tolerances: dict

    @property
    def ok(self) -> bool:
        return not self.reasons

    @property
    def verdict(self) -> str:
        return "pass" if self.ok else "fail"

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "residual_ode": self.residual_ode,
                "smooth_fit": list(self.smooth_fit), "boundary_values": list(self.boundary_values),
                "positivity_ok": self.positivity_ok, "strict_inclusion_ok": self.strict_inclusion_ok,
                "abs_continuity_ok": self.abs_continuity_ok,
                "abs_continuity_error": self.abs_continuity_error, "trivial": self.trivial,
                "reasons": list(self.reasons), "tolerances": self.tolerances}


_GL = legendre.leggauss(16)


def _pieces(spec: ProblemSpec, x1: float, x2: float) -> list:
    pts = [x1] + [p for p in spec.breakpoints() if x1 < p < x2] + [x2]
    return list(zip(pts[:-1], pts[1:]))


def validate_solution(spec: ProblemSpec, V: ValueFunction, x1: float, x2: float,
                      tol_ode: float = TOL_ODE, tol_fit: float = TOL_FIT,
                      tol_boundary: float = TOL_BOUNDARY, tol_ac: float = TOL_AC,
                      fd_step: float = FD_STEP) -> ValidationReport:
    """Check a candidate ``(V, x1, x2)`` against the free boundary conditions."""
    reasons = []
    lam = spec.lam
    tpl = spec.template
    hfd = fd_step

    def coeffs(x):
        return float(spec.b(x)), float(spec.sigma(x)), float(spec.f(x))

    # ODE residual at Gauss nodes kept 2h away from breakpoints and ends
    res = 0.0
    t, w = _GL
    for a, b in _pieces(spec, x1, x2):
        a2, b2 = a + 2.5 * hfd, b - 2.5 * hfd
        if b2 <= a2:
            continue
        for x in 0.5 * (a2 + b2) + 0.5 * (b2 - a2) * t:
            d = V.formula_derivative
            vpp = (-d(x + 2 * hfd) + 8 * d(x + hfd) - 8 * d(x - hfd) + d(x - 2 * hfd)) / (12 * hfd)
            bb, ss, ff = coeffs(x)
            r = 0.5 * ss * ss * vpp + bb * d(x) - lam * V.formula(x) + ff
            res = max(res, abs(r))
    if not res <= tol_ode:
        reasons.append(f"residual_ode {res:.3e} > {tol_ode:g}")

    fit = (abs(V.formula_derivative(x1)), abs(V.formula_derivative(x2)))
    if not max(fit) <= tol_fit:
        reasons.append(f"smooth_fit ({fit[0]:.3e}, {fit[1]:.3e}) > {tol_fit:g}")
    bvals = (abs(V.formula(x1)), abs(V.formula(x2)))
    if not max(bvals) <= tol_boundary:
        reasons.append(f"boundary_values ({bvals[0]:.3e}, {bvals[1]:.3e}) > {tol_boundary:g}")

    grid = np.linspace(x1, x2, 1002)[1:-1]
    vals = np.array([V.formula(x) for x in grid])
    trivial = bool(np.all(np.abs(vals) <= 1e-14))
    positivity = bool(np.all(vals > 0))
    if trivial:
        reasons.append("trivial: V vanishes on (x1, x2)")
    elif not positivity:
        reasons.append(f"positivity: min V = {vals.min():.3e} on (x1, x2)")

    inclusion = x1 < tpl.x1l - MARGIN and x2 > tpl.x2r + MARGIN
    if not inclusion:
        reasons.append(f"strict_inclusion: need x1 < {tpl.x1l} and x2 > {tpl.x2r} by {MARGIN:g}")

    # V' recovered by integrating the ODE-implied V'' against the supplied V'
    d0 = V.formula_derivative(x1)
    acc = 0.0
    ac_err = 0.0
    probe = np.unique(np.concatenate([grid, [p for p in spec.breakpoints() if x1 < p < x2]]))
    edges = np.concatenate([[x1], probe, [x2]])
    bps = [p for p in spec.breakpoints() if x1 < p < x2]
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        cuts = [a] + [p for p in bps if a < p < b] + [b]
        for s, e in zip(cuts[:-1], cuts[1:]):
            xs = 0.5 * (s + e) + 0.5 * (e - s) * t
            vals2 = []
            for x in xs:
                bb, ss, ff = coeffs(x)
                vals2.append(2.0 / (ss * ss) * (lam * V.formula(x) - bb * V.formula_derivative(x) - ff))
            acc += 0.5 * (e - s) * float(np.dot(w, vals2))
        if b < x2:
            ac_err = max(ac_err, abs(V.formula_derivative(b) - d0 - acc))
    ac_ok = ac_err <= tol_ac
    if not ac_ok:
        reasons.append(f"abs_continuity: V' deviates from the integrated ODE by {ac_err:.3e} > {tol_ac:g}")

    return ValidationReport(res, fit, bvals, positivity, inclusion, ac_ok, ac_err, trivial, reasons,
                            {"residual_ode": tol_ode, "smooth_fit": tol_fit,
                             "boundary_values": tol_boundary, "abs_continuity": tol_ac,
                             "inclusion_margin": MARGIN, "fd_step": fd_step})


# ---------------------------------------------------------------------------
# adulterated fixture
# ---------------------------------------------------------------------------


def _stair(u):
    return np.floor(10.0 * np.clip(u, 0.0, 1.0)) / 10.0


def _bump(u):
    u = np.asarray(u, dtype=float)
    return np.where(u <= 1.0, _stair(u), _stair(2.0 - u))


def staircase(t):
    """Ten-level step profile on [0, 1]: up-down positive bump then negative bump."""
    t = np.asarray(t, dtype=float)
    out = np.where(t <= 0.5, _bump(4.0 * t), -_bump(4.0 * t - 2.0))
    return np.where((t < 0) | (t > 1), 0.0, out)


def _staircase_integral(t: float) -> float:
    # exact integral of the step profile from 0 to t
    edges = np.linspace(0.0, 1.0, 81)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if a >= t:
            break
        e = min(b, t)
        total += float(staircase(0.5 * (a + b))) * (e - a)
    return total


def adulterated(V: ValueFunction, x1: float, x2: float, eps: float = 0.1) -> CallableValue:
    """``V`` plus a staircase perturbation of ``V'`` that keeps the ODE a.e.

    ``V'`` gains ``eps * staircase((x - x1)/(x2 - x1))`` which is piecewise
    constant, so the second derivative is unchanged away from the jumps, the
    end values and smooth fit are preserved, but ``V'`` is no longer
    absolutely continuous.
    """
    L = x2 - x1

    def val(x):
        return V.formula(x) + eps * L * _staircase_integral((x - x1) / L)

    def der(x):
        return V.formula_derivative(x) + eps * float(staircase((x - x1) / L))

    return CallableValue(val, der, (x1, x2))
