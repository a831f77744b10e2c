"""Monte Carlo payoffs of exit rules by time change to the natural scale.

In natural-scale coordinates ``w = p(x)`` the process is a time-changed
Brownian motion ``W``. With ``sigma~ = sigma(x) p'(x)`` the physical clock
is ``t_u = int_0^u sigma~(W_v)^-2 dv`` and the payoff becomes

    int_0^U exp(-lam t_u) f(x(W_u)) sigma~(W_u)^-2 du,

so only Gaussian increments of ``W`` are ever simulated and discontinuous
coefficients enter through the integrand, not through the stepper.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DomainError, PreconditionError
from .funcmodel import ProblemSpec
from .rng import PathStreams
from .scale import build_scale, default_anchor, identity_transform


# ---------------------------------------------------------------------------
# stopping rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoSidedExit:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"TwoSidedExit needs a < b, got ({self.a}, {self.b})")

    @property
    def bounds(self) -> tuple:
        return self.a, self.b

    def describe(self) -> str:
        return f"TwoSidedExit({self.a:g},{self.b:g})"


@dataclass(frozen=True)
class LeftExit:
    alpha: float

    @property
    def bounds(self) -> tuple:
        return self.alpha, math.inf

    def describe(self) -> str:
        return f"LeftExit({self.alpha:g})"


@dataclass(frozen=True)
class RightExit:
    beta: float

    @property
    def bounds(self) -> tuple:
        return -math.inf, self.beta

    def describe(self) -> str:
        return f"RightExit({self.beta:g})"


@dataclass(frozen=True)
class HorizonCap:
    """Stop ``inner`` at natural-scale time ``u_max``; the estimate is truncation-biased."""

    u_max: float
    inner: object

    @property
    def bounds(self) -> tuple:
        return self.inner.bounds

    def describe(self) -> str:
        return f"HorizonCap({self.u_max:g},{self.inner.describe()})"


def _unwrap(rule):
    if isinstance(rule, HorizonCap):
        if not rule.u_max > 0:
            raise ValueError("HorizonCap needs u_max > 0")
        return rule.inner, float(rule.u_max)
    return rule, math.inf


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


@dataclass
class Estimate:
    mean: float
    stderr: float
    n_paths: int
    seed: int
    truncated_fraction: float
    clock: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def truncation_biased(self) -> bool:
        return self.diagnostics.get("horizon_cap") is not None

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n_paths": self.n_paths,
                "seed": self.seed, "truncated_fraction": self.truncated_fraction,
                "clock": self.clock, "diagnostics": self.diagnostics}


def zscore(est: Estimate, reference: float) -> float:
    d = est.mean - reference
    if est.stderr > 0:
        return d / est.stderr
    if d == 0:
        return 0.0
    return math.copysign(math.inf, d)


def default_seed() -> int:
    """Seed from ``OPTSTOP_SEED`` if set, else 42."""
    raw = os.environ.get("OPTSTOP_SEED")
    return int(raw, 0) if raw else 42


# ---------------------------------------------------------------------------
# natural-scale tables
# ---------------------------------------------------------------------------


class _Tables:
    """``w -> (sigma~^-2, f~ sigma~^-2)`` by linear interpolation.

    Each coefficient segment gets its own uniform grid in ``w``, so lookup
    is index arithmetic and jumps at breakpoints are never smeared.
    """

    def __init__(self, spec: ProblemSpec, t, xlo: float, xhi: float, n: int = 200_000):
        self.spec, self.t = spec, t
        cuts = [xlo] + [p for p in spec.breakpoints() if xlo < p < xhi] + [xhi]
        wc = [float(t.p(x)) for x in cuts]
        total = wc[-1] - wc[0]
        starts, steps, offsets, rates, denss = [], [], [], [], []
        off = 0
        for (x0, x1), (w0, w1) in zip(zip(cuts[:-1], cuts[1:]), zip(wc[:-1], wc[1:])):
            m = max(8, int(n * (w1 - w0) / total))
            ws = np.linspace(w0, w1, m + 1)
            xs = np.asarray(t.inverse(ws), dtype=float)
            # keep evaluation inside the segment so one-sided limits are used
            xs = np.clip(xs, x0, x1)
            xs[0], xs[-1] = x0, np.nextafter(x1, -np.inf)
            r, d = self._eval(xs)
            starts.append(w0)
            steps.append((w1 - w0) / m)
            offsets.append(off)
            rates.append(r)
            denss.append(d)
            off += m + 1
        self.wcuts = np.array(wc[1:-1])
        self.starts = np.array(starts)
        self.steps = np.array(steps)
        self.sizes = np.array([len(r) - 1 for r in rates])
        self.offsets = np.array(offsets)
        self.rate = np.concatenate(rates)
        self.dens = np.concatenate(denss)
        self.wmin, self.wmax = wc[0], wc[-1]

    def _eval(self, xs):
        s = np.asarray(self.spec.sigma(xs), dtype=float) * np.asarray(self.t.pderiv(xs), dtype=float)
        rate = 1.0 / (s * s)
        return rate, np.asarray(self.spec.f(xs), dtype=float) * rate

    @property
    def arrays(self) -> tuple:
        return (self.wcuts, self.starts, self.steps, self.sizes, self.offsets, self.rate, self.dens)


def _natural(spec: ProblemSpec):
    if spec.is_driftless:
        return identity_transform(spec.interval)
    return build_scale(spec.b, spec.sigma, default_anchor(spec))


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def simulate_payoff(spec: ProblemSpec, rule, x0: float, n_paths: int = 100_000,
                    step_u: float = 1e-3, seed: int | None = None, antithetic: bool = False,
                    bridge: bool = True, max_steps: int = 10_000_000,
                    transform=None) -> Estimate:
    """Estimate ``E_x0 int_0^tau exp(-lam s) f(X_s) ds`` for an exit rule.

    ``bridge`` applies the Brownian-bridge exit correction between grid
    points; without it, exits between steps are missed and the estimate is
    biased by ``O(sqrt(step_u))`` wherever ``V'`` does not vanish at the
    boundary. One-sided rules must be wrapped in ``HorizonCap``.
    """
    if n_paths < 2 or step_u <= 0:
        raise ValueError("need n_paths >= 2 and step_u > 0")
    if antithetic and n_paths % 2:
        raise ValueError("antithetic pairing needs an even number of paths")
    seed = default_seed() if seed is None else int(seed)
    inner, u_max = _unwrap(rule)
    if not isinstance(inner, (TwoSidedExit, LeftExit, RightExit)):
        raise ValueError(f"unsupported rule {rule!r}")
    if not isinstance(inner, TwoSidedExit) and not math.isfinite(u_max):
        raise PreconditionError("one-sided rules have infinite mean exit time; wrap them in HorizonCap")
    lo, hi = spec.interval
    a, b = inner.bounds
    started = time.perf_counter()
    base_diag = {"rule": rule.describe(), "step_u": step_u, "bridge": bridge,
                 "antithetic": antithetic, "horizon_cap": None if math.isinf(u_max) else u_max}
    if not (a < x0 < b) or not (lo < x0 < hi):
        if a <= x0 <= b and lo < x0 < hi:
            return Estimate(0.0, 0.0, n_paths, seed, 0.0, {"u_mean": 0.0, "t_mean": 0.0},
                            dict(base_diag, immediate=True))
        raise DomainError(f"x0 = {x0} outside the continuation region ({a}, {b})")

    t = _natural(spec) if transform is None else transform
    wa = float(t.p(a)) if math.isfinite(a) else t.Jt[0]
    wb = float(t.p(b)) if math.isfinite(b) else t.Jt[1]
    w0 = float(t.p(x0))
    # table range: the rule's interval, or a generous multiple of the
    # horizon's standard deviation on the open side
    reach = 10.0 * math.sqrt(u_max) if math.isfinite(u_max) else 0.0
    tlo = wa if math.isfinite(wa) else max(t.Jt[0], w0 - reach)
    thi = wb if math.isfinite(wb) else min(t.Jt[1], w0 + reach)
    pad = 1e-9 * max(1.0, abs(tlo), abs(thi))
    xlo = float(t.inverse(max(tlo, t.Jt[0] + pad) if math.isfinite(t.Jt[0]) else tlo))
    xhi = float(t.inverse(min(thi, t.Jt[1] - pad) if math.isfinite(t.Jt[1]) else thi))
    tables = _Tables(spec, t, xlo, xhi)
    # explosion: reaching an end of the natural-scale interval is absorbing
    # with zero further payoff, exactly like an exit
    ea = max(wa, t.Jt[0])
    eb = min(wb, t.Jt[1])

    keys = PathStreams(seed, n_paths).keys
    payoff = np.zeros(n_paths)
    uclock = np.zeros(n_paths)
    tclock = np.zeros(n_paths)
    truncated = np.zeros(n_paths, dtype=np.bool_)
    steps = np.zeros(n_paths, dtype=np.int64)
    trouble = _kernel(keys, w0, ea, eb, step_u, float(spec.lam), u_max, bridge, antithetic,
                      tables.wmin, tables.wmax, *tables.arrays, max_steps,
                      payoff, uclock, tclock, truncated, steps)

    if antithetic:
        samples = 0.5 * (payoff[0::2] + payoff[1::2])
    else:
        samples = payoff
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(samples.size))
    clock = {"u_mean": float(uclock.mean()), "u_max": float(uclock.max()),
             "t_mean": float(tclock.mean()), "steps": int(steps.max())}
    diag = dict(base_diag, numeric_trouble=int(trouble), transform=t.mode,
                elapsed_s=round(time.perf_counter() - started, 3))
    return Estimate(mean, stderr, n_paths, seed, float(truncated.mean()), clock, diag)


# ---------------------------------------------------------------------------
# compiled path loop
# ---------------------------------------------------------------------------

_GOLD = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True, error_model="numpy")
def _mix(z):
    z = z + _GOLD
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, error_model="numpy")
def _uniform(key, counter):
    b = _mix(key + np.uint64(counter) * _GOLD) >> np.uint64(11)
    return (float(b) + 0.5) * 2.0 ** -53


@njit(cache=True, error_model="numpy")
def _lookup(w, wcuts, starts, steps, sizes, offsets, rate, dens):
    j = 0
    while j < wcuts.size and w >= wcuts[j]:
        j += 1
    pos = (w - starts[j]) / steps[j]
    k = min(max(int(pos), 0), sizes[j] - 1)
    fr = pos - k
    i = offsets[j] + k
    return (rate[i] + fr * (rate[i + 1] - rate[i]), dens[i] + fr * (dens[i + 1] - dens[i]))


@njit(cache=True, error_model="numpy")
def _kernel(keys, w0, ea, eb, step_u, lam, u_max, bridge, anti, wmin, wmax,
            wcuts, starts, steps, sizes, offsets, rate, dens, max_steps,
            out_pay, out_u, out_t, out_trunc, out_steps):
    """Simulate every path to its exit; returns the numeric-trouble count.

    Draws match ``rng.PathStreams.normal_pair``: steps ``2m`` and ``2m + 1``
    share the Box-Muller pair on counters ``4m`` and ``4m + 1``; the bridge
    uniform of step ``k`` uses counter ``4k + 2``.
    """
    sq = np.sqrt(step_u)
    two_pi = 2.0 * np.pi
    rad = 0.0
    ang = 0.0
    trouble = 0
    for p in range(keys.size):
        src = p - (p % 2) if anti else p
        sign = -1.0 if anti and p % 2 == 1 else 1.0
        key = keys[src]
        w = w0
        u = 0.0
        t = 0.0
        pay = 0.0
        trunc = True
        n = 0
        while n < max_steps:
            if n % 2 == 0:
                # one Box-Muller pair serves steps n and n + 1
                m = n // 2
                rad = np.sqrt(-2.0 * np.log(_uniform(key, 4 * m)))
                ang = two_pi * _uniform(key, 4 * m + 1)
                z = sign * rad * np.cos(ang)
            else:
                z = sign * rad * np.sin(ang)
            wn = w + sq * z
            wq = w
            if wq < wmin or wq > wmax:
                trouble += 1
                wq = min(max(wq, wmin), wmax)
            r, d = _lookup(wq, wcuts, starts, steps, sizes, offsets, rate, dens)
            if not (np.isfinite(r) and np.isfinite(d)):
                trouble += 1
                r = 0.0
                d = 0.0
            frac = 1.0
            hit = False
            if wn <= ea:
                frac = (w - ea) / (w - wn)
                hit = True
            if wn >= eb:
                frac = min(frac, (eb - w) / (wn - w))
                hit = True
            if bridge and not hit:
                # crossing probabilities below exp(-40) are skipped outright
                pr = 0.0
                ga = 2.0 * (w - ea) * (wn - ea) / step_u
                gb = 2.0 * (eb - w) * (eb - wn) / step_u
                if ga < 40.0:
                    pr += np.exp(-ga)
                if gb < 40.0:
                    pr += np.exp(-gb)
                if pr > 0.0 and _uniform(key, 4 * n + 2) < pr:
                    frac = 0.5
                    hit = True
            du = frac * step_u
            capped = False
            if not hit and u + du >= u_max:
                du = u_max - u
                capped = True
            dt = r * du
            if lam > 0.0:
                if r > 0.0:
                    pay += d / r * np.exp(-lam * t) * -np.expm1(-lam * dt) / lam
            else:
                pay += d * du
            t += dt
            u += du
            w = wn
            n += 1
            if hit:
                trunc = False
                break
            if capped:
                break
        out_pay[p] = pay
        out_u[p] = u
        out_t[p] = t
        out_trunc[p] = trunc
        out_steps[p] = n
    return trouble
