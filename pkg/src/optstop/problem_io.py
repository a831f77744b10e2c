"""JSON problem files.

A problem file looks like::

    {
      "name": "box",
      "state_interval": ["-inf", "inf"],
      "lambda": 0,
      "b": 0,
      "sigma": [{"lo": "-inf", "hi": "inf", "form": "constant", "params": {"c": 1}}],
      "f": [
        {"lo": "-inf", "hi": -1, "form": "constant", "params": {"c": -1}},
        {"lo": -1, "hi": 1, "form": "constant", "params": {"c": 1}},
        {"lo": 1, "hi": "inf", "form": "constant", "params": {"c": -1}}
      ]
    }

Each coefficient is either a number (constant on the whole interval) or a
list of segment records. A record carries ``form`` + ``params`` or a list
``terms`` of ``{"form", "params"}`` objects plus an optional ``const``.

==========  ===========================  =====================================
form        params                       value
==========  ===========================  =====================================
constant    c                            c
poly        coeffs, x0 = 0               sum_k coeffs[k] (x - x0)^k
exp         c, a, x0 = 0                 c exp(a (x - x0))
power       c, p, x0 = 0                 c |x - x0|^p
normcdf     c, s = 1, x0 = 0             c Phi(s (x - x0))
==========  ===========================  =====================================
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .errors import ProblemFileError
from .funcmodel import (
    Exp,
    NormCdf,
    PiecewiseFunction,
    Poly,
    Power,
    ProblemSpec,
    Segment,
)

FORMS = ("constant", "poly", "exp", "power", "normcdf")


def _ext(v, where: str) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity", "+infinity"):
            return math.inf
        if s in ("-inf", "-infinity"):
            return -math.inf
        try:
            return float(s)
        except ValueError:
            raise ProblemFileError(f"{where}: cannot parse number {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ProblemFileError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _num(params: dict, key: str, where: str, default=None) -> float:
    if key not in params:
        if default is None:
            raise ProblemFileError(f"{where}: missing parameter {key!r}")
        return default
    v = _ext(params[key], f"{where}.{key}")
    if not math.isfinite(v):
        raise ProblemFileError(f"{where}.{key}: must be finite")
    return v


def _term(form: str, params: dict, where: str):
    """Return (term or None, constant)."""
    if not isinstance(params, dict):
        raise ProblemFileError(f"{where}.params: expected an object")
    if form == "constant":
        return None, _num(params, "c", where)
    if form == "poly":
        coeffs = params.get("coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise ProblemFileError(f"{where}.coeffs: expected a non-empty list")
        cs = tuple(_ext(c, f"{where}.coeffs[{i}]") for i, c in enumerate(coeffs))
        return Poly(cs, _num(params, "x0", where, 0.0)), 0.0
    if form == "exp":
        return Exp(_num(params, "c", where), _num(params, "a", where),
                   _num(params, "x0", where, 0.0)), 0.0
    if form == "power":
        return Power(_num(params, "c", where), _num(params, "p", where),
                     _num(params, "x0", where, 0.0)), 0.0
    if form == "normcdf":
        s = _num(params, "s", where, 1.0)
        if s == 0:
            raise ProblemFileError(f"{where}.s: must be nonzero")
        return NormCdf(_num(params, "c", where), s, _num(params, "x0", where, 0.0)), 0.0
    raise ProblemFileError(f"{where}.form: unknown form {form!r} (expected one of {', '.join(FORMS)})")


def parse_segment(rec: dict, where: str) -> Segment:
    if not isinstance(rec, dict):
        raise ProblemFileError(f"{where}: expected an object")
    for key in ("lo", "hi"):
        if key not in rec:
            raise ProblemFileError(f"{where}: missing field {key!r}")
    lo, hi = _ext(rec["lo"], f"{where}.lo"), _ext(rec["hi"], f"{where}.hi")
    if not lo < hi:
        raise ProblemFileError(f"{where}: lo must be < hi")
    if "terms" in rec:
        items = rec["terms"]
        if not isinstance(items, list):
            raise ProblemFileError(f"{where}.terms: expected a list")
        const = _ext(rec.get("const", 0.0), f"{where}.const")
    elif "form" in rec:
        items = [{"form": rec["form"], "params": rec.get("params", {})}]
        const = 0.0
    else:
        raise ProblemFileError(f"{where}: needs 'form' or 'terms'")
    terms = []
    for j, item in enumerate(items):
        w = f"{where}.terms[{j}]" if "terms" in rec else where
        if not isinstance(item, dict) or "form" not in item:
            raise ProblemFileError(f"{w}: expected an object with 'form'")
        t, c = _term(item["form"], item.get("params", {}), w)
        const += c
        if t is not None:
            terms.append(t)
    try:
        return Segment(lo, hi, tuple(terms), const)
    except (ValueError, TypeError) as exc:
        raise ProblemFileError(f"{where}: {exc}") from None


def parse_function(value, interval: tuple, name: str) -> PiecewiseFunction:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return PiecewiseFunction.constant(float(value), *interval)
    if not isinstance(value, list) or not value:
        raise ProblemFileError(f"{name}: expected a number or a non-empty list of segments")
    segs = [parse_segment(rec, f"{name}[{i}]") for i, rec in enumerate(value)]
    if segs[0].lo != interval[0] or segs[-1].hi != interval[1]:
        raise ProblemFileError(f"{name}: segments must cover the state interval {list(interval)}")
    for i in range(1, len(segs)):
        if segs[i].lo != segs[i - 1].hi:
            raise ProblemFileError(f"{name}[{i}].lo: gap or overlap at {segs[i - 1].hi}")
    return PiecewiseFunction(segs)


def parse_problem(doc: dict) -> ProblemSpec:
    """Build a :class:`ProblemSpec` from a decoded JSON document."""
    if not isinstance(doc, dict):
        raise ProblemFileError("problem: expected a JSON object")
    iv = doc.get("state_interval", ["-inf", "inf"])
    if not isinstance(iv, list) or len(iv) != 2:
        raise ProblemFileError("state_interval: expected [lo, hi]")
    interval = (_ext(iv[0], "state_interval[0]"), _ext(iv[1], "state_interval[1]"))
    if not interval[0] < interval[1]:
        raise ProblemFileError("state_interval: lo must be < hi")
    lam = _ext(doc.get("lambda", 0.0), "lambda")
    if not (math.isfinite(lam) and lam >= 0):
        raise ProblemFileError("lambda: must be a finite number >= 0")
    for key in ("sigma", "f"):
        if key not in doc:
            raise ProblemFileError(f"problem: missing field {key!r}")
    b = parse_function(doc.get("b", 0.0), interval, "b")
    sigma = parse_function(doc["sigma"], interval, "sigma")
    f = parse_function(doc["f"], interval, "f")
    return ProblemSpec(b, sigma, f, lam, name=str(doc.get("name", "")))


def load_problem(path) -> ProblemSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_problem(doc)


# -- serialisation -----------------------------------------------------------


def _fmt(v: float):
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return v


def _term_record(t) -> dict:
    if isinstance(t, Poly):
        return {"form": "poly", "params": {"coeffs": list(t.coeffs), "x0": t.x0}}
    if isinstance(t, Exp):
        return {"form": "exp", "params": {"c": t.c, "a": t.a, "x0": t.x0}}
    if isinstance(t, Power):
        return {"form": "power", "params": {"c": t.c, "p": t.p, "x0": t.x0}}
    if isinstance(t, NormCdf):
        return {"form": "normcdf", "params": {"c": t.c, "s": t.s, "x0": t.x0}}
    raise ProblemFileError(f"term {t!r} has no file representation")


def function_to_records(pf: PiecewiseFunction) -> list:
    out = []
    for seg in pf.segments:
        if seg.numeric:
            raise ProblemFileError("numeric segments cannot be serialised")
        rec = {"lo": _fmt(seg.lo), "hi": _fmt(seg.hi)}
        if not seg.terms:
            rec.update(form="constant", params={"c": seg.const})
        elif len(seg.terms) == 1 and seg.const == 0.0:
            rec.update(_term_record(seg.terms[0]))
        else:
            rec["terms"] = [_term_record(t) for t in seg.terms]
            rec["const"] = seg.const
        out.append(rec)
    return out


def problem_to_dict(spec: ProblemSpec) -> dict:
    return {
        "name": spec.name,
        "state_interval": [_fmt(spec.interval[0]), _fmt(spec.interval[1])],
        "lambda": spec.lam,
        "b": function_to_records(spec.b),
        "sigma": function_to_records(spec.sigma),
        "f": function_to_records(spec.f),
    }
