import json

import numpy as np
import pytest

from optstop.errors import ProblemFileError
from optstop.problem_io import load_problem, parse_problem, problem_to_dict
from optstop.reference import REFERENCES

from conftest import problem_path


@pytest.mark.parametrize("name", sorted(REFERENCES))
def test_round_trip(name):
    spec = REFERENCES[name]()
    back = parse_problem(json.loads(json.dumps(problem_to_dict(spec))))
    xs = np.linspace(0.05, 5.0, 17) if spec.interval[0] == 0 else np.linspace(-4.0, 4.0, 17)
    for attr in ("b", "sigma", "f"):
        np.testing.assert_allclose(getattr(back, attr)(xs), getattr(spec, attr)(xs), rtol=1e-15)
    assert back.lam == spec.lam


@pytest.mark.parametrize("name", ["box", "exp", "asym", "heavy", "drift", "ou", "ko"])
def test_shipped_problem_files_load(name):
    spec = load_problem(problem_path(name))
    spec.validate()


def _doc(**over):
    doc = {"state_interval": ["-inf", "inf"], "lambda": 0, "b": 0, "sigma": 1,
           "f": [{"lo": "-inf", "hi": -1, "form": "constant", "params": {"c": -1}},
                 {"lo": -1, "hi": 1, "form": "constant", "params": {"c": 1}},
                 {"lo": 1, "hi": "inf", "form": "constant", "params": {"c": -1}}]}
    doc.update(over)
    return doc


def test_errors_name_segment_and_field():
    bad = _doc()
    bad["f"][1]["params"] = {}
    with pytest.raises(ProblemFileError, match=r"f\[1\].*'c'"):
        parse_problem(bad)
    bad = _doc()
    bad["f"][2]["form"] = "spline"
    with pytest.raises(ProblemFileError, match=r"f\[2\]\.form"):
        parse_problem(bad)


def test_negative_lambda_rejected():
    with pytest.raises(ProblemFileError):
        parse_problem(_doc(**{"lambda": -1}))
