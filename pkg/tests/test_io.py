import json
import os

import numpy as np
import pytest

from delone import generators as g
from delone.core import build_windowed_set
from delone.derivation import apply_rule, identity_rule
from delone.errors import InputError
from delone.io import (
    load_point_set,
    load_rule,
    point_set_from_dict,
    point_set_to_dict,
    rule_from_dict,
    rule_to_dict,
    save_point_set,
    save_report,
    save_rule,
)
from delone.verify import verify_all


@pytest.fixture(scope="module")
def fib():
    return g.generate_substitution_1d(g.fibonacci_rule(), 100.0)


class TestPointSetRoundtrip:
    def test_json_bit_exact(self, fib, tmp_path):
        path = os.path.join(tmp_path, "fib.json")
        save_point_set(fib, path)
        back = load_point_set(path)
        assert back.dim == fib.dim
        assert back.window_radius == fib.window_radius
        assert np.array_equal(back.points, fib.points)
        assert np.array_equal(back.labels, fib.labels)

    def test_csv_bit_exact(self, fib, tmp_path):
        path = os.path.join(tmp_path, "fib.csv")
        save_point_set(fib, path)
        back = load_point_set(path)
        assert np.array_equal(back.points, fib.points)
        assert np.array_equal(back.labels, fib.labels)
        assert back.window_radius == fib.window_radius

    def test_csv_unlabeled(self, tmp_path):
        X = g.generate_lattice(np.eye(2), 8.0)
        path = os.path.join(tmp_path, "z2.csv")
        save_point_set(X, path)
        back = load_point_set(path)
        assert back.labels is None
        assert np.array_equal(back.points, X.points)

    def test_dict_keeps_declared_params(self):
        X = g.generate_lattice(np.array([[1.0]]), 10.0)
        d = point_set_to_dict(X)
        Y = point_set_from_dict(d)
        assert Y.r_declared == X.r_declared
        assert Y.R_declared == X.R_declared
        assert Y.meta.get("model") == X.meta.get("model")

    def test_json_serializable(self, fib):
        text = json.dumps(point_set_to_dict(fib))
        assert json.loads(text)["dim"] == 1


class TestMalformed:
    def test_missing_key(self):
        with pytest.raises(InputError):
            point_set_from_dict({"dim": 1})

    def test_bad_csv_header(self, tmp_path):
        path = os.path.join(tmp_path, "bad.csv")
        with open(path, "w") as fh:
            fh.write("x0\n0.0\n1.0\n")
        with pytest.raises(InputError):
            load_point_set(path)

    def test_bad_rule(self):
        with pytest.raises(InputError):
            rule_from_dict({"entries": []})

    def test_mixed_rule_labels(self):
        entry = {"class_offsets": [[0.0]], "image_offsets": [[0.0]]}
        labeled = dict(entry, image_labels=[1])
        with pytest.raises(InputError):
            rule_from_dict({"radius": 1.0, "entries": [entry, labeled]})


class TestRuleRoundtrip:
    def test_same_image(self, fib, tmp_path):
        rule = identity_rule(fib, 2.0)
        path = os.path.join(tmp_path, "rule.json")
        save_rule(rule, path)
        back = load_rule(path)
        assert back.radius == rule.radius
        assert back.name == rule.name
        assert len(back.classes) == len(rule.classes)
        Y1 = apply_rule(rule, fib)
        Y2 = apply_rule(back, fib)
        assert np.array_equal(Y1.points, Y2.points)
        assert np.array_equal(Y1.labels, Y2.labels)

    def test_dict_shape(self, fib):
        rule = identity_rule(fib, 2.0)
        d = rule_to_dict(rule)
        assert d["radius"] == 2.0
        for e in d["entries"]:
            assert "class_offsets" in e and "image_offsets" in e


class TestReports:
    def test_save_verification_report(self, tmp_path):
        X = build_windowed_set(np.arange(-30, 31, dtype=float), 1, 30.0)
        rep = verify_all(X, profile="smoke")
        path = os.path.join(tmp_path, "report.json")
        save_report(rep, path)
        data = json.load(open(path))
        assert data["profile"] == "smoke"
        assert isinstance(data["checks"], list)
