import json

import numpy as np
import pytest

from delone import generators as g
from delone.atlas import r_atlas
from delone.core import build_windowed_set, norms
from delone.errors import (
    EmptyAcceptanceWindow,
    NonPrimitiveRule,
    SingularBasis,
    UnknownPatchClass,
)

PHI = g.PHI


class TestLattice:
    def test_integers(self):
        X = g.generate_lattice(np.array([[1.0]]), 10.0)
        assert np.array_equal(X.points[:, 0], np.arange(-10, 11))
        assert X.r_declared == pytest.approx(0.5)
        assert X.R_declared == pytest.approx(0.5)

    def test_even_integers(self):
        X = g.generate_lattice(np.array([[2.0]]), 10.0)
        assert np.array_equal(X.points[:, 0], np.arange(-10, 11, 2))
        assert X.r_declared == pytest.approx(1.0)
        assert X.R_declared == pytest.approx(1.0)

    def test_z2_disk_count(self):
        X = g.generate_lattice(np.eye(2), 3.0)
        assert X.n == 29
        assert X.R_declared == pytest.approx(np.sqrt(2) / 2)

    def test_singular(self):
        with pytest.raises(SingularBasis):
            g.generate_lattice(np.array([[1.0, 1.0], [1.0, 1.0]]), 5.0)


def _word_expand(rule, word, times):
    for _ in range(times):
        word = [t for s in word for t in rule.rule[s]]
    return word


class TestSubstitution:
    def test_fibonacci_first_points(self):
        X = g.generate_substitution_1d(g.fibonacci_rule(), 10.0)
        right = X.points[X.points[:, 0] >= -1e-9][:5, 0]
        expected = [0.0, PHI, PHI + 1, 2 * PHI + 1, 3 * PHI + 1]
        assert np.allclose(right, expected, atol=1e-9)

    def test_fibonacci_gaps_are_tiles(self):
        X = g.generate_substitution_1d(g.fibonacci_rule(), 200.0)
        gaps = np.unique(np.round(np.diff(X.points[:, 0]), 9))
        assert np.allclose(gaps, [1.0, PHI], atol=1e-9)

    def test_labels_match_gaps(self):
        X = g.generate_substitution_1d(g.fibonacci_rule(), 100.0)
        gaps = np.diff(X.points[:, 0])
        # label 0 = symbol a (length phi), 1 = b (length 1)
        for lab, gap in zip(X.labels[:-1], gaps):
            assert gap == pytest.approx(PHI if lab == 0 else 1.0, abs=1e-9)

    def test_periodic_control(self):
        X = g.generate_substitution_1d(g.periodic_rule(), 20.0)
        assert np.array_equal(X.points[:, 0], np.arange(-20, 21))
        labs = X.labels[X.n // 2:X.n // 2 + 4]
        assert len(set(zip(labs[::2], labs[1::2]))) == 1  # alternating

    def test_silver_mean_count_oracle(self):
        rule = g.silver_mean_rule()
        X = g.generate_substitution_1d(rule, 50.0)
        # oracle: expand the word, accumulate lengths, count in [-50, 50]
        lengths = {s: rule.tile_lengths[s] for s in rule.alphabet}
        # right side from fixed point of a: sigma^k(a) starts with a
        word = ["a"]
        while sum(lengths[s] for s in word) < 60:
            word = _word_expand(rule, word, 1)
        pos, acc = [0.0], 0.0
        for s in word:
            acc += lengths[s]
            if acc <= 50.0:
                pos.append(acc)
        right_count = len([p for p in pos if p <= 50.0])
        got_right = int(np.sum(X.points[:, 0] >= -1e-9))
        assert got_right == right_count

    def test_nonprimitive_rejected(self):
        bad = g.SubstitutionRule1D(alphabet=["a", "b"],
                                   rule={"a": ["a"], "b": ["b"]},
                                   tile_lengths={"a": 1.0, "b": 1.0},
                                   seed_symbol="a")
        with pytest.raises(NonPrimitiveRule):
            g.generate_substitution_1d(bad, 10.0)

    def test_determinism(self):
        A = g.generate_substitution_1d(g.fibonacci_rule(), 100.0)
        B = g.generate_substitution_1d(g.fibonacci_rule(), 100.0)
        assert np.array_equal(A.points, B.points)
        assert np.array_equal(A.labels, B.labels)


class TestCutAndProject:
    def test_fibonacci_cross_generator_atlas(self):
        Xs = g.generate_substitution_1d(g.fibonacci_rule(), 300.0)
        Xu = build_windowed_set(Xs.points, 1, Xs.window_radius)
        Y = g.generate_cut_and_project(g.fibonacci_scheme(), 300.0)
        for R in (2.0, 5.0, 10.0):
            assert r_atlas(Xu, R).class_count == r_atlas(Y, R).class_count

    def test_ammann_beenker_min_gap(self):
        A = g.generate_cut_and_project(g.ammann_beenker_scheme(), 20.0)
        assert A.min_gap() > 0.4

    def test_ammann_beenker_eightfold_distances(self):
        A = g.generate_cut_and_project(g.ammann_beenker_scheme(), 15.0)
        # distance multiset from the origin is eightfold symmetric
        i0 = int(np.argmin(norms(A.points)))
        assert np.linalg.norm(A.points[i0]) < 1e-9
        d = np.sort(norms(A.points))[1:9]
        assert np.allclose(d, d[0], atol=1e-9)

    def test_empty_window(self):
        sch = g.fibonacci_scheme()
        sch.acceptance_window = g.AcceptanceWindow(dim=1, interval=(0.0, 0.0))
        with pytest.raises(EmptyAcceptanceWindow):
            g.generate_cut_and_project(sch, 10.0)

    def test_infeasible_budget(self):
        from delone.errors import InfeasibleEnumeration
        with pytest.raises(InfeasibleEnumeration):
            g.generate_cut_and_project(g.ammann_beenker_scheme(), 50.0,
                                       max_lattice_points=1e3)

    def test_scheme_roundtrip(self):
        sch = g.ammann_beenker_scheme()
        data = json.loads(json.dumps(g.scheme_to_dict(sch)))
        back = g.scheme_from_dict(data)
        A1 = g.generate_cut_and_project(sch, 8.0)
        A2 = g.generate_cut_and_project(back, 8.0)
        assert np.array_equal(A1.points, A2.points)

    def test_determinism(self):
        A = g.generate_cut_and_project(g.ammann_beenker_scheme(), 12.0)
        B = g.generate_cut_and_project(g.ammann_beenker_scheme(), 12.0)
        assert np.array_equal(A.points, B.points)


class TestDecoration:
    def test_nn_gap_matches_tile_labels(self):
        X = g.generate_substitution_1d(g.fibonacci_rule(), 200.0)
        rule = g.nn_gap_labeler(X, 2.0)
        Y = g.decorate(X, rule)
        assert Y.window_radius == pytest.approx(198.0)
        # gap labels must be a relabeling of the tile labels
        common = min(X.n, Y.n)
        pairs = set()
        for y, lab in zip(Y.points[:, 0], Y.labels):
            i = X.find_point([y])
            pairs.add((int(lab), int(X.labels[i])))
        # bijective correspondence between label alphabets
        assert len(pairs) == len({a for a, _ in pairs})

    def test_constant_rule(self):
        X = g.generate_substitution_1d(g.fibonacci_rule(), 100.0)
        rule = g.decoration_from_atlas(X, 2.0, labeler=lambda i, c: 42)
        Y = g.decorate(X, rule)
        assert set(Y.labels) == {42}

    def test_missing_class(self):
        X = g.generate_substitution_1d(g.fibonacci_rule(), 100.0)
        rule = g.decoration_from_atlas(X, 2.0)
        rule.classes = rule.classes[:1]
        rule.labels = rule.labels[:1]
        rule._lookup = None
        with pytest.raises(UnknownPatchClass):
            g.decorate(X, rule)

    def test_class_index_decoration_refines(self):
        X = g.generate_substitution_1d(g.fibonacci_rule(), 300.0)
        Y = g.decorate(X, g.decoration_from_atlas(X, 10.0))
        assert len(np.unique(Y.labels)) >= len(np.unique(X.labels))
