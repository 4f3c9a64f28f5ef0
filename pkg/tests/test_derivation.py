import numpy as np
import pytest

from delone import generators as g
from delone.core import build_windowed_set, norms
from delone.derivation import (
    FamilyF,
    LocalDerivationRule,
    RelationMatrix,
    TheoremHarnessConfig,
    _ExactGrouper,
    apply_rule,
    build_family_F,
    class_center_label,
    compare_relations,
    fiber_class_count,
    identity_rule,
    label_forgetting_rule,
    relation_Ri,
    translation_rule,
)
from delone.errors import (
    FamilyMismatch,
    InsufficientWindow,
    OutputNotDelone,
    PeriodicInput,
    UsageError,
)

PHI = g.PHI


@pytest.fixture(scope="module")
def fib():
    return g.generate_substitution_1d(g.fibonacci_rule(), 500.0)


@pytest.fixture(scope="module")
def fib_big():
    return g.generate_substitution_1d(g.fibonacci_rule(), 2500.0)


class TestRuleConstruction:
    def test_identity_keeps_points(self, fib):
        rule = identity_rule(fib, 2.0)
        Y = apply_rule(rule, fib)
        # every derived point is a source point
        for y in Y.points[:50]:
            assert fib.find_point(y) >= 0
        assert Y.window_radius == pytest.approx(fib.window_radius - 2.0)

    def test_identity_keeps_labels(self, fib):
        Y = apply_rule(identity_rule(fib, 2.0), fib)
        assert Y.labels is not None
        for y, lab in zip(Y.points[:50], Y.labels[:50]):
            i = fib.find_point(y)
            assert int(fib.labels[i]) == int(lab)

    def test_forgetting_drops_labels(self, fib):
        Y = apply_rule(label_forgetting_rule(fib, 2.0), fib)
        assert Y.labels is None
        for y in Y.points[:50]:
            assert fib.find_point(y) >= 0

    def test_translation_shifts(self, fib):
        t = 0.3
        Y = apply_rule(translation_rule(fib, 2.0, [t]), fib)
        for y in Y.points[:50]:
            assert fib.find_point(y - t) >= 0

    def test_s0_accounts_for_offsets(self, fib):
        rule = translation_rule(fib, 2.0, [0.7])
        assert rule.offset_bound == pytest.approx(0.7)
        assert rule.s0 == pytest.approx(2.7)

    def test_center_label(self, fib):
        rule = identity_rule(fib, 2.0)
        labs = {class_center_label(c) for c in rule.classes}
        assert labs <= {0, 1}


class TestApplyRule:
    def test_equivariance(self, fib):
        """Sliding-block property: rule(X - v) = rule(X) - v."""
        rule = identity_rule(fib, 2.0)
        v = np.array([PHI])
        Y1 = apply_rule(rule, fib.translate(v))
        Y2 = apply_rule(rule, fib).translate(v)
        m = min(Y1.window_radius, Y2.window_radius)
        a = Y1.points[norms(Y1.points) <= m - 1e-9]
        b = Y2.points[norms(Y2.points) <= m - 1e-9]
        assert len(a) == len(b)
        assert np.max(np.abs(a - b)) < 1e-9

    def test_local_determination(self, fib):
        """The image in B_R is a function of the source in B_{R+s0}."""
        rule = identity_rule(fib, 2.0)
        Y = apply_rule(rule, fib)
        R = 5.0
        from delone.core import clouds_equal, extract_patch
        seen = {}
        for i in fib.interior_indices(R + rule.s0):
            x = fib.points[i]
            src = extract_patch(fib, x, R + rule.s0)
            img = extract_patch(Y, x, R)
            key = _ExactGrouper._key(src.offsets, src.labels)
            if key in seen:
                o, l = seen[key]
                assert clouds_equal(o, img.offsets, 1e-9, l, img.labels)
            else:
                seen[key] = (img.offsets, img.labels)

    def test_empty_image_class_raises(self, fib):
        rule = identity_rule(fib, 2.0)
        rule.image_offsets = [np.zeros((0, 1)) for _ in rule.classes]
        with pytest.raises(OutputNotDelone):
            apply_rule(rule, fib)

    def test_window_guard(self, fib):
        rule = identity_rule(fib, 2.0)
        small = build_windowed_set(fib.points[np.abs(fib.points[:, 0]) <= 2.0],
                                   1, 2.0, labels=None)
        with pytest.raises(InsufficientWindow):
            apply_rule(LocalDerivationRule(radius=3.0, classes=rule.classes,
                                           image_offsets=rule.image_offsets),
                       small)

    def test_coincident_merge(self):
        # two integer sublattices emitted onto the same points must merge
        X = build_windowed_set(np.arange(-30, 31, dtype=float), 1, 30.0)
        rule = identity_rule(X, 1.5)
        rule.image_offsets = [np.array([[0.0], [0.0]])
                              for _ in rule.classes]
        Y = apply_rule(rule, X)
        assert len(np.unique(np.round(Y.points[:, 0], 9))) == Y.n


class TestExactGrouper:
    def test_groups_equal(self):
        gr = _ExactGrouper()
        a = np.array([[0.0], [1.0]])
        assert gr.add(a) == gr.add(a + 0.0)

    def test_separates_distinct(self):
        gr = _ExactGrouper()
        assert gr.add(np.array([[0.0]])) != gr.add(np.array([[0.5]]))

    def test_labels_distinguish(self):
        gr = _ExactGrouper()
        a = np.array([[0.0], [1.0]])
        i = gr.add(a, np.array([0, 1]))
        j = gr.add(a, np.array([1, 0]))
        assert i != j

    def test_near_key_boundary(self):
        gr = _ExactGrouper(tol=1e-6)
        a = np.array([[0.4999995]])
        b = np.array([[0.5000005]])  # straddles a quantization boundary
        assert gr.add(a) == gr.add(b)


class TestFiberCount:
    def test_identity_fiber_is_one(self, fib):
        rule = identity_rule(fib, 2.0)
        for R in (5.0, 10.0):
            count, bound = fiber_class_count(rule, fib, R, L=3.2)
            assert count == 1
            assert bound == pytest.approx(55.0 * 3.2 * 3.2)

    def test_forgetting_fiber_bounded(self, fib):
        rule = label_forgetting_rule(fib, 2.0)
        count, bound = fiber_class_count(rule, fib, 10.0, L=3.2)
        assert 1 <= count <= bound

    def test_radius_guard(self, fib):
        rule = identity_rule(fib, 2.0)
        with pytest.raises(InsufficientWindow):
            fiber_class_count(rule, fib, 1.0)

    def test_bound_none_without_L(self, fib):
        rule = identity_rule(fib, 2.0)
        count, bound = fiber_class_count(rule, fib, 5.0)
        assert bound is None


class TestHarnessConfig:
    def test_inequality(self):
        assert TheoremHarnessConfig(n=20, R=5.0, L=2.0).n_inequality_holds()
        assert not TheoremHarnessConfig(n=2, R=5.0, L=2.0).n_inequality_holds()

    def test_validate_raises(self):
        with pytest.raises(UsageError):
            TheoremHarnessConfig(n=2, R=5.0, L=3.2).validate()

    def test_override_allows(self):
        cfg = TheoremHarnessConfig(n=2, R=5.0, L=3.2, override_n=True)
        cfg.validate()
        rp, exploratory = cfg.inner_radius()
        assert exploratory
        assert rp == pytest.approx(cfg.R)

    def test_honest_inner_radius(self):
        cfg = TheoremHarnessConfig(n=10, R=1.0, L=2.0)
        rp, exploratory = cfg.inner_radius()
        assert not exploratory
        assert rp == pytest.approx((2.0 ** 10 - 1.0) - 8.0)


class TestFamilyF:
    def test_build(self, fib_big):
        fam = build_family_F(fib_big, 5.0, 2, 3.2)
        assert fam.N >= 1
        assert len(fam.classes) >= 1
        assert len(fam.members) == sum(fam.m_j)
        assert len(fam.classes) <= fam.bound

    def test_periodic_rejected(self):
        X = g.generate_lattice(np.array([[1.0]]), 200.0)
        with pytest.raises(PeriodicInput):
            build_family_F(X, 2.0, 2, 2.0)

    def test_window_guard(self, fib):
        with pytest.raises(InsufficientWindow):
            build_family_F(fib, 5.0, 5, 3.2)


@pytest.fixture(scope="module")
def setting(fib_big):
    cfg = TheoremHarnessConfig(n=2, R=5.0, L=3.2, override_n=True)
    fam = build_family_F(fib_big, cfg.R, cfg.n, cfg.L)
    return cfg, fam


class TestRelations:
    def test_reflexive(self, fib_big, setting):
        cfg, fam = setting
        m = relation_Ri(identity_rule(fib_big, 2.0), fam, fib_big, cfg)
        assert m.is_reflexive()
        assert m.family_size == len(fam.classes)

    def test_translated_rule_same_matrix(self, fib_big, setting):
        cfg, fam = setting
        m1 = relation_Ri(identity_rule(fib_big, 2.0), fam, fib_big, cfg)
        m2 = relation_Ri(translation_rule(fib_big, 2.0, [0.3]),
                         fam, fib_big, cfg)
        assert np.array_equal(m1.entries, m2.entries)
        assert compare_relations([m1, m2]) == [(0, 1)]

    def test_family_mismatch(self, setting):
        cfg, fam = setting
        k = len(fam.classes)
        a = RelationMatrix("a", k, np.ones((k, k), bool), 1.0, 1.0, True, [])
        b = RelationMatrix("b", k + 1, np.ones((k + 1, k + 1), bool),
                           1.0, 1.0, True, [])
        with pytest.raises(FamilyMismatch):
            compare_relations([a, b])

    def test_validate_enforced(self, fib_big, setting):
        _, fam = setting
        bad = TheoremHarnessConfig(n=2, R=5.0, L=3.2)
        with pytest.raises(UsageError):
            relation_Ri(identity_rule(fib_big, 2.0), fam, fib_big, bad)
