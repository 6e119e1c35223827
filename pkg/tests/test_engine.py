import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdforest import CapacityError, DegenerateModelError, InputError, extract_paths
from pdforest.engine import (
    EngineRun,
    aggregate_consumers,
    compile_ensemble,
    compile_leaf_background,
    cpdv_accumulate,
    dump_leaf_debug,
    enumerate_cubes,
    evaluate_metric,
    superset_sum,
    wdnf_assignment_value,
)
from pdforest.errors import NumericError
from pdforest.metrics import CpdvMetric, PdivMetric
from pdforest.oracle import oracle_pdv
from pdforest.synth import random_dataset, random_ensemble, stump_model

from conftest import make_model


def toy_leaf():
    """The value-1.0 leaf of the stump (condition: f0 in [0.5, inf))."""
    m = stump_model()
    for _, p in extract_paths(m):
        if p.leaf_value == 1.0:
            return p
    raise AssertionError


def brute_coverage(leaf, B):
    d = len(leaf.conditions)
    out = np.zeros(1 << d)
    for mask in range(1 << d):
        sat = np.ones(len(B), dtype=bool)
        for i in range(d):
            if mask >> i & 1:
                c = leaf.conditions[i]
                sat &= c.contains_array(B[:, c.feature])
        out[mask] = sat.mean()
    return out


class TestSupersetSum:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 6), st.integers(0, 10_000))
    def test_matches_enumeration(self, d, seed):
        rng = np.random.default_rng(seed)
        hist = rng.integers(0, 5, size=1 << d).astype(float)
        z = superset_sum(hist)
        for m in range(1 << d):
            expect = sum(hist[s] for s in range(1 << d) if s & m == m)
            assert z[m] == pytest.approx(expect)


class TestBackgroundCompilation:
    def test_toy_leaf_coverage(self):
        comp = compile_leaf_background(toy_leaf(), np.array([[0.0], [1.0]]))
        np.testing.assert_allclose(comp.coverage, [1.0, 0.5])

    def test_empty_background_rejected(self):
        with pytest.raises(InputError):
            compile_leaf_background(toy_leaf(), np.zeros((0, 1)))

    def test_depth2_all_masks_once(self):
        m = make_model(
            [{"split_feature": 0, "threshold": 0.0,
              "yes": {"leaf": 0.0},
              "no": {"split_feature": 1, "threshold": 0.0,
                     "yes": {"leaf": 0.0}, "no": {"leaf": 1.0}}}]
        )
        leaf = next(p for _, p in extract_paths(m) if p.leaf_value == 1.0)
        B = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])
        comp = compile_leaf_background(leaf, B)
        np.testing.assert_allclose(comp.coverage, [1.0, 0.5, 0.5, 0.25])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_coverage_monotone_and_normalized(self, seed):
        m = random_ensemble(seed=seed, n_trees=2, depth=4, n_features=3)
        B = random_dataset(seed + 1, 16, 3).rows
        for _, leaf in extract_paths(m):
            comp = compile_leaf_background(leaf, B)
            assert comp.coverage[0] == 1.0
            for mask in range(1 << comp.d):
                for i in range(comp.d):
                    if not mask >> i & 1:
                        assert comp.coverage[mask] >= comp.coverage[mask | 1 << i]

    def test_matches_brute_enumeration(self):
        m = random_ensemble(seed=42, n_trees=3, depth=4, n_features=4)
        B = random_dataset(43, 12, 4).rows
        for _, leaf in extract_paths(m):
            comp = compile_leaf_background(leaf, B)
            np.testing.assert_allclose(comp.coverage, brute_coverage(leaf, B), atol=1e-12)

    def test_capacity_error_carries_location(self):
        node = {"leaf": 0.0}
        for f in range(31):
            node = {"split_feature": f, "threshold": 0.0, "yes": {"leaf": 1.0}, "no": node}
        m = make_model([node])
        deepest = max(extract_paths(m), key=lambda tp: len(tp[1].conditions))[1]
        with pytest.raises(CapacityError) as exc:
            compile_leaf_background(deepest, np.zeros((1, 31)), tree_index=0)
        assert exc.value.tree_index == 0
        assert exc.value.node_id is not None


class TestPathDependentCompilation:
    def test_branch_ratio(self):
        m = stump_model(cover_left=30.0, cover_right=70.0)
        comps = compile_ensemble(m, mode="approx")
        by_value = {c.leaf.leaf_value: c for c in comps}
        np.testing.assert_allclose(by_value[0.0].pd_weights, [0.3])
        np.testing.assert_allclose(by_value[1.0].pd_weights, [0.7])

    def test_root_only_path(self, constant_model):
        comps = compile_ensemble(constant_model, mode="approx")
        assert comps[0].d == 0
        np.testing.assert_allclose(comps[0].coverage, [1.0])

    def test_product_rule(self):
        m = make_model(
            [{"split_feature": 0, "threshold": 0.0, "cover": 100.0,
              "yes": {"split_feature": 1, "threshold": 0.0, "cover": 50.0,
                      "yes": {"leaf": 1.0, "cover": 20.0},
                      "no": {"leaf": 2.0, "cover": 30.0}},
              "no": {"leaf": 3.0, "cover": 50.0}}]
        )
        comps = compile_ensemble(m, mode="approx")
        deep = next(c for c in comps if c.leaf.leaf_value == 1.0)
        np.testing.assert_allclose(sorted(deep.pd_weights), [0.4, 0.5])
        assert deep.coverage[3] == pytest.approx(0.2)

    def test_repeated_feature_multiplies_ratios(self):
        m = make_model(
            [{"split_feature": 0, "threshold": 5.0, "cover": 100.0,
              "yes": {"split_feature": 0, "threshold": 3.0, "cover": 50.0,
                      "yes": {"leaf": 1.0, "cover": 10.0},
                      "no": {"leaf": 2.0, "cover": 40.0}},
              "no": {"leaf": 3.0, "cover": 50.0}}]
        )
        comps = compile_ensemble(m, mode="approx")
        deep = next(c for c in comps if c.leaf.leaf_value == 1.0)
        assert deep.d == 1
        np.testing.assert_allclose(deep.pd_weights, [0.5 * 0.2])

    def test_zero_parent_cover_rejected(self):
        m = make_model(
            [{"split_feature": 0, "threshold": 0.0, "cover": 0.0,
              "yes": {"leaf": 0.0, "cover": 0.0}, "no": {"leaf": 1.0, "cover": 0.0}}]
        )
        with pytest.raises(DegenerateModelError, match="zero cover"):
            compile_ensemble(m, mode="approx")

    def test_missing_covers_rejected(self, toy_model):
        with pytest.raises(DegenerateModelError, match="covers missing"):
            compile_ensemble(toy_model, mode="approx")

    def test_sibling_weights_sum_to_one(self):
        m = random_ensemble(seed=9, n_trees=3, depth=3, n_features=3)
        comps = compile_ensemble(m, mode="approx")
        for c in comps:
            assert np.all(c.pd_weights >= 0) and np.all(c.pd_weights <= 1)

    def test_agrees_with_background_on_training_stump(self):
        """Covers recorded from the exact background make both coverage
        constructions identical on a depth-1 model."""
        B = np.concatenate([np.full((30, 1), -1.0), np.full((70, 1), 1.0)])
        m = stump_model(threshold=0.0, cover_left=30.0, cover_right=70.0)
        exact = compile_ensemble(m, mode="exact", B=B)
        approx = compile_ensemble(m, mode="approx")
        for ce, ca in zip(exact, approx):
            np.testing.assert_allclose(ce.coverage, ca.coverage, atol=1e-12)


class TestCubeEnumeration:
    def test_d1_yields_three_cubes(self):
        comp = compile_leaf_background(toy_leaf(), np.array([[0.0], [1.0]]))
        cubes = list(enumerate_cubes(comp))
        assert len(cubes) == 3

    def test_counts_with_and_without_cap(self):
        node = {"leaf": 2.0}
        for f in range(6):
            node = {"split_feature": f, "threshold": 0.0, "yes": {"leaf": 0.0}, "no": node}
        m = make_model([node])
        leaf = max((p for _, p in extract_paths(m)), key=lambda p: len(p.conditions))
        comp = compile_leaf_background(leaf, random_dataset(0, 8, 6).rows)
        assert sum(1 for _ in enumerate_cubes(comp)) == 3**6
        assert sum(1 for _ in enumerate_cubes(comp, max_positive_arity=1)) == 2**6 + 6 * 2**5

    def test_d2_cap1_eight_cubes(self):
        m = make_model(
            [{"split_feature": 0, "threshold": 0.0,
              "yes": {"leaf": 0.0},
              "no": {"split_feature": 1, "threshold": 0.0,
                     "yes": {"leaf": 0.0}, "no": {"leaf": 1.0}}}]
        )
        leaf = next(p for _, p in extract_paths(m) if p.leaf_value == 1.0)
        comp = compile_leaf_background(leaf, random_dataset(1, 4, 2).rows)
        assert sum(1 for _ in enumerate_cubes(comp, max_positive_arity=1)) == 8

    def test_full_partition_cubes_carry_the_mass(self):
        comp = compile_leaf_background(toy_leaf(), np.array([[0.0], [1.0]]))
        cubes = {(tuple(sorted(c.s_plus)), tuple(sorted(c.s_minus))): c.weight
                 for c in enumerate_cubes(comp)}
        assert cubes[((0,), ())] == pytest.approx(1.0)   # leaf value * coverage[{}]
        assert cubes[((), (0,))] == pytest.approx(0.5)   # leaf value * coverage[{c0}]
        assert cubes[((), ())] == 0.0                    # absent-set cube carries none

    def test_debug_dump_round_trips(self):
        comp = compile_leaf_background(toy_leaf(), np.array([[0.0], [1.0]]))
        doc = json.loads(dump_leaf_debug(comp))
        assert doc["coverage"] == [1.0, 0.5]
        assert {"pos": [0], "neg": [], "w": 1.0} in doc["cubes"]

    def test_debug_dump_matches_golden(self):
        from conftest import GOLDEN_DIR

        comp = compile_leaf_background(toy_leaf(), np.array([[0.0], [1.0]]))
        golden = json.loads((GOLDEN_DIR / "leaf_debug.json").read_text())
        assert json.loads(dump_leaf_debug(comp)) == golden


class TestMetricTables:
    def test_toy_cpdv_table(self):
        comp = compile_leaf_background(toy_leaf(), np.array([[0.0], [1.0]]))
        table = evaluate_metric(comp, CpdvMetric())
        assert table[1] == {(0,): pytest.approx(0.5)}
        assert table[0] == {(0,): pytest.approx(-0.5)}

    def test_zero_value_leaf_all_zero(self):
        m = stump_model(left=0.0, right=0.0)
        comps = compile_ensemble(m, mode="exact", B=np.array([[0.0], [1.0]]))
        for comp in comps:
            table = evaluate_metric(comp, PdivMetric())
            assert all(not entry for entry in table)

    def test_nonfinite_metric_value_reported(self):
        class BadMetric:
            max_positive_arity = None

            def cube_values(self, s_plus, s_minus):
                return {(0,): float("inf")}

        comp = compile_leaf_background(toy_leaf(), np.array([[0.0], [1.0]]))
        with pytest.raises(NumericError, match="tree 0"):
            evaluate_metric(comp, BadMetric())

    def test_cpdv_fast_path_matches_generic(self):
        for seed in range(6):
            m = random_ensemble(seed=seed, n_trees=3, depth=4, n_features=4)
            B = random_dataset(seed + 50, 16, 4).rows
            C = random_dataset(seed + 99, 5, 4).rows
            comps = compile_ensemble(m, mode="exact", B=B)
            fast = np.zeros((len(C), 4))
            for comp in comps:
                cpdv_accumulate(comp, comp.consumer_masks(C), fast)
                evaluate_metric(comp, CpdvMetric())
            rows = aggregate_consumers(comps, C)
            generic = np.zeros((len(C), 4))
            for r, acc in enumerate(rows):
                for (f,), v in acc.items():
                    generic[r, f] = v
            np.testing.assert_allclose(fast, generic, atol=1e-12)

    def test_identical_consumers_identical_results(self):
        m = random_ensemble(seed=5, n_trees=4, depth=3, n_features=3)
        B = random_dataset(6, 10, 3).rows
        row = random_dataset(7, 1, 3).rows
        C = np.vstack([row, row])
        comps = compile_ensemble(m, mode="exact", B=B)
        for comp in comps:
            evaluate_metric(comp, PdivMetric())
        rows = aggregate_consumers(comps, C)
        assert rows[0] == rows[1]

    def test_consumer_missing_columns_rejected(self):
        m = random_ensemble(seed=5, n_trees=2, depth=3, n_features=4)
        run = EngineRun(m, "exact", random_dataset(0, 8, 4).rows)
        with pytest.raises(InputError, match="consumer"):
            run.run_cpdv(np.zeros((2, 2)))


class TestFaithfulness:
    """The compiled cube families evaluate, at any 0/1 assignment, to the
    replace-and-average game they encode."""

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_assignment_value_matches_brute_game(self, seed):
        rng = np.random.default_rng(seed)
        n_feat = int(rng.integers(2, 5))
        m = random_ensemble(seed=seed, n_trees=3, depth=4, n_features=n_feat)
        B = random_dataset(seed + 1, 8, n_feat).rows
        row = random_dataset(seed + 2, 1, n_feat).rows[0]
        comps = compile_ensemble(m, mode="exact", B=B)
        all_feats = list(range(n_feat))
        for _ in range(6):
            S = [f for f in all_feats if rng.random() < 0.5]
            wdnf = wdnf_assignment_value(comps, row, S) + m.base_score
            X = B.copy()
            for f in S:
                X[:, f] = row[f]
            brute = float(np.mean(m.predict_batch(X)))
            assert wdnf == pytest.approx(brute, abs=1e-9)

    def test_stump_cpdv_matches_oracle(self):
        m = stump_model()
        B = np.array([[0.0], [1.0]])
        run = EngineRun(m, "exact", B)
        cpdv = run.run_cpdv(np.array([[1.0]]))
        mean = oracle_pdv(m, B, {})
        assert cpdv[0, 0] + mean == pytest.approx(oracle_pdv(m, B, {0: 1.0}), abs=1e-12)

    def test_threads_do_not_change_results(self):
        m = random_ensemble(seed=11, n_trees=8, depth=4, n_features=4)
        B = random_dataset(12, 32, 4).rows
        C = random_dataset(13, 6, 4).rows
        one = EngineRun(m, "exact", B, threads=1).run_cpdv(C)
        four = EngineRun(m, "exact", B, threads=4).run_cpdv(C)
        np.testing.assert_array_equal(one, four)
        r1 = EngineRun(m, "exact", B, threads=1).run_metric(C, PdivMetric())
        r4 = EngineRun(m, "exact", B, threads=4).run_metric(C, PdivMetric())
        assert r1 == r4
