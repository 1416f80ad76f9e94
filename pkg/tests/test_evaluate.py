"""Evaluation suite: baselines, curves, revision, generators, silhouette."""

import numpy as np
import pytest

from conftest import random_bundle

from weshap.data import ABSTAIN, ProxyConfig, SplitBundle, WeakLabelMatrix
from weshap.engine import weshap_dataset
from weshap.evaluate import (
    MetricScores,
    baseline_scores,
    blob_bundle,
    downstream_accuracy,
    fine_revision,
    motivating_bundle,
    prefix_sizes,
    prune_search,
    rank_curve,
    rank_order,
    running_example,
    runtime_bench,
    silhouette,
    synth_generate,
)
from weshap.proxy import hard_accuracy


class TestBaselines:
    def test_iws_formula(self):
        b = blob_bundle(seed=0, m_clean=3)
        acc = baseline_scores("ACC", b).scores
        cov = baseline_scores("COV", b).scores
        iws = baseline_scores("IWS", b).scores
        assert np.allclose(iws, (2 * acc - 1) * cov, equal_nan=True)

    def test_iws_direct_value(self):
        assert (2 * 0.9 - 1) * 0.2 == pytest.approx(0.16)

    def test_zero_coverage_lf(self):
        b = running_example()
        entries = np.hstack([b.weak_labels.entries, np.full((6, 1), ABSTAIN, dtype=np.int64)])
        ventries = np.hstack([b.valid_weak_labels.entries, np.full((2, 1), ABSTAIN, dtype=np.int64)])
        b2 = SplitBundle(
            train_features=b.train_features,
            weak_labels=WeakLabelMatrix(entries),
            valid=b.valid,
            spec=b.spec,
            valid_weak_labels=WeakLabelMatrix(ventries),
        )
        cov = baseline_scores("COV", b2).scores
        acc = baseline_scores("ACC", b2).scores
        assert cov[3] == 0.0
        assert np.isnan(acc[3])
        assert rank_order(acc)[-1] == 3  # undefined accuracy ranks last

    def test_rnd_deterministic_per_seed(self):
        b = running_example()
        a = baseline_scores("RND", b, seed=7).scores
        c = baseline_scores("RND", b, seed=7).scores
        d = baseline_scores("RND", b, seed=8).scores
        assert np.array_equal(a, c)
        assert not np.array_equal(a, d)
        assert np.all((a >= 0) & (a < 1))

    def test_acc_requires_valid_weak_labels(self):
        rng = np.random.default_rng(0)
        b = random_bundle(rng, n=20, d=2, m=3, n_val=4, C=2)
        with pytest.raises(ValueError, match="validation weak labels"):
            baseline_scores("ACC", b)

    def test_weshap_method(self):
        b = running_example()
        scores = baseline_scores("WESHAP", b, config=ProxyConfig(k=3))
        assert scores.scores == pytest.approx([1 / 6, -1 / 12, 1 / 4], abs=1e-12)


class TestRankCurve:
    def test_prefix_sizes(self):
        assert prefix_sizes(10) == [10]
        assert prefix_sizes(25) == [10, 20, 25]
        assert prefix_sizes(7) == [7]
        assert prefix_sizes(40) == [10, 20, 30, 40]

    def test_identical_lfs_give_flat_curve(self):
        base = blob_bundle(seed=1, n_train=120, n_val=30, n_test=30, m_clean=2)
        entries = np.repeat(base.weak_labels.entries[:, [0]], 12, axis=1)
        b = SplitBundle(
            train_features=base.train_features,
            weak_labels=WeakLabelMatrix(entries),
            valid=base.valid,
            spec=base.spec,
            test=base.test,
        )
        curve = rank_curve(MetricScores("RND", np.linspace(1, 0, 12)), b, ProxyConfig(k=5))
        assert len(set(curve.accuracies)) == 1

    def test_affine_invariance(self):
        b = blob_bundle(seed=2, n_train=150, n_val=40, n_test=40, m_clean=8, m_flipped=4)
        cfg = ProxyConfig(k=5)
        scores = baseline_scores("WESHAP", b, config=cfg).scores
        c1 = rank_curve(MetricScores("WESHAP", scores), b, cfg)
        c2 = rank_curve(MetricScores("WESHAP", 2.0 * scores + 1.0), b, cfg)
        assert c1.accuracies == c2.accuracies
        assert c1.prefix_sizes == c2.prefix_sizes

    def test_perfect_metric_beats_reversed(self):
        b = blob_bundle(seed=3, n_train=200, n_val=50, n_test=50, m_clean=9, m_flipped=3)
        cfg = ProxyConfig(k=5)
        weshap = baseline_scores("WESHAP", b, config=cfg).scores
        fwd = rank_curve(MetricScores("WESHAP", weshap), b, cfg)
        rev = rank_curve(MetricScores("WESHAP", -weshap), b, cfg)
        assert fwd.area >= rev.area

    def test_needs_test_set(self):
        b = running_example()
        with pytest.raises(ValueError, match="test"):
            rank_curve(MetricScores("RND", np.zeros(3)), b, ProxyConfig(k=3))


class TestPruneSearch:
    def test_all_helpful_keeps_everything(self):
        b = blob_bundle(seed=4, n_train=150, n_val=40, n_test=40, m_clean=6)
        cfg = ProxyConfig(k=5)
        out = prune_search(baseline_scores("WESHAP", b, config=cfg), b, cfg)
        assert out.chosen_parameter == 6.0
        assert out.valid_accuracy_after >= out.valid_accuracy_before

    def test_flipped_lf_pruned(self):
        b = blob_bundle(seed=5, n_train=200, n_val=60, n_test=60, m_clean=4, m_flipped=1)
        cfg = ProxyConfig(k=5)
        scores = baseline_scores("WESHAP", b, config=cfg)
        out = prune_search(scores, b, cfg)
        order = rank_order(scores.scores)
        kept = set(order[: int(out.chosen_parameter)].tolist())
        assert 4 not in kept  # the flipped LF ranks last and is dropped
        assert out.valid_accuracy_after >= out.valid_accuracy_before

    def test_single_lf(self):
        b = blob_bundle(seed=6, n_train=80, n_val=20, m_clean=1)
        cfg = ProxyConfig(k=4)
        out = prune_search(baseline_scores("COV", b), b, cfg)
        assert out.chosen_parameter == 1.0
        assert out.valid_accuracy_after == out.valid_accuracy_before


class TestFineRevision:
    def test_noop_threshold_preserves_matrix(self):
        b = blob_bundle(seed=7, n_train=100, n_val=25, m_clean=4, m_flipped=1)
        cfg = ProxyConfig(k=5)
        res = weshap_dataset(b, cfg)
        out = fine_revision(res, b, cfg, theta=-np.inf)
        assert np.array_equal(out.revised_weak_labels.entries, b.weak_labels.entries)

    def test_example_fixture_reaches_perfect_accuracy(self, example_bundle, example_config):
        res = weshap_dataset(example_bundle, example_config)
        out = fine_revision(res, example_bundle, example_config, theta=0.0)
        revised = out.revised_weak_labels.entries
        assert revised[2, 1] == ABSTAIN and revised[3, 0] == ABSTAIN
        muted = (example_bundle.weak_labels.entries != ABSTAIN) & (revised == ABSTAIN)
        assert muted.sum() == 2
        assert out.valid_accuracy_after == 1.0

    def test_huge_threshold_mutes_everything(self, example_bundle, example_config):
        res = weshap_dataset(example_bundle, example_config)
        out = fine_revision(res, example_bundle, example_config, theta=1e9)
        assert np.all(out.revised_weak_labels.entries == ABSTAIN)
        assert downstream_accuracy(
            out.revised_weak_labels.entries, example_bundle, example_config,
            example_bundle.valid, hard=False,
        ) == 0.5

    def test_search_never_regresses(self):
        for seed in range(6):
            b = blob_bundle(
                seed=seed, n_train=120, n_val=30, num_classes=2 + seed % 2,
                m_clean=5, m_flipped=2,
            )
            cfg = ProxyConfig(k=4)
            res = weshap_dataset(b, cfg)
            out = fine_revision(res, b, cfg)
            assert out.valid_accuracy_after >= out.valid_accuracy_before

    def test_unseen_active_entries_count_as_zero(self):
        # entries never neighboring any holdout point have contribution 0 and
        # must be muted by any positive threshold
        b = blob_bundle(seed=8, n_train=150, n_val=10, m_clean=3, coverage=0.6)
        cfg = ProxyConfig(k=2)
        res = weshap_dataset(b, cfg)
        dense = res.contributions.to_dense()
        active = b.weak_labels.entries != ABSTAIN
        untouched = active & (dense == 0.0)
        assert untouched.any()
        out = fine_revision(res, b, cfg, theta=1e-12)
        assert np.all(out.revised_weak_labels.entries[untouched] == ABSTAIN)


class TestSynth:
    def test_running_example_matches_module_fixture(self):
        via_kind = synth_generate("running-example")
        direct = running_example()
        assert np.array_equal(via_kind.weak_labels.entries, direct.weak_labels.entries)

    def test_motivating_properties(self):
        b = synth_generate("motivating", seed=0)
        cfg = ProxyConfig(k=10)
        acc = baseline_scores("ACC", b).scores
        assert 0.45 <= acc[1] <= 0.55
        assert acc[0] >= 0.9 and acc[2] >= 0.9
        res = weshap_dataset(b, cfg)
        assert res.values[1] > 0
        # removing the straddling LF lowers the proxy's hard accuracy
        no2 = b.weak_labels.entries.copy()
        no2[:, 1] = ABSTAIN
        b_no2 = SplitBundle(
            train_features=b.train_features,
            weak_labels=WeakLabelMatrix(no2, b.weak_labels.lf_names),
            valid=b.valid,
            spec=b.spec,
            valid_weak_labels=b.valid_weak_labels,
            test=b.test,
        )
        assert hard_accuracy(None, b_no2, cfg, b_no2.test) < hard_accuracy(None, b, cfg, b.test)

    def test_motivating_prune_retains_straddler_under_weshap(self):
        b = motivating_bundle(seed=0)
        cfg = ProxyConfig(k=10)
        weshap = baseline_scores("WESHAP", b, config=cfg)
        out = prune_search(weshap, b, cfg)
        kept = set(rank_order(weshap.scores)[: int(out.chosen_parameter)].tolist())
        assert 1 in kept
        acc_scores = baseline_scores("ACC", b)
        assert rank_order(acc_scores.scores)[-1] == 1

    def test_blobs_separated_clusters_perfect(self):
        b = blob_bundle(seed=9, n_train=100, n_val=30, n_test=30, separation=30.0,
                        std=0.5, m_clean=2, coverage=0.5)
        cfg = ProxyConfig(k=3)
        assert downstream_accuracy(b.weak_labels.entries, b, cfg, b.test) == 1.0

    def test_generator_determinism(self):
        a = blob_bundle(seed=17, m_clean=4, m_flipped=2)
        b = blob_bundle(seed=17, m_clean=4, m_flipped=2)
        assert a.train_features.tobytes() == b.train_features.tobytes()
        assert np.array_equal(a.weak_labels.entries, b.weak_labels.entries)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            synth_generate("nope")


class TestHarness:
    def test_empty_pool_soft_uniform(self, example_bundle, example_config):
        all_abstain = np.full_like(example_bundle.weak_labels.entries, ABSTAIN)
        soft = downstream_accuracy(
            all_abstain, example_bundle, example_config, example_bundle.valid, hard=False
        )
        assert soft == 0.5

    def test_exclusion_shrinks_pool(self):
        # a single labeled row forces every prediction to its vote
        b = running_example()
        entries = np.full_like(b.weak_labels.entries, ABSTAIN)
        entries[4, 2] = 1
        acc = downstream_accuracy(entries, b, ProxyConfig(k=3), b.valid)
        assert acc == 0.5  # both points predicted class 1, only x8 correct


class TestSilhouette:
    def test_far_clusters(self):
        rng = np.random.default_rng(30)
        a = rng.normal(0, 0.1, size=(20, 2))
        bpts = rng.normal(0, 0.1, size=(20, 2)) + 50.0
        feats = np.vstack([a, bpts])
        labels = np.array([0] * 20 + [1] * 20)
        assert silhouette(feats, labels) > 0.9

    def test_interleaved_distributions_near_zero(self):
        vals = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            feats = rng.normal(0, 1, size=(60, 2))
            labels = rng.integers(0, 2, size=60)
            vals.append(silhouette(feats, labels))
        assert abs(np.mean(vals)) < 0.1

    def test_equidistant_point_contributes_zero(self):
        feats = np.array([[0.0, 0.0], [2.0, 0.0], [-2.0, 0.0], [2.0, 0.1], [-2.0, 0.1]])
        labels = np.array([0, 0, 1, 0, 1])
        value = silhouette(feats, labels)
        assert -1.0 <= value <= 1.0

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            silhouette(np.zeros((3, 2)), np.zeros(3, dtype=int))

    def test_singleton_class_contributes_zero(self):
        feats = np.array([[0.0], [0.1], [5.0]])
        labels = np.array([0, 0, 1])
        value = silhouette(feats, labels)
        assert np.isfinite(value)


class TestRuntimeBench:
    def test_rows_and_timings_present(self):
        rows = runtime_bench([{"n": 500, "d": 4, "m": 10, "n_val": 40}], ProxyConfig(k=5))
        assert len(rows) == 1
        row = rows[0]
        assert row["t_total"] > 0
        assert set(row) >= {"n", "d", "m", "n_val", "k", "t_index", "t_tables", "t_score"}
