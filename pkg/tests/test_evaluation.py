import numpy as np
import pytest

from ltcrank.dataset import Normalization, normalize_proxies
from ltcrank.evaluation import (
    AccuracyReport,
    Backbone,
    Combo,
    Factor,
    _score_records,
    baseline_protocol,
    combo_accuracy,
    grouped_accuracy,
    make_split,
    proxy_accuracy,
    quantile_buckets,
    run_matrix,
    run_protocol,
)
from ltcrank.exceptions import ProtocolError, UndefinedAccuracyError
from ltcrank.pairing import Task, build_pair_dataset, enumerate_pairs

from conftest import make_set


class TestMakeSplit:
    def test_sizes_disjoint_union(self, canonical):
        split = make_split(canonical, 0)
        assert len(split.train_ids) == 30
        assert len(split.test_ids) == 20
        assert set(split.train_ids).isdisjoint(split.test_ids)
        assert set(split.train_ids) | set(split.test_ids) == set(canonical.ids)

    def test_deterministic_and_seed_sensitive(self, canonical):
        assert make_split(canonical, 3) == make_split(canonical, 3)
        assert make_split(canonical, 3) != make_split(canonical, 4)


class TestProxyAccuracy:
    def test_reference_cells(self, canonical):
        assert proxy_accuracy(canonical, "ppl_clm", Task.SFT_CMS) == pytest.approx(0.332, abs=0.02)
        assert proxy_accuracy(canonical, "kshot_rag", Task.SFT_RAG) == pytest.approx(0.766, abs=0.02)

    def test_constant_proxy_scores_half(self):
        mset = make_set(
            [
                (1, (0.5,) * 5, (1.0, 1.0, 1.0)),
                (2, (0.5,) * 5, (2.0, 2.0, 2.0)),
                (3, (0.5,) * 5, (3.0, 3.0, 3.0)),
            ]
        )
        assert proxy_accuracy(mset, "ppl_clm", Task.SFT_CMS) == 0.5

    def test_all_pairs_tied_is_undefined(self):
        mset = make_set(
            [
                (1, (0.1,) * 5, (1.0, 1.0, 1.0)),
                (2, (0.2,) * 5, (1.0, 1.0, 1.0)),
            ]
        )
        with pytest.raises(UndefinedAccuracyError):
            proxy_accuracy(mset, "ppl_clm", Task.SFT_CMS)

    def test_unknown_proxy(self, canonical):
        with pytest.raises(ValueError):
            proxy_accuracy(canonical, "nope", Task.SFT_CMS)

    def test_invariant_under_minmax(self, canonical):
        normed = normalize_proxies(canonical, Normalization.MINMAX)
        for proxy in ("ppl_clm", "ppl_sc", "kshot_cms", "kshot_rag", "kshot_cbqa"):
            for task in Task:
                assert proxy_accuracy(canonical, proxy, task) == proxy_accuracy(
                    normed, proxy, task
                )


class TestComboAccuracy:
    def test_reference_cells_minmax(self, canonical):
        normed = normalize_proxies(canonical, Normalization.MINMAX)
        assert combo_accuracy(normed, Combo.MEAN_OF_FIVE, Task.SFT_CMS) == pytest.approx(0.622, abs=0.02)
        assert combo_accuracy(normed, Combo.SC_PLUS_RAG, Task.SFT_CMS) == pytest.approx(0.744, abs=0.02)
        assert combo_accuracy(normed, Combo.SC_PLUS_RAG_MINUS_CLM, Task.SFT_CMS) == pytest.approx(0.763, abs=0.02)

    def test_raw_set_rejected(self, canonical):
        with pytest.raises(ValueError, match="normalized"):
            combo_accuracy(canonical, Combo.MEAN_OF_FIVE, Task.SFT_CMS)

    def test_shift_invariance_of_score_records(self, canonical):
        scores = canonical.proxy_matrix[:, 1].copy()
        pairs = enumerate_pairs(canonical)
        base = _score_records(canonical, scores, Task.SFT_RAG, pairs)
        shifted = _score_records(canonical, scores + 17.3, Task.SFT_RAG, pairs)
        assert [r.correct for r in base] == [r.correct for r in shifted]


class TestRunProtocol:
    def test_deterministic_replay(self, canonical):
        a = run_protocol(canonical, Backbone.LOGISTIC, Task.SFT_CMS, Task.SFT_CMS, n_runs=3)
        b = run_protocol(canonical, Backbone.LOGISTIC, Task.SFT_CMS, Task.SFT_CMS, n_runs=3)
        assert a == b

    def test_mean_std_consistency(self, canonical):
        report = run_protocol(canonical, Backbone.LOGISTIC, Task.SFT_RAG, Task.SFT_RAG, n_runs=4)
        arr = np.array(report.per_run)
        assert report.mean == pytest.approx(arr.mean(), abs=1e-12)
        assert report.std == pytest.approx(arr.std(), abs=1e-12)
        assert len(report.n_pairs) == 4
        assert all(a <= 1.0 and a >= 0.0 for a in report.per_run)

    def test_memorizing_backbone_overfits_train_equals_test(self, canonical):
        # all-pairs training evaluated on the same pairs: near-perfect accuracy
        from ltcrank.evaluation import _evaluate_model

        feature_set = normalize_proxies(canonical, Normalization.MINMAX)
        ds = build_pair_dataset(feature_set, Task.SFT_CMS)
        from ltcrank.gbdt import GbdtConfig, fit_gbdt

        model = fit_gbdt(ds.X, ds.y, GbdtConfig(seed=0, num_leaves=63, min_data_in_leaf=5))
        accuracy, _ = _evaluate_model(
            feature_set, model, enumerate_pairs(feature_set), Task.SFT_CMS
        )
        assert accuracy >= 0.95

    def test_degenerate_monotone_corpus_fails_all_runs(self):
        # scores increase with id, so every canonical-orientation label is 0
        rows = [
            (i, tuple(0.01 * i + d for d in (0.0, 0.01, 0.02, 0.03, 0.04)), (float(i), float(i), float(i)))
            for i in range(1, 13)
        ]
        mset = make_set(rows)
        with pytest.raises(ProtocolError):
            run_protocol(mset, Backbone.LOGISTIC, Task.SFT_CMS, Task.SFT_CMS, n_runs=2)

    def test_matrix_shares_models_across_eval_tasks(self, canonical):
        result = run_matrix(
            canonical, Backbone.LOGISTIC, Task.SFT_CMS, seeds=range(2)
        )
        assert set(result.runs[0].evaluations) == set(Task)
        assert result.report(Task.SFT_RAG).predictor == "logistic"

    def test_parallel_jobs_match_serial(self, canonical):
        serial = run_matrix(canonical, Backbone.LOGISTIC, Task.SFT_CMS, seeds=range(3), jobs=1)
        parallel = run_matrix(canonical, Backbone.LOGISTIC, Task.SFT_CMS, seeds=range(3), jobs=2)
        for task in Task:
            assert serial.report(task) == parallel.report(task)


class TestBaselineProtocol:
    def test_proxy_baseline_runs(self, canonical):
        report = baseline_protocol(canonical, "kshot_rag", Task.SFT_CMS, seeds=range(5))
        assert len(report.per_run) == 5
        assert 0.4 <= report.mean <= 1.0

    def test_combo_baseline_normalizes_internally(self, canonical):
        report = baseline_protocol(canonical, Combo.MEAN_OF_FIVE, Task.SFT_RAG, seeds=range(3))
        assert report.predictor == "combine_five"


class TestQuantileBuckets:
    def test_bucket_structure(self, canonical):
        report = quantile_buckets(canonical, "kshot_rag", Task.SFT_CMS)
        counts = [b.count for b in report.buckets]
        assert len(counts) == 5
        assert sum(counts) == 1220  # all non-tied pairs
        assert max(counts) - min(counts) <= 1
        gaps = [(b.gap_min, b.gap_max) for b in report.buckets]
        assert all(lo <= hi for lo, hi in gaps)
        assert all(prev[1] <= nxt[0] for prev, nxt in zip(gaps, gaps[1:]))

    def test_perfect_oracle_predictor(self):
        # proxy column equals the true score column: every bucket is perfect
        rows = [
            (i, (float(i), 0.5, 0.5, 0.5, 0.5), (float(i), float(i), float(i)))
            for i in range(1, 21)
        ]
        # ppl fields must stay in (0, 1]; rescale into range
        rows = [
            (i, (i / 25.0, 0.5, 0.5, 0.5, 0.5), (float(i), float(i), float(i)))
            for i in range(1, 21)
        ]
        mset = make_set(rows)
        report = quantile_buckets(mset, "ppl_clm", Task.SFT_CMS)
        assert all(b.accuracy == 1.0 for b in report.buckets)

    def test_kshot_rag_rises_ppl_clm_falls(self, canonical):
        for task in Task:
            rag = quantile_buckets(canonical, "kshot_rag", task)
            assert rag.buckets[-1].accuracy > rag.buckets[0].accuracy
            clm = quantile_buckets(canonical, "ppl_clm", task)
            assert clm.buckets[-1].accuracy < clm.buckets[0].accuracy

    def test_supervised_pooling(self, canonical):
        result = run_matrix(canonical, Backbone.LOGISTIC, Task.SFT_CMS, seeds=range(3))
        report = quantile_buckets(canonical, result, Task.SFT_CMS)
        total = sum(b.count for b in report.buckets)
        assert total == sum(len(r.evaluations[Task.SFT_CMS][1]) for r in result.runs)

    def test_too_few_records(self):
        mset = make_set(
            [
                (1, (0.1,) * 5, (1.0, 1.0, 1.0)),
                (2, (0.2,) * 5, (2.0, 2.0, 2.0)),
            ]
        )
        with pytest.raises(ValueError):
            quantile_buckets(mset, "ppl_clm", Task.SFT_CMS)


class TestGroupedAccuracy:
    def test_objective_factor_clm_vs_sc_cell(self, canonical):
        grid = grouped_accuracy(canonical, "ppl_sc", Task.SFT_CMS, Factor.OBJECTIVE)
        i, j = grid.labels.index("clm"), grid.labels.index("sc")
        # models 1..5 (clm) pair with 6..10 (sc) at matching learning rates
        assert grid.counts[i, j] == 5
        assert 0.0 <= grid.accuracy[i, j] <= 1.0

    def test_symmetry_and_empty_diagonal(self, canonical):
        grid = grouped_accuracy(canonical, "kshot_rag", Task.SFT_RAG, Factor.OBJECTIVE)
        assert np.all(np.isnan(np.diag(grid.accuracy)))
        filled = ~np.isnan(grid.accuracy)
        assert np.array_equal(filled, filled.T)
        assert np.array_equal(grid.counts, grid.counts.T)

    def test_data_config_factor(self, canonical):
        grid = grouped_accuracy(canonical, "ppl_clm", Task.SFT_CMS, Factor.DATA_CONFIG)
        i, j = grid.labels.index("dc0"), grid.labels.index("dc1")
        # (2, 36) for clm and (12, 41) for plm share all other fields
        assert grid.counts[i, j] == 2

    def test_tagging_length_factor(self, canonical):
        grid = grouped_accuracy(canonical, "ppl_clm", Task.SFT_CMS, Factor.TAGGING_AND_LENGTH)
        assert "NoTag-All" in grid.labels
        assert "Tag-Max" in grid.labels
        i, j = grid.labels.index("NoTag-All"), grid.labels.index("NoTag-Mid")
        # only models 2 and 46 qualify (36..45 differ in data config too)
        assert grid.counts[i, j] == 1

    def test_both_orientations_merge_into_one_cell(self):
        from ltcrank.dataset import Objective

        from conftest import make_record

        mset = make_set(
            [
                make_record(1, (0.1,) * 5, (1.0, 1.0, 1.0), objective=Objective.CLM, lr=1e-4),
                make_record(2, (0.2,) * 5, (2.0, 2.0, 2.0), objective=Objective.SC, lr=1e-4),
                make_record(3, (0.3,) * 5, (3.0, 3.0, 3.0), objective=Objective.SC, lr=2e-4),
                make_record(4, (0.4,) * 5, (4.0, 4.0, 4.0), objective=Objective.CLM, lr=2e-4),
            ]
        )
        grid = grouped_accuracy(mset, "ppl_clm", Task.SFT_CMS, Factor.OBJECTIVE)
        i, j = grid.labels.index("clm"), grid.labels.index("sc")
        # pair (1,2) enters as clm-vs-sc and pair (3,4) as sc-vs-clm
        assert grid.counts[i, j] == 2

    def test_single_group_factor_is_empty(self):
        mset = make_set(
            [
                (1, (0.1,) * 5, (1.0, 2.0, 3.0)),
                (2, (0.2,) * 5, (2.0, 3.0, 4.0)),
            ]
        )
        grid = grouped_accuracy(mset, "ppl_clm", Task.SFT_CMS, Factor.OBJECTIVE)
        assert np.all(np.isnan(grid.accuracy))
        assert grid.counts.sum() == 0

    def test_cells_bounded(self, canonical):
        for factor in Factor:
            grid = grouped_accuracy(canonical, "kshot_rag", Task.SFT_CBQA, factor)
            filled = grid.accuracy[~np.isnan(grid.accuracy)]
            assert np.all((filled >= 0.0) & (filled <= 1.0))


class TestAccuracyReport:
    def test_from_runs_requires_data(self):
        with pytest.raises(ProtocolError):
            AccuracyReport.from_runs(Task.SFT_CMS, "x", [], [])
