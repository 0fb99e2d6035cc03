"""Tests for cross-validation, ROC/AUC, top-rank hits and case studies."""

import numpy as np
import pytest

from scripts.utils.errors import DomainValidationError, InsufficientDataError
from scripts.utils.evalkit import (
    auc,
    compare_feature_sets,
    kfold_split,
    leave_disease_out,
    roc_points,
    run_cv,
    sweep_dimensions,
    top_rank_hits,
    trapezoid_area,
)
from scripts.utils.imc import ImcOptions
from scripts.utils.model import AssociationMatrix, ScoreMatrix, dense_view
from scripts.utils.refine import RefineOptions, refine_all
from scripts.utils.synthetic import SyntheticParams, generate_synthetic

FAST_IMC = ImcOptions(rank=4, lam=0.1, max_sweeps=15, seed=3)
# refined features must not fall more than this below raw ones on identical folds
REFINED_AUC_TOLERANCE = 0.01


@pytest.fixture(scope="module")
def small_dataset():
    return generate_synthetic(n_drugs=24, n_diseases=16, dim=8, n_blocks=2, noise=0.1, seed=1)


def positives(n: int) -> AssociationMatrix:
    """n positives spread row-major over a wide matrix."""
    cols = 50
    pairs = frozenset((k // cols, k % cols) for k in range(n))
    return AssociationMatrix(pairs, n // cols + 1, cols)


class TestKFoldSplit:
    """Test fold assignment."""

    def test_even_split(self) -> None:
        """100 positives into 10 folds of 10."""
        assert kfold_split(positives(100), 10, seed=0).sizes() == [10] * 10

    def test_uneven_split(self) -> None:
        """1854 positives: four folds of 186 and six of 185."""
        sizes = kfold_split(positives(1854), 10, seed=0).sizes()
        assert sorted(sizes) == [185] * 6 + [186] * 4
        assert max(sizes) - min(sizes) <= 1

    def test_partition(self) -> None:
        """Every positive lands in exactly one fold."""
        I = positives(37)
        assignment = kfold_split(I, 5, seed=4)
        seen = [pair for f in range(5) for pair in assignment.pairs_in(f)]
        assert sorted(seen) == I.sorted_pairs()

    def test_seeded(self) -> None:
        """Same seed, same folds; another seed, another shuffle."""
        I = positives(60)
        assert kfold_split(I, 10, 7).fold_of == kfold_split(I, 10, 7).fold_of
        assert kfold_split(I, 10, 7).fold_of != kfold_split(I, 10, 8).fold_of

    def test_too_few_positives(self) -> None:
        with pytest.raises(InsufficientDataError):
            kfold_split(positives(3), 10, seed=0)


class TestAuc:
    """Test Mann-Whitney AUC and the ROC polyline."""

    @pytest.mark.parametrize(
        ("pos", "neg", "expected"),
        [
            ([0.9, 0.4], [0.5, 0.1], 0.75),
            ([0.9, 0.8], [0.1, 0.2], 1.0),
            ([0.1], [0.9], 0.0),
            ([0.5, 0.5], [0.5], 0.5),
        ],
    )
    def test_values(self, pos, neg, expected) -> None:
        """Ties score half."""
        assert auc(pos, neg) == expected

    def test_empty_side(self) -> None:
        with pytest.raises(InsufficientDataError):
            auc([], [0.1])

    @pytest.mark.parametrize("seed", range(500))
    def test_matches_pairwise_count(self, seed: int) -> None:
        """Equals the share of (positive, negative) pairs ordered correctly, ties at half."""
        rng = np.random.default_rng(seed)
        pos = np.round(rng.random(int(rng.integers(1, 20))), int(rng.integers(1, 4)))
        neg = np.round(rng.random(int(rng.integers(1, 40))), int(rng.integers(1, 4)))
        credit = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
        assert auc(pos, neg) == pytest.approx(credit / (len(pos) * len(neg)), abs=1e-12)

    def test_roc_geometry(self) -> None:
        """Starts at the origin, ends at (1, 1), never goes back."""
        rng = np.random.default_rng(0)
        pos, neg = rng.random(30) + 0.2, rng.random(70)
        points = roc_points(pos, neg)
        assert points[0] == (0.0, 0.0)
        assert points[-1] == (1.0, 1.0)
        xs, ys = zip(*points, strict=True)
        assert list(xs) == sorted(xs)
        assert list(ys) == sorted(ys)

    def test_area_equals_auc(self) -> None:
        """Trapezoids over the polyline reproduce the rank statistic, ties included."""
        rng = np.random.default_rng(1)
        pos = np.round(rng.random(40), 1)
        neg = np.round(rng.random(90), 1)
        assert trapezoid_area(roc_points(pos, neg)) == pytest.approx(auc(pos, neg), abs=1e-12)


class TestTopRankHits:
    """Test per-disease ranking of held-out drugs."""

    def test_rank_three(self) -> None:
        """A held-out drug in third place counts for threshold 5, not 1."""
        scores = ScoreMatrix(np.array([[0.9], [0.8], [0.7], [0.1], [0.0]]))
        train = AssociationMatrix(frozenset(), 5, 1)
        assert top_rank_hits(scores, train, [(2, 0)], [1, 5]) == [0, 1]

    def test_training_positives_not_counted_ahead(self) -> None:
        """Known associations are skipped when ranking."""
        scores = ScoreMatrix(np.array([[0.9], [0.8], [0.7], [0.1], [0.0]]))
        train = AssociationMatrix(frozenset({(0, 0), (1, 0)}), 5, 1)
        assert top_rank_hits(scores, train, [(2, 0)], [1]) == [1]

    def test_ties_favor_lower_index(self) -> None:
        """Equal scores: the lower drug index ranks first."""
        scores = ScoreMatrix(np.array([[0.5], [0.5], [0.5]]))
        train = AssociationMatrix(frozenset(), 3, 1)
        assert top_rank_hits(scores, train, [(0, 0), (2, 0)], [1, 2, 3]) == [1, 1, 2]

    def test_monotone_in_threshold(self) -> None:
        """Counts never decrease as the threshold grows."""
        rng = np.random.default_rng(2)
        scores = ScoreMatrix(rng.random((30, 6)))
        train = AssociationMatrix(frozenset(), 30, 6)
        heldout = [(int(i), int(j)) for i, j in zip(rng.integers(0, 30, 12), rng.integers(0, 6, 12), strict=True)]
        hits = top_rank_hits(scores, train, heldout, [1, 5, 10, 20, 30])
        assert hits == sorted(hits)
        assert hits[-1] == len(heldout)

    def test_unsorted_thresholds(self) -> None:
        scores = ScoreMatrix(np.zeros((2, 1)))
        with pytest.raises(DomainValidationError):
            top_rank_hits(scores, AssociationMatrix(frozenset(), 2, 1), [(0, 0)], [5, 1])


class TestRunCv:
    """Test the cross-validation loop on a small planted dataset."""

    def test_fold_bookkeeping(self, small_dataset) -> None:
        """Held-out folds partition the positives; negatives are the full unknown pool."""
        I = small_dataset.associations
        report = run_cv(I, small_dataset.drug_vectors, small_dataset.disease_vectors, FAST_IMC, 5, seed=2)
        assert len(report.folds) == 5
        assert sum(f.n_heldout for f in report.folds) == len(I)
        n_unknown = int(np.count_nonzero(dense_view(I) == 0))
        for fold in report.folds:
            assert fold.n_train + fold.n_heldout == len(I)
            assert fold.n_negatives == n_unknown
            assert 0.0 <= fold.auc <= 1.0
        assert report.mean_auc == pytest.approx(np.mean([f.auc for f in report.folds]))
        assert report.top_k == [sum(f.top_k[t] for f in report.folds) for t in range(5)]

    def test_report_has_no_timing(self, small_dataset) -> None:
        """Report content is a pure function of inputs and seed."""
        args = (small_dataset.associations, small_dataset.drug_vectors, small_dataset.disease_vectors, FAST_IMC, 4)
        first = run_cv(*args, seed=5).to_dict()
        second = run_cv(*args, seed=5).to_dict()
        assert first == second
        assert first["negative_pool"].startswith("all drug-disease pairs")

    def test_workers_do_not_change_result(self, small_dataset) -> None:
        """Parallel folds give the same report as serial ones."""
        args = (small_dataset.associations, small_dataset.drug_vectors, small_dataset.disease_vectors, FAST_IMC, 4)
        serial = run_cv(*args, seed=6, workers=1)
        parallel = run_cv(*args, seed=6, workers=2)
        assert serial.to_dict() == parallel.to_dict()

    def test_rejects_bad_thresholds(self, small_dataset) -> None:
        with pytest.raises(DomainValidationError):
            run_cv(
                small_dataset.associations,
                small_dataset.drug_vectors,
                small_dataset.disease_vectors,
                FAST_IMC,
                4,
                seed=0,
                thresholds=[0, 5],
            )


def test_compare_feature_sets_uses_same_folds(small_dataset) -> None:
    """Raw and refined runs hold out identical pairs."""
    drugs = refine_all(small_dataset.drug_vectors, small_dataset.drug_sims, RefineOptions(max_iters=50))
    diseases = refine_all(small_dataset.disease_vectors, small_dataset.disease_sims, RefineOptions(max_iters=50))
    comparison = compare_feature_sets(
        small_dataset.associations,
        small_dataset.drug_vectors,
        small_dataset.disease_vectors,
        drugs,
        diseases,
        FAST_IMC,
        4,
        seed=1,
    )
    assert [f.n_heldout for f in comparison.raw.folds] == [f.n_heldout for f in comparison.refined.folds]
    assert comparison.raw.features == "raw"
    assert set(comparison.to_dict()) == {
        "raw_mean_auc",
        "refined_mean_auc",
        "raw_pooled_auc",
        "refined_pooled_auc",
        "relative_improvement",
    }


class TestLeaveDiseaseOut:
    """Test single-disease case studies."""

    def test_ranking_and_recall(self, small_dataset) -> None:
        """All drugs ranked by descending score; removed pairs are reported."""
        catalog = small_dataset.catalog
        disease_id = catalog.disease_ids[0]
        evidence = {disease_id: {catalog.drug_ids[0]}}
        study = leave_disease_out(
            disease_id,
            catalog,
            small_dataset.associations,
            small_dataset.drug_vectors,
            small_dataset.disease_vectors,
            FAST_IMC,
            top_k=5,
            evidence=evidence,
            truth=small_dataset.true_drugs(0),
        )
        assert [row.rank for row in study.rows] == list(range(1, catalog.n_drugs + 1))
        scores = [row.score for row in study.rows]
        assert scores == sorted(scores, reverse=True)
        expected_removed = sorted(
            catalog.drug_ids[i] for i, j in small_dataset.associations.sorted_pairs() if j == 0
        )
        assert sorted(study.removed) == expected_removed
        assert study.planted_recall is not None
        assert sum(row.evidence for row in study.rows) == 1
        assert len(study.to_dict()["top"]) == 5

    def test_unknown_disease(self, small_dataset) -> None:
        with pytest.raises(InsufficientDataError, match="unknown disease"):
            leave_disease_out(
                "nope",
                small_dataset.catalog,
                small_dataset.associations,
                small_dataset.drug_vectors,
                small_dataset.disease_vectors,
                FAST_IMC,
            )


def test_sweep_dimensions_records_each_dim() -> None:
    """One point per requested dimension, in order."""
    params = SyntheticParams(n_drugs=20, n_diseases=12, dim=8, n_blocks=2)
    points = sweep_dimensions([4, 6], params, RefineOptions(max_iters=20), FAST_IMC, 3, seed=0)
    assert [p.dim for p in points] == [4, 6]
    assert all(0.0 <= p.mean_auc <= 1.0 and 0.0 <= p.raw_mean_auc <= 1.0 for p in points)


@pytest.mark.slow
class TestSyntheticBenchmark:
    """Full-size planted benchmark (run with ``pytest -m slow``)."""

    @pytest.fixture(scope="class")
    def benchmark(self):
        dataset = generate_synthetic(seed=42)
        drugs = refine_all(dataset.drug_vectors, dataset.drug_sims)
        diseases = refine_all(dataset.disease_vectors, dataset.disease_sims)
        return dataset, drugs, diseases

    def test_refined_cv_auc(self, benchmark) -> None:
        """Refined features reach a mean AUC of at least 0.90 and match raw ones on the same folds."""
        dataset, drugs, diseases = benchmark
        comparison = compare_feature_sets(
            dataset.associations,
            dataset.drug_vectors,
            dataset.disease_vectors,
            drugs,
            diseases,
            ImcOptions(seed=42),
            10,
            seed=42,
        )
        raw, refined = comparison.raw, comparison.refined
        assert [f.n_heldout for f in refined.folds] == [f.n_heldout for f in raw.folds]
        assert [f.n_train for f in refined.folds] == [f.n_train for f in raw.folds]
        assert refined.mean_auc >= 0.90
        assert refined.mean_auc >= raw.mean_auc - REFINED_AUC_TOLERANCE

    def test_case_studies_recover_planted_block(self, benchmark) -> None:
        """For 5 sampled diseases, at least 80% of the top 10 come from the planted block."""
        dataset, drugs, diseases = benchmark
        sampled = np.random.default_rng(42).choice(dataset.catalog.n_diseases, 5, replace=False)
        for j in sorted(int(j) for j in sampled):
            truth = dataset.true_drugs(j)
            study = leave_disease_out(
                dataset.catalog.disease_ids[j],
                dataset.catalog,
                dataset.associations,
                drugs,
                diseases,
                ImcOptions(seed=42),
                top_k=10,
                truth=truth,
            )
            assert study.planted_in_top_k == sum(
                row.drug_id in {dataset.catalog.drug_ids[i] for i in truth}
                for row in study.rows[:10]
            )
            assert study.planted_recall is not None
            assert study.planted_recall >= 0.8, dataset.catalog.disease_ids[j]
            summary = study.to_dict()
            assert isinstance(summary["removed_in_top_k"], int)
            assert 0 <= summary["removed_in_top_k"] <= min(10, len(study.removed))
