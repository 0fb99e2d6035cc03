"""Unit tests for cosine-regression refinement."""

import numpy as np
import pytest

from scripts.utils.errors import DomainValidationError
from scripts.utils.model import EmbeddingSet, Side, SimilarityMatrix
from scripts.utils.refine import (
    RefineOptions,
    RefineReport,
    mean_residual,
    objective_gradient,
    objective_value,
    refine_all,
    refine_vector,
)


def random_sim(rng: np.random.Generator, n: int, name: str, holes: float = 0.0) -> SimilarityMatrix:
    values = rng.random((n, n))
    values = (values + values.T) / 2
    mask = rng.random((n, n)) >= holes
    mask = mask & mask.T
    return SimilarityMatrix(Side.DRUG, name, values, mask)


def random_instance(seed: int, n: int = 10, dim: int = 8, measures: int = 2, holes: float = 0.2):
    rng = np.random.default_rng(seed)
    raw = EmbeddingSet(Side.DRUG, tuple(f"d{k}" for k in range(n)), rng.standard_normal((n, dim)))
    sims = tuple(random_sim(rng, n, f"m{k}", holes) for k in range(measures))
    return raw, sims


def two_entity(target: float) -> tuple[EmbeddingSet, tuple[SimilarityMatrix, ...]]:
    raw = EmbeddingSet(Side.DRUG, ("a", "b"), np.array([[1.0, 0.0], [0.0, 1.0]]))
    values = np.array([[1.0, target], [target, 1.0]])
    sim = SimilarityMatrix(Side.DRUG, "m", values, np.ones((2, 2), dtype=bool))
    return raw, (sim,)


class TestRefineOptions:
    """Test option parsing and validation."""

    def test_defaults(self) -> None:
        """Documented defaults."""
        opts = RefineOptions()
        assert (opts.step_size, opts.max_iters, opts.rel_tol) == (0.01, 500, 1e-8)
        assert opts.include_self_pairs is False

    def test_from_config(self) -> None:
        """Missing keys keep their defaults."""
        opts = RefineOptions.from_config({"step_size": 0.05, "include_self_pairs": True})
        assert opts.step_size == 0.05
        assert opts.max_iters == 500
        assert opts.include_self_pairs is True

    def test_rejects_non_positive(self) -> None:
        """Step size must be positive."""
        with pytest.raises(DomainValidationError):
            RefineOptions(step_size=0.0)


class TestObjective:
    """Test objective value and gradient."""

    def test_parallel_candidate(self) -> None:
        """cos = 1 against the only neighbor gives (1 - t)^2."""
        raw, sims = two_entity(0.3)
        value = objective_value(0, np.array([0.0, 2.0]), raw, sims)
        assert value == pytest.approx((1 - 0.3) ** 2)

    def test_exact_fit_is_zero(self) -> None:
        """Targets equal to the current cosines."""
        raw, sims = two_entity(0.0)
        assert objective_value(0, raw.vectors[0], raw, sims) == 0.0

    def test_term_by_term_recomputation(self) -> None:
        """Matches an explicit double loop over neighbors and measures."""
        raw, sims = random_instance(3)
        x = np.random.default_rng(4).standard_normal(raw.dim)
        expected = 0.0
        for sim in sims:
            for j in range(len(raw)):
                if j == 2 or not sim.mask[2, j]:
                    continue
                y = raw.vectors[j]
                cos = x @ y / (np.linalg.norm(x) * np.linalg.norm(y))
                expected += (cos - sim.values[2, j]) ** 2
        assert objective_value(2, x, raw, sims) == pytest.approx(expected, rel=1e-12)

    def test_self_pairs_optional(self) -> None:
        """With self pairs, the (i, i) term with target 1 is added."""
        raw, sims = two_entity(0.0)
        x = np.array([1.0, 1.0])
        without = objective_value(0, x, raw, sims)
        with_self = objective_value(0, x, raw, sims, include_self_pairs=True)
        assert with_self == pytest.approx(without + (1 / np.sqrt(2) - 1) ** 2)

    def test_scale_invariance(self) -> None:
        """Only the direction of the candidate matters."""
        raw, sims = random_instance(5)
        x = np.random.default_rng(6).standard_normal(raw.dim)
        assert objective_value(1, x, raw, sims) == pytest.approx(
            objective_value(1, 2.0 * x, raw, sims),
            rel=1e-12,
        )

    def test_zero_candidate_rejected(self) -> None:
        """Cosine is undefined at the origin."""
        raw, sims = two_entity(0.5)
        with pytest.raises(DomainValidationError, match="zero norm"):
            objective_value(0, np.zeros(2), raw, sims)
        with pytest.raises(DomainValidationError, match="zero norm"):
            objective_gradient(0, np.zeros(2), raw, sims)

    def test_gradient_at_stationary_point(self) -> None:
        """cos equals the target: zero gradient."""
        raw, sims = two_entity(0.0)
        np.testing.assert_allclose(objective_gradient(0, raw.vectors[0], raw, sims), 0.0, atol=1e-15)

    @pytest.mark.parametrize("seed", range(200))
    def test_gradient_matches_finite_differences(self, seed: int) -> None:
        """Central differences with h = 1e-6 over random entities, dimensions and holes."""
        dim = (4, 8, 16, 32)[seed % 4]
        raw, sims = random_instance(
            seed, n=6 + seed % 7, dim=dim, measures=1 + seed % 3, holes=0.1 * (seed % 4)
        )
        entity = seed % len(raw)
        x = np.random.default_rng([seed, 1]).standard_normal(dim)
        analytic = objective_gradient(entity, x, raw, sims)
        h = 1e-6
        numeric = np.array(
            [
                (
                    objective_value(entity, x + h * e, raw, sims)
                    - objective_value(entity, x - h * e, raw, sims)
                )
                / (2 * h)
                for e in np.eye(dim)
            ],
        )
        error = np.max(np.abs(analytic - numeric))
        assert error < 1e-5 * max(1.0, float(np.max(np.abs(analytic))))

    def test_gradient_orthogonal_to_candidate(self) -> None:
        """The cosine gradient has no radial component."""
        raw, sims = random_instance(8)
        x = np.random.default_rng(9).standard_normal(raw.dim)
        gradient = objective_gradient(0, x, raw, sims)
        assert abs(gradient @ x) < 1e-10 * np.linalg.norm(gradient) * np.linalg.norm(x)


class TestRefineVector:
    """Test single-entity descent."""

    def test_already_optimal(self) -> None:
        """Nothing to improve returns the raw vector."""
        raw, sims = two_entity(0.0)
        result = refine_vector(0, raw, sims)
        np.testing.assert_array_equal(result.vector, raw.vectors[0])
        assert result.iterations == 0
        assert result.objective_after == 0.0

    def test_single_term_moves_toward_neighbor(self) -> None:
        """Target 1 pulls the vector toward its neighbor."""
        raw, sims = two_entity(1.0)
        result = refine_vector(0, raw, sims, RefineOptions(step_size=0.1))
        y = raw.vectors[1]
        before = raw.vectors[0] @ y / np.linalg.norm(raw.vectors[0])
        after = result.vector @ y / np.linalg.norm(result.vector)
        assert after >= before
        assert result.objective_after < result.objective_before

    def test_trace_is_monotone(self) -> None:
        """Accepted steps never increase the objective."""
        raw, sims = random_instance(10)
        for i in range(len(raw)):
            result = refine_vector(i, raw, sims, RefineOptions(step_size=0.5, max_iters=100))
            assert all(b <= a for a, b in zip(result.trace, result.trace[1:], strict=False))
            assert result.objective_after <= result.objective_before
            assert np.linalg.norm(result.vector) > 0

    def test_all_masked_flagged(self) -> None:
        """No defined term: raw vector returned with a flag."""
        raw = EmbeddingSet(Side.DRUG, ("a", "b"), np.eye(2))
        sim = SimilarityMatrix(Side.DRUG, "m", np.eye(2), np.eye(2, dtype=bool))
        result = refine_vector(0, raw, (sim,))
        assert result.all_masked
        np.testing.assert_array_equal(result.vector, raw.vectors[0])

    def test_deterministic(self) -> None:
        """Identical inputs give bitwise-identical output."""
        raw, sims = random_instance(12)
        first = refine_vector(3, raw, sims)
        second = refine_vector(3, raw, sims)
        np.testing.assert_array_equal(first.vector, second.vector)

    def test_index_out_of_range(self) -> None:
        raw, sims = two_entity(0.5)
        with pytest.raises(DomainValidationError):
            refine_vector(5, raw, sims)


class TestRefineAll:
    """Test refinement of a whole side."""

    def test_empty_stack_is_identity(self) -> None:
        """No similarity, no change."""
        raw, _ = random_instance(13)
        refined = refine_all(raw, ())
        np.testing.assert_array_equal(refined.vectors, raw.vectors)
        assert refined.ids == raw.ids

    def test_permutation_equivariance(self) -> None:
        """Refining commutes with reordering the entities."""
        raw, sims = random_instance(14, n=6, holes=0.0)
        perm = np.array([3, 0, 5, 1, 4, 2])
        permuted_raw = EmbeddingSet(Side.DRUG, tuple(raw.ids[k] for k in perm), raw.vectors[perm])
        permuted_sims = tuple(
            SimilarityMatrix(Side.DRUG, s.name, s.values[np.ix_(perm, perm)], s.mask[np.ix_(perm, perm)])
            for s in sims
        )
        opts = RefineOptions(max_iters=50)
        direct = refine_all(raw, sims, opts).select(permuted_raw.ids)
        permuted = refine_all(permuted_raw, permuted_sims, opts)
        np.testing.assert_allclose(permuted.vectors, direct.vectors, rtol=1e-7, atol=1e-9)

    def test_workers_do_not_change_result(self) -> None:
        """Parallel refinement is bitwise identical to serial."""
        raw, sims = random_instance(15)
        opts = RefineOptions(max_iters=30)
        serial = refine_all(raw, sims, opts, workers=1)
        parallel = refine_all(raw, sims, opts, workers=3)
        np.testing.assert_array_equal(serial.vectors, parallel.vectors)

    def test_report_residual_decreases(self) -> None:
        """Mean residual after refinement is below the raw residual."""
        raw, sims = random_instance(16, n=12)
        report = RefineReport()
        refined = refine_all(raw, sims, RefineOptions(step_size=0.1), report=report)
        assert report.entities == 12
        assert report.objective_after < report.objective_before
        assert report.mean_residual_after < report.mean_residual_before
        assert report.mean_residual_after == pytest.approx(mean_residual(refined, raw, sims))
        assert set(report.to_dict()) >= {"entities", "all_masked", "objective_before"}
