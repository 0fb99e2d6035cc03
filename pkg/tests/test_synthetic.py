"""Tests for the planted-block synthetic generator."""

from pathlib import Path

import numpy as np
import pytest
import yaml

from scripts.utils.errors import DomainValidationError
from scripts.utils.ingest import load_embeddings, load_ground_truth
from scripts.utils.model import Side, dense_view
from scripts.utils.synthetic import SyntheticParams, generate_from_params, generate_synthetic, write_synthetic


class TestGenerateSynthetic:
    """Test dataset generation."""

    def test_shapes_and_ids(self) -> None:
        """Sizes follow the arguments; ids are zero-padded."""
        data = generate_synthetic(n_drugs=12, n_diseases=8, dim=5, n_blocks=3, seed=0)
        assert data.catalog.n_drugs == 12
        assert data.catalog.n_diseases == 8
        assert data.drug_vectors.dim == 5
        assert data.catalog.drug_ids[0] == "DRUG0001"
        assert len(data.drug_sims) == 3
        assert len(data.disease_sims) == 2

    def test_blocks_are_balanced(self) -> None:
        """Block sizes differ by at most one."""
        data = generate_synthetic(n_drugs=13, n_diseases=10, dim=4, n_blocks=4, seed=1)
        counts = np.bincount(data.drug_blocks, minlength=4)
        assert counts.max() - counts.min() <= 1

    def test_associations_only_within_matched_blocks(self) -> None:
        """No cross-block positive is ever planted."""
        data = generate_synthetic(n_drugs=20, n_diseases=15, dim=6, n_blocks=3, seed=2)
        for i, j in data.associations.sorted_pairs():
            assert data.drug_blocks[i] == data.disease_blocks[j]
            assert i in data.true_drugs(j)

    def test_noiseless_limit(self) -> None:
        """Zero noise: block members share a vector and similarities are exactly 0 or 1."""
        data = generate_synthetic(n_drugs=10, n_diseases=6, dim=4, n_blocks=2, noise=0.0, seed=3)
        same = data.drug_blocks[:, None] == data.drug_blocks[None, :]
        for sim in data.drug_sims:
            np.testing.assert_array_equal(sim.values, same.astype(float))
        first_block = np.flatnonzero(data.drug_blocks == 0)
        vectors = data.drug_vectors.vectors[first_block]
        np.testing.assert_array_equal(vectors, np.broadcast_to(vectors[0], vectors.shape))

    def test_centroids_orthonormal_when_dim_allows(self) -> None:
        """Distinct blocks start orthogonal."""
        data = generate_synthetic(n_drugs=4, n_diseases=4, dim=8, n_blocks=4, noise=0.0, seed=4)
        gram = data.drug_vectors.vectors @ data.drug_vectors.vectors.T
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-12)

    def test_deterministic(self) -> None:
        """Same seed, same dataset; another seed differs."""
        first = generate_synthetic(n_drugs=10, n_diseases=6, dim=4, n_blocks=2, seed=5)
        again = generate_synthetic(n_drugs=10, n_diseases=6, dim=4, n_blocks=2, seed=5)
        other = generate_synthetic(n_drugs=10, n_diseases=6, dim=4, n_blocks=2, seed=6)
        np.testing.assert_array_equal(first.drug_vectors.vectors, again.drug_vectors.vectors)
        np.testing.assert_array_equal(dense_view(first.associations), dense_view(again.associations))
        assert not np.array_equal(first.drug_vectors.vectors, other.drug_vectors.vectors)

    def test_params_bundle(self) -> None:
        """generate_from_params forwards every field."""
        params = SyntheticParams(n_drugs=9, n_diseases=7, dim=3, n_blocks=3, noise=0.2, assoc_density=1.0)
        data = generate_from_params(params, seed=7)
        assert data.catalog.n_drugs == 9
        assert len(data.associations) == int(
            np.count_nonzero(data.drug_blocks[:, None] == data.disease_blocks[None, :]),
        )

    @pytest.mark.parametrize(
        "kwargs",
        [{"n_blocks": 0}, {"n_blocks": 50}, {"noise": -0.1}, {"assoc_density": 0.0}, {"dim": 0}],
    )
    def test_invalid_arguments(self, kwargs) -> None:
        with pytest.raises(DomainValidationError):
            generate_synthetic(n_drugs=10, n_diseases=10, **kwargs)


def test_write_synthetic(tmp_path: Path) -> None:
    """Files are in the ingest formats and the config points at them."""
    data = generate_synthetic(n_drugs=8, n_diseases=6, dim=4, n_blocks=2, seed=8)
    params = SyntheticParams(n_drugs=8, n_diseases=6, dim=4, n_blocks=2)
    config_path = write_synthetic(data, tmp_path / "synthetic", seed=8, params=params)

    config = yaml.safe_load(config_path.read_text())
    assert config["seed"] == 8
    assert config["synth"]["n_drugs"] == 8
    names = {entry["name"] for entry in config["inputs"]["precomputed_similarities"]}
    assert names == {"side_effect", "chemical", "target_sequence", "phenotype", "gene_sequence"}

    directory = config_path.parent
    vectors = load_embeddings(directory / config["inputs"]["drug_vectors"], Side.DRUG)
    np.testing.assert_array_equal(vectors.vectors, data.drug_vectors.vectors)
    truth = load_ground_truth(directory / config["inputs"]["ground_truth"])
    assert truth[(Side.DRUG, data.catalog.drug_ids[0])] == int(data.drug_blocks[0])
