"""Tests for artifact writers."""

from pathlib import Path

import numpy as np
import pytest

from scripts.utils import artifacts
from scripts.utils.errors import DomainValidationError
from scripts.utils.imc import rank_drugs_for_disease
from scripts.utils.model import EntityCatalog, ScoreMatrix


class TestWriteScores:
    """Test the ranked score table."""

    def test_rows_follow_disease_ranking(self, tmp_path: Path) -> None:
        """Per disease, descending score; equal scores keep drug order."""
        catalog = EntityCatalog(("d0", "d1", "d2"), ("s0", "s1"))
        scores = ScoreMatrix(np.array([[0.5, 0.1], [0.9, 0.1], [0.5, 0.3]]))
        path = artifacts.write_scores(tmp_path / "scores.csv", catalog, scores)
        lines = path.read_text().splitlines()
        assert lines[0] == "drug_id,disease_id,score"
        assert [line.rsplit(",", 1)[0] for line in lines[1:]] == [
            "d1,s0",
            "d0,s0",
            "d2,s0",
            "d2,s1",
            "d0,s1",
            "d1,s1",
        ]
        for j, disease in enumerate(catalog.disease_ids):
            written = [line.split(",")[0] for line in lines[1:] if f",{disease}," in line]
            assert written == [catalog.drug_ids[i] for i, _ in rank_drugs_for_disease(scores, j)]

    def test_scores_round_trip_exactly(self, tmp_path: Path) -> None:
        catalog = EntityCatalog(("d0",), ("s0",))
        value = 0.1 + 0.2
        path = artifacts.write_scores(tmp_path / "scores.csv", catalog, ScoreMatrix(np.array([[value]])))
        assert float(path.read_text().splitlines()[1].split(",")[2]) == value

    def test_catalog_shape_mismatch(self, tmp_path: Path) -> None:
        catalog = EntityCatalog(("d0", "d1"), ("s0",))
        with pytest.raises(DomainValidationError):
            artifacts.write_scores(tmp_path / "scores.csv", catalog, ScoreMatrix(np.zeros((3, 1))))
