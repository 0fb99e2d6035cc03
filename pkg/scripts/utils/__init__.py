"""Utility modules for drug repositioning."""

from .errors import (
    ConfigError,
    DomainValidationError,
    EmptyCatalogError,
    InputFormatError,
    InsufficientDataError,
    RepositioningError,
)
from .evalkit import (
    CaseStudy,
    EvalReport,
    auc,
    compare_feature_sets,
    kfold_split,
    leave_disease_out,
    run_cv,
    sweep_dimensions,
    top_rank_hits,
)
from .imc import ImcOptions, fit_imc, rank_drugs_for_disease, score_all, score_pair
from .model import (
    AssociationMatrix,
    EmbeddingSet,
    EntityCatalog,
    FactorModel,
    ScoreMatrix,
    Side,
    SimilarityMatrix,
)
from .path_config import PathConfig
from .pipeline_config import PipelineConfig, load_config
from .refine import RefineOptions, refine_all, refine_vector
from .simkit import (
    AlignmentScoring,
    MeasureKind,
    build_similarity_matrix,
    jaccard_similarity,
    normalized_sw,
    smith_waterman,
    tanimoto_similarity,
)
from .synthetic import SyntheticDataset, SyntheticParams, generate_synthetic

__all__ = [
    "AlignmentScoring",
    "AssociationMatrix",
    "CaseStudy",
    "ConfigError",
    "DomainValidationError",
    "EmbeddingSet",
    "EmptyCatalogError",
    "EntityCatalog",
    "EvalReport",
    "FactorModel",
    "ImcOptions",
    "InputFormatError",
    "InsufficientDataError",
    "MeasureKind",
    "PathConfig",
    "PipelineConfig",
    "RefineOptions",
    "RepositioningError",
    "ScoreMatrix",
    "Side",
    "SimilarityMatrix",
    "SyntheticDataset",
    "SyntheticParams",
    "auc",
    "build_similarity_matrix",
    "compare_feature_sets",
    "fit_imc",
    "generate_synthetic",
    "jaccard_similarity",
    "kfold_split",
    "leave_disease_out",
    "normalized_sw",
    "rank_drugs_for_disease",
    "refine_all",
    "refine_vector",
    "run_cv",
    "score_all",
    "score_pair",
    "smith_waterman",
    "sweep_dimensions",
    "tanimoto_similarity",
    "top_rank_hits",
]
