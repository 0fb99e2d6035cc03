"""Inductive matrix completion over drug and disease feature vectors.

The model scores a drug/disease pair as ``d G Hᵀ sᵀ``. It is fitted by
alternating minimization of the dense loss

    ||I - X G Hᵀ Yᵀ||_F^2 + (lam / 2) (||G||_F^2 + ||H||_F^2)

where every unknown pair counts as a zero target. Each half-step is a
regularized least-squares problem solved with conjugate gradient on the
normal-equation operator, warm-started from the current factor. After each
accepted sweep the factors are rebalanced without changing G Hᵀ.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import DomainValidationError, InsufficientDataError
from .model import (
    AssociationMatrix,
    EmbeddingSet,
    EntityCatalog,
    FactorModel,
    ScoreMatrix,
    dense_view,
)

if TYPE_CHECKING:
    from collections.abc import Collection, Sequence

logger = logging.getLogger(__name__)

MODEL_FORMAT = "drugvec-imc-model"
MODEL_VERSION = 1
INIT_STREAM = 1
FALLBACK_LAMBDA = 1e-8
RANK_DEFICIENCY_RTOL = 1e-10
STOP_CONVERGED = "converged"
STOP_OBJECTIVE_INCREASE = "objective_increase"
STOP_MAX_SWEEPS = "max_sweeps"


@dataclass(frozen=True)
class ImcOptions:
    """Alternating-minimization settings."""

    rank: int = 50
    lam: float = 1.0
    max_sweeps: int = 100
    sweep_tol: float = 1e-7
    cg_tol: float = 1e-8
    cg_max_iters: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate ranges."""
        if self.rank < 1:
            raise DomainValidationError("imc rank must be positive")
        if self.lam < 0:
            raise DomainValidationError("imc lambda must be non-negative")
        if self.max_sweeps < 1 or self.cg_max_iters < 1:
            raise DomainValidationError("imc iteration limits must be positive")
        if self.sweep_tol <= 0 or self.cg_tol <= 0:
            raise DomainValidationError("imc tolerances must be positive")
        if not 0 <= self.seed < 2**64:
            raise DomainValidationError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_config(cls, section: dict[str, Any], seed: int) -> ImcOptions:
        """Build from the ``imc`` config section and the global seed."""
        return cls(
            rank=int(section.get("rank", cls.rank)),
            lam=float(section.get("lambda", cls.lam)),
            max_sweeps=int(section.get("max_sweeps", cls.max_sweeps)),
            sweep_tol=float(section.get("sweep_tol", cls.sweep_tol)),
            cg_tol=float(section.get("cg_tol", cls.cg_tol)),
            cg_max_iters=int(section.get("cg_max_iters", cls.cg_max_iters)),
            seed=seed,
        )


@dataclass
class ImcFitReport:
    """Diagnostics of one fit_imc run."""

    rank: int = 0
    lam_requested: float = 0.0
    lam_used: float = 0.0
    lambda_fallback: bool = False
    sweeps: int = 0
    converged: bool = False
    stop_reason: str = STOP_MAX_SWEEPS
    cg_iterations: int = 0
    objective_trace: list[float] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        """Convert stats to dictionary."""
        return {
            "rank": self.rank,
            "lambda_requested": self.lam_requested,
            "lambda_used": self.lam_used,
            "lambda_fallback": self.lambda_fallback,
            "sweeps": self.sweeps,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "cg_iterations": self.cg_iterations,
            "objective_trace": self.objective_trace,
        }


def _check_dims(D: EmbeddingSet, S: EmbeddingSet, dim: int | None = None) -> None:
    if D.dim != S.dim:
        raise DomainValidationError(f"drug dim {D.dim} != disease dim {S.dim}")
    if dim is not None and D.dim != dim:
        raise DomainValidationError(f"feature dim {D.dim} != model dim {dim}")


def imc_objective(
    model: FactorModel,
    D: EmbeddingSet,
    S: EmbeddingSet,
    I: AssociationMatrix,
) -> float:
    """Dense reconstruction loss plus (lam / 2)(||G||^2 + ||H||^2)."""
    _check_dims(D, S, model.dim)
    if I.dims != (len(D), len(S)):
        raise DomainValidationError(f"association dims {I.dims} != ({len(D)}, {len(S)})")
    return _objective(D.vectors, S.vectors, dense_view(I), model.G, model.H, model.lam)


def _objective(
    X: np.ndarray,
    Y: np.ndarray,
    target: np.ndarray,
    G: np.ndarray,
    H: np.ndarray,
    lam: float,
) -> float:
    residual = target - (X @ G) @ (Y @ H).T
    penalty = 0.5 * lam * (float(np.sum(G * G)) + float(np.sum(H * H)))
    return float(np.sum(residual * residual)) + penalty


def _rebalance(G: np.ndarray, H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Refactor G Hᵀ as (U sqrt(sigma), V sqrt(sigma)) from its thin SVD.

    The product is unchanged and ||G||^2 + ||H||^2 drops to its minimum over
    all factorizations of that product, twice its nuclear norm. Each column
    pair ends up with equal norms.
    """
    q_g, r_g = np.linalg.qr(G)
    q_h, r_h = np.linalg.qr(H)
    u, sigma, vt = np.linalg.svd(r_g @ r_h.T)
    root = np.sqrt(sigma)
    return (q_g @ u) * root, (q_h @ vt.T) * root


def _rank_deficient(gram: np.ndarray) -> bool:
    eigenvalues = np.linalg.eigvalsh(gram)
    top = float(eigenvalues[-1])
    return top <= 0.0 or float(eigenvalues[0]) <= RANK_DEFICIENCY_RTOL * top


class _HalfStep:
    """Solves ``A F Cᵀ C + (lam/2) F = Aᵀ T C`` style subproblems with CG."""

    def __init__(self, opts: ImcOptions, report: ImcFitReport) -> None:
        self.opts = opts
        self.report = report

    def solve(
        self,
        gram: np.ndarray,
        other_gram: np.ndarray,
        rhs: np.ndarray,
        start: np.ndarray,
        lam: float,
    ) -> np.ndarray:
        shape = start.shape
        size = start.size

        def matvec(v: np.ndarray) -> np.ndarray:
            block = np.asarray(v).reshape(shape)
            return (gram @ block @ other_gram + 0.5 * lam * block).ravel()

        operator = LinearOperator((size, size), matvec=matvec, dtype=np.float64)
        iterations = 0

        def count(_: np.ndarray) -> None:
            nonlocal iterations
            iterations += 1

        solution, info = cg(
            operator,
            rhs.ravel(),
            x0=start.ravel(),
            rtol=self.opts.cg_tol,
            atol=0.0,
            maxiter=self.opts.cg_max_iters,
            callback=count,
        )
        self.report.cg_iterations += iterations
        if info > 0:
            logger.debug("CG stopped at %d iterations before reaching tolerance", info)
        return np.asarray(solution).reshape(shape)


def fit_imc(
    I: AssociationMatrix,
    D: EmbeddingSet,
    S: EmbeddingSet,
    opts: ImcOptions | None = None,
    init_stream: Sequence[int] = (),
    report: ImcFitReport | None = None,
) -> FactorModel:
    """Fit G and H by alternating minimization.

    Args:
        I: Training positives; every other pair is a zero target.
        D: Drug feature vectors (rows of X).
        S: Disease feature vectors (rows of Y).
        opts: Fit settings; rank is capped at the feature dimension.
        init_stream: Extra random-substream keys (e.g. the fold index).
        report: Optional diagnostics object filled in place.

    Returns:
        The fitted FactorModel. Its ``lam`` is the value actually used.

    Raises:
        InsufficientDataError: No positive association.
        DomainValidationError: Dimension mismatch.
    """
    opts = opts or ImcOptions()
    report = report if report is not None else ImcFitReport()
    _check_dims(D, S)
    if I.dims != (len(D), len(S)):
        raise DomainValidationError(f"association dims {I.dims} != ({len(D)}, {len(S)})")
    if len(I) == 0:
        raise InsufficientDataError("cannot fit a model without positive associations")

    X, Y = D.vectors, S.vectors
    target = dense_view(I)
    n = D.dim
    rank = min(opts.rank, n)
    if rank < opts.rank:
        logger.info("Rank %d capped at feature dimension %d", opts.rank, n)

    lam = opts.lam
    xtx = X.T @ X
    yty = Y.T @ Y
    if lam == 0.0 and (_rank_deficient(xtx) or _rank_deficient(yty)):
        logger.warning("lambda=0 with rank-deficient features; falling back to %g", FALLBACK_LAMBDA)
        lam = FALLBACK_LAMBDA
        report.lambda_fallback = True

    rng = np.random.default_rng([opts.seed, INIT_STREAM, *init_stream])
    scale = 1.0 / math.sqrt(rank)
    G = rng.normal(0.0, scale, size=(n, rank))
    H = rng.normal(0.0, scale, size=(n, rank))
    xt_target = X.T @ target
    yt_target_t = Y.T @ target.T
    step = _HalfStep(opts, report)

    current = _objective(X, Y, target, G, H, lam)
    report.objective_trace = [current]
    for sweep in range(1, opts.max_sweeps + 1):
        B = Y @ H
        btb = B.T @ B
        if lam == 0.0 and _rank_deficient(btb):
            logger.warning("Ill-conditioned G subproblem; falling back to lambda=%g", FALLBACK_LAMBDA)
            lam = FALLBACK_LAMBDA
            report.lambda_fallback = True
            current = _objective(X, Y, target, G, H, lam)
        new_g = step.solve(xtx, btb, xt_target @ B, G, lam)

        A = X @ new_g
        ata = A.T @ A
        if lam == 0.0 and _rank_deficient(ata):
            logger.warning("Ill-conditioned H subproblem; falling back to lambda=%g", FALLBACK_LAMBDA)
            lam = FALLBACK_LAMBDA
            report.lambda_fallback = True
            current = _objective(X, Y, target, new_g, H, lam)
        new_h = step.solve(yty, ata, yt_target_t @ A, H, lam)

        value = _objective(X, Y, target, new_g, new_h, lam)
        report.sweeps = sweep
        if value > current:
            logger.debug("Sweep %d raised the objective (%.12g > %.12g); stopping", sweep, value, current)
            report.stop_reason = STOP_OBJECTIVE_INCREASE
            break
        G, H = _rebalance(new_g, new_h)
        value = _objective(X, Y, target, G, H, lam)
        report.objective_trace.append(value)
        logger.debug("Sweep %d objective %.12g", sweep, value)
        decrease = current - value
        current = value
        if decrease <= opts.sweep_tol * (value + decrease):
            report.converged = True
            report.stop_reason = STOP_CONVERGED
            break

    report.rank = rank
    report.lam_requested = opts.lam
    report.lam_used = lam
    logger.info(
        "Fitted IMC rank %d in %d sweeps (objective %.6g, %d CG iterations)",
        rank,
        report.sweeps,
        current,
        report.cg_iterations,
    )
    return FactorModel(G, H, lam, rank)


def score_all(
    model: FactorModel,
    D: EmbeddingSet,
    S: EmbeddingSet,
) -> ScoreMatrix:
    """Materialize every drug/disease score."""
    _check_dims(D, S, model.dim)
    return ScoreMatrix((D.vectors @ model.G) @ (S.vectors @ model.H).T)


def score_pair(model: FactorModel, drug: np.ndarray, disease: np.ndarray) -> float:
    """Score of one drug/disease feature pair."""
    d = np.asarray(drug, dtype=np.float64)
    s = np.asarray(disease, dtype=np.float64)
    if d.shape != (model.dim,) or s.shape != (model.dim,):
        raise DomainValidationError(f"feature vectors must have dimension {model.dim}")
    return float((d @ model.G) @ (s @ model.H))


def rank_drugs_for_disease(
    scores: ScoreMatrix,
    j: int,
    exclude: Collection[int] = (),
) -> list[tuple[int, float]]:
    """Drugs by descending score for disease ``j``; ties go to the lower index."""
    n_drugs, n_diseases = scores.shape
    if not 0 <= j < n_diseases:
        raise DomainValidationError(f"disease index {j} out of range")
    column = scores.column(j)
    excluded = set(exclude)
    ranked = sorted(
        (i for i in range(n_drugs) if i not in excluded),
        key=lambda i: (-column[i], i),
    )
    return [(i, float(column[i])) for i in ranked]


def model_to_dict(model: FactorModel, catalog: EntityCatalog) -> dict[str, Any]:
    """Self-describing JSON payload of a fitted model."""
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "rank": model.rank,
        "lambda": model.lam,
        "catalog_hash": catalog.fingerprint(),
        "G": model.G.tolist(),
        "H": model.H.tolist(),
    }


def model_from_dict(payload: dict[str, Any], catalog: EntityCatalog | None = None) -> FactorModel:
    """Rebuild a model, checking format, version and (optionally) the catalog hash."""
    if payload.get("format") != MODEL_FORMAT:
        raise DomainValidationError(f"not a {MODEL_FORMAT} file")
    if payload.get("version") != MODEL_VERSION:
        raise DomainValidationError(f"unsupported model version {payload.get('version')!r}")
    if catalog is not None and payload.get("catalog_hash") != catalog.fingerprint():
        raise DomainValidationError("model was fitted on a different catalog")
    try:
        return FactorModel(
            np.array(payload["G"], dtype=np.float64),
            np.array(payload["H"], dtype=np.float64),
            float(payload["lambda"]),
            int(payload["rank"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DomainValidationError(f"malformed model payload: {e}") from e
