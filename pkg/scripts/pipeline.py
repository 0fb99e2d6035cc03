#!/usr/bin/env python3
"""drugvec: drug repositioning from refined word vectors and inductive matrix completion.

Pipeline flow:
    word vectors + associations + similarity sources
        ↓
    [validate: parse inputs, align catalog]
        ↓
    [similarity: 3 drug + 2 disease similarity matrices]
        ↓
    [refine: cosine regression of raw vectors against the similarity stacks]
        ↓
    [fit: inductive matrix completion, Z = G Hᵀ]
        ↓
    [score | cv | case-study]

Every command reads one YAML config and writes its artifacts atomically under the
output directory (layout in config/paths.yaml).

Usage:
    drugvec synth --seed 42 --out out
    drugvec cv --config out/synthetic/pipeline.yaml --out out
    drugvec case-study DIS0001 --config out/synthetic/pipeline.yaml --out out
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import TYPE_CHECKING

from rich.console import Console
from rich.logging import RichHandler
from rich.progress import Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from scripts.utils import artifacts, workflow
from scripts.utils.errors import ConfigError, RepositioningError
from scripts.utils.evalkit import compare_feature_sets, leave_disease_out, run_cv, sweep_dimensions
from scripts.utils.imc import score_all
from scripts.utils.path_config import PathConfig
from scripts.utils.pipeline_config import PipelineConfig, load_config
from scripts.utils.reporters import AlignmentReporter, CaseStudyReporter, EvalReporter
from scripts.utils.synthetic import generate_from_params, write_synthetic

if TYPE_CHECKING:
    from collections.abc import Callable, Iterator

    from scripts.utils.evalkit import EvalReport
    from scripts.utils.model import EmbeddingSet, SimilarityStack

console = Console(stderr=True)
logger = logging.getLogger("drugvec")

COMMANDS = ("validate", "similarity", "refine", "fit", "score", "cv", "case-study", "synth", "sweep")


def configure_logging(verbose: bool, quiet: bool) -> None:
    """Route library logging through rich; --verbose is DEBUG, --quiet WARNING."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False, rich_tracebacks=True)],
        force=True,
    )


@contextmanager
def stage(description: str) -> Iterator[None]:
    """Show a transient spinner while one long-running step executes."""
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    ) as progress:
        progress.add_task(description, total=None)
        yield


def print_table(title: str, rows: list[tuple[str, str]]) -> None:
    """Print a two-column metric table."""
    table = Table(title=title)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    for metric, value in rows:
        table.add_row(metric, value)
    console.print(table)


# =============================================================================
# COMMANDS
# =============================================================================


def cmd_validate(config: PipelineConfig, paths: PathConfig, _args: argparse.Namespace) -> int:
    """Parse every input, align the catalog, write the alignment report."""
    dataset = workflow.load_dataset(config)
    reporter = AlignmentReporter(dataset.alignment)
    reporter.generate_all(paths.alignment_report, paths.alignment_json)
    report = dataset.alignment
    print_table(
        "Catalog Alignment",
        [
            ("Drugs", f"{report.drugs_before} → {report.drugs_after}"),
            ("Diseases", f"{report.diseases_before} → {report.diseases_after}"),
            ("Dropped", str(len(report.dropped))),
            ("Associations", str(len(dataset.associations))),
            ("Similarity measures", str(len(dataset.measures))),
        ],
    )
    return 0


def cmd_similarity(config: PipelineConfig, paths: PathConfig, _args: argparse.Namespace) -> int:
    """Build and persist every configured similarity matrix."""
    dataset = workflow.load_dataset(config)
    with stage("Building similarity matrices"):
        stacks = workflow.build_similarity_stacks(dataset, config)
    workflow.save_similarity_stacks(paths, dataset.catalog, stacks)
    print_table(
        "Similarity Matrices",
        [
            (f"{m.side.value}:{m.name}", f"{100.0 * m.coverage():.1f}% defined")
            for m in (*stacks[0], *stacks[1])
        ],
    )
    return 0


def _stacks(
    dataset: workflow.Dataset, config: PipelineConfig, paths: PathConfig
) -> tuple[SimilarityStack, SimilarityStack]:
    if (paths.similarity_dir / workflow.SIMILARITY_INDEX).is_file():
        return workflow.load_similarity_stacks(paths, dataset.catalog)
    logger.info("No persisted similarity matrices; building them")
    stacks = workflow.build_similarity_stacks(dataset, config)
    workflow.save_similarity_stacks(paths, dataset.catalog, stacks)
    return stacks


def cmd_refine(config: PipelineConfig, paths: PathConfig, _args: argparse.Namespace) -> int:
    """Refine raw vectors against the similarity stacks and persist the features."""
    dataset = workflow.load_dataset(config)
    stacks = _stacks(dataset, config, paths)
    with stage("Refining feature vectors"):
        drugs, diseases, reports = workflow.refine_features(dataset, stacks, config)
    workflow.save_features(paths, drugs, diseases)
    artifacts.write_json(paths.refine_json, {side: r.to_dict() for side, r in reports.items()})
    print_table(
        "Refinement",
        [
            (f"{side} objective", f"{r.objective_before:.4g} → {r.objective_after:.4g}")
            for side, r in reports.items()
        ]
        + [(f"{side} without similarity", str(len(r.all_masked))) for side, r in reports.items()],
    )
    return 0


def cmd_fit(config: PipelineConfig, paths: PathConfig, _args: argparse.Namespace) -> int:
    """Fit the IMC model on all known associations."""
    dataset = workflow.load_dataset(config)
    drugs, diseases = workflow.load_features(paths, dataset.catalog)
    with stage("Fitting IMC model"):
        model, report = workflow.fit_model(dataset, drugs, diseases, config)
    artifacts.save_model(paths.model, model, dataset.catalog)
    artifacts.write_json(paths.fit_json, report.to_dict())
    print_table(
        "IMC Fit",
        [
            ("Rank", str(report.rank)),
            ("Lambda", f"{report.lam_used:g}"),
            ("Sweeps", str(report.sweeps)),
            ("Final objective", f"{report.objective_trace[-1]:.6g}"),
        ],
    )
    return 0


def cmd_score(config: PipelineConfig, paths: PathConfig, _args: argparse.Namespace) -> int:
    """Score every drug/disease pair with the fitted model."""
    dataset = workflow.load_dataset(config)
    drugs, diseases = workflow.load_features(paths, dataset.catalog)
    model = artifacts.load_model(paths.model, dataset.catalog)
    scores = score_all(model, drugs, diseases)
    artifacts.write_scores(paths.scores, dataset.catalog, scores)
    console.print(f"[green]Scores written to {paths.scores}[/green]")
    return 0


def _features(
    dataset: workflow.Dataset,
    config: PipelineConfig,
) -> tuple[EmbeddingSet, EmbeddingSet]:
    with stage("Building similarities and refining features"):
        stacks = workflow.build_similarity_stacks(dataset, config)
        drugs, diseases, _ = workflow.refine_features(dataset, stacks, config)
    return drugs, diseases


def _write_eval_tables(paths: PathConfig, report: EvalReport) -> None:
    artifacts.write_csv(paths.roc, ("fpr", "tpr"), report.pooled_roc)
    artifacts.write_csv(
        paths.roc_folds,
        ("fold", "fpr", "tpr"),
        [(f.fold, fpr, tpr) for f in report.folds for fpr, tpr in f.roc],
    )
    artifacts.write_csv(
        paths.topk,
        ("threshold", "hits"),
        list(zip(report.thresholds, report.top_k, strict=True)),
    )


def cmd_cv(config: PipelineConfig, paths: PathConfig, _args: argparse.Namespace) -> int:
    """k-fold cross-validation with AUC, ROC and top-rank hits."""
    dataset = workflow.load_dataset(config)
    drugs, diseases = _features(dataset, config)
    settings = config.eval_settings
    opts = config.imc_options()
    k = int(settings["folds"])
    thresholds = [int(t) for t in settings["thresholds"]]
    with stage(f"Running {k}-fold cross-validation"):
        if settings["compare_raw"]:
            comparison = compare_feature_sets(
                dataset.associations,
                dataset.drug_vectors,
                dataset.disease_vectors,
                drugs,
                diseases,
                opts,
                k,
                config.seed,
                thresholds,
                config.threads,
            )
            report = comparison.refined
            report.comparison = comparison.to_dict()
        else:
            report = run_cv(
                dataset.associations,
                drugs,
                diseases,
                opts,
                k,
                config.seed,
                thresholds,
                config.threads,
            )
    report.config = config.echo()
    EvalReporter(report).generate_all(paths.eval_report, paths.eval_json)
    _write_eval_tables(paths, report)
    rows = [
        ("Mean AUC", f"{report.mean_auc:.4f}"),
        ("Pooled AUC", f"{report.pooled_auc:.4f}"),
    ]
    if report.comparison is not None:
        rows.append(("Raw-feature mean AUC", f"{report.comparison['raw_mean_auc']:.4f}"))
    rows.extend(
        (f"Hits @ {t}", str(c)) for t, c in zip(report.thresholds, report.top_k, strict=True)
    )
    print_table("Cross-Validation", rows)
    return 0


def cmd_case_study(config: PipelineConfig, paths: PathConfig, args: argparse.Namespace) -> int:
    """Leave-disease-out ranking for one disease."""
    dataset = workflow.load_dataset(config)
    drugs, diseases = _features(dataset, config)
    top_k = int(config.eval_settings["case_study_top_k"])
    with stage(f"Refitting without {args.disease_id}"):
        study = leave_disease_out(
            args.disease_id,
            dataset.catalog,
            dataset.associations,
            drugs,
            diseases,
            config.imc_options(),
            top_k=top_k,
            evidence=dataset.evidence,
            truth=dataset.planted_drugs(args.disease_id),
        )
    CaseStudyReporter(study).generate_all(paths.case_study_report, paths.case_study_json)
    header: tuple[str, ...] = ("rank", "drug_id", "score", "mean_score")
    if dataset.evidence is not None:
        header = (*header, "evidence")
    artifacts.write_csv(
        paths.case_study,
        header,
        [
            (row.rank, row.drug_id, row.score, row.mean_score)
            + (() if row.evidence is None else ("yes" if row.evidence else "no",))
            for row in study.rows
        ],
    )
    table = Table(title=f"Case Study: {study.disease_id}")
    for column in ("Rank", "Drug", "Score", "Mean score"):
        table.add_column(column)
    for row in study.rows[:top_k]:
        table.add_row(str(row.rank), row.drug_id, f"{row.score:.4f}", f"{row.mean_score:.4f}")
    console.print(table)
    console.print(
        f"Removed associations in top {top_k}: {study.removed_in_top_k} of {len(study.removed)}",
    )
    return 0


def cmd_synth(config: PipelineConfig, paths: PathConfig, _args: argparse.Namespace) -> int:
    """Generate a planted-block dataset in the ingest formats."""
    params = config.synth_params()
    dataset = generate_from_params(params, config.seed)
    config_path = write_synthetic(dataset, paths.synthetic_dir, config.seed, params)
    print_table(
        "Synthetic Dataset",
        [
            ("Drugs", str(params.n_drugs)),
            ("Diseases", str(params.n_diseases)),
            ("Dimension", str(params.dim)),
            ("Blocks", str(params.n_blocks)),
            ("Associations", str(len(dataset.associations))),
            ("Config", str(config_path)),
        ],
    )
    return 0


def cmd_sweep(config: PipelineConfig, paths: PathConfig, _args: argparse.Namespace) -> int:
    """Mean AUC of refined and raw features across synthetic vector dimensions."""
    settings = config.eval_settings
    with stage("Sweeping vector dimensions"):
        points = sweep_dimensions(
            [int(d) for d in settings["sweep_dims"]],
            config.synth_params(),
            config.refine_options(),
            config.imc_options(),
            int(settings["folds"]),
            config.seed,
            [int(t) for t in settings["thresholds"]],
            config.threads,
        )
    artifacts.write_csv(
        paths.dimension_sweep,
        ("dim", "mean_auc", "raw_mean_auc"),
        [(p.dim, p.mean_auc, p.raw_mean_auc) for p in points],
    )
    print_table(
        "Dimension Sweep",
        [(str(p.dim), f"{p.mean_auc:.4f} (raw {p.raw_mean_auc:.4f})") for p in points],
    )
    return 0


HANDLERS: dict[str, Callable[[PipelineConfig, PathConfig, argparse.Namespace], int]] = {
    "validate": cmd_validate,
    "similarity": cmd_similarity,
    "refine": cmd_refine,
    "fit": cmd_fit,
    "score": cmd_score,
    "cv": cmd_cv,
    "case-study": cmd_case_study,
    "synth": cmd_synth,
    "sweep": cmd_sweep,
}


# =============================================================================
# ENTRY POINT
# =============================================================================


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        msg = "seed must be an unsigned 64-bit integer"
        raise argparse.ArgumentTypeError(msg)
    return value


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per pipeline stage."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Pipeline YAML config")
    common.add_argument("--out", type=Path, help="Output directory (overrides output.directory)")
    common.add_argument("--seed", type=_u64, help="Seed (overrides the config)")
    common.add_argument("--threads", type=int, help="Worker cap; results do not depend on it")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override one config value (repeatable)",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings only")

    parser = argparse.ArgumentParser(
        prog="drugvec",
        description="Drug repositioning with refined word vectors and inductive matrix completion",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    drugvec synth --seed 42 --out out
    drugvec validate --config out/synthetic/pipeline.yaml --out out
    drugvec cv --config out/synthetic/pipeline.yaml --out out --threads 4
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        handler = HANDLERS[name]
        command = sub.add_parser(name, parents=[common], help=(handler.__doc__ or "").strip())
        if name == "case-study":
            command.add_argument("disease_id", help="Disease to study")
    return parser


def _machine_line(command: str, error: RepositioningError) -> str:
    message = " ".join(error.message.split()).replace("\\", "\\\\").replace('"', '\\"')
    return f'error code={error.code} command={command} message="{message}"'


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    started = time.perf_counter()

    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        config = load_config(
            args.config,
            overrides=args.overrides,
            seed=args.seed,
            threads=args.threads,
            output_dir=args.out,
        )
        paths = PathConfig(config.output_dir)
        console.print(f"[bold blue]drugvec {args.command}[/bold blue]  output: {paths.output_dir}")
        status = HANDLERS[args.command](config, paths, args)
    except RepositioningError as e:
        print(_machine_line(args.command, e), file=sys.stderr)
        console.print(f"[red]{args.command} failed:[/red] {e.message}")
        return 2 if isinstance(e, ConfigError) else 1

    console.print(
        f"[bold green]{args.command} complete[/bold green] in {time.perf_counter() - started:.1f}s",
    )
    return status


if __name__ == "__main__":
    sys.exit(main())
