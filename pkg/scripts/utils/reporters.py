"""Concrete reporters for catalog alignment, cross-validation and case studies."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

from .report_base import BaseReporter

if TYPE_CHECKING:
    from .evalkit import CaseStudy, EvalReport
    from .ingest import AlignmentReport


class AlignmentReporter(BaseReporter):
    """What catalog alignment kept, dropped and will mask."""

    def __init__(self, report: AlignmentReport) -> None:
        """Initialize with an alignment report."""
        super().__init__(
            title="Catalog Alignment Report",
            description="Entities retained after matching every input to an embedding.",
        )
        self.report = report

    def to_dict(self) -> dict[str, Any]:
        """Convert report to dictionary format."""
        return self.report.to_dict()

    def to_markdown(self) -> str:
        """Convert report to markdown format."""
        report = self.report
        md = self.markdown_report_header()
        md += self.markdown_section(
            "Counts",
            self.markdown_table(
                ["Side", "Before", "After"],
                [
                    ["drug", str(report.drugs_before), str(report.drugs_after)],
                    ["disease", str(report.diseases_before), str(report.diseases_after)],
                ],
            ),
        )
        if report.dropped:
            md += self.markdown_section(
                "Dropped Entities",
                self.markdown_table(
                    ["Side", "Identifier", "Reason"],
                    [[d.side.value, d.entity_id, d.reason] for d in report.dropped],
                ),
            )
        else:
            md += self.markdown_section("Dropped Entities", "None.")
        if report.coverage:
            md += self.markdown_section(
                "Input Coverage",
                self.markdown_table(
                    ["Input", "Side", "Covered", "Masked"],
                    [
                        [name, str(c["side"]), str(c["covered"]), str(len(c["masked"]))]
                        for name, c in report.coverage.items()
                    ],
                ),
            )
        if report.associations is not None:
            a = report.associations
            md += self.markdown_section(
                "Associations",
                f"- rows read: {a.rows_read}\n- positives: {a.positives}\n"
                f"- duplicates: {a.duplicates}\n- skipped (unknown entity): {a.skipped_unknown}\n",
            )
        return md


class EvalReporter(BaseReporter):
    """Cross-validation results: AUC per fold, pooled AUC and top-rank hits."""

    def __init__(self, report: EvalReport) -> None:
        """Initialize with an evaluation report."""
        super().__init__(
            title="Cross-Validation Report",
            description=f"{report.k}-fold cross-validation of the IMC model on "
            f"{report.features} features.",
        )
        self.report = report

    def to_dict(self) -> dict[str, Any]:
        """Convert report to dictionary format."""
        return self.report.to_dict()

    def to_markdown(self) -> str:
        """Convert report to markdown format."""
        report = self.report
        md = self.markdown_report_header()
        md += self.markdown_metadata_section(
            {
                "Seed": str(report.seed),
                "Drugs": str(report.n_drugs),
                "Diseases": str(report.n_diseases),
                "Positives": str(report.n_positives),
            },
        )
        md += self.markdown_section(
            "Summary",
            f"- mean AUC over folds: {self.format_score(report.mean_auc)}\n"
            f"- pooled AUC: {self.format_score(report.pooled_auc)}\n",
        )
        md += self.markdown_section(
            "Folds",
            self.markdown_table(
                ["Fold", "Train", "Held out", "Negatives", "AUC", "Sweeps"],
                [
                    [
                        str(f.fold),
                        str(f.n_train),
                        str(f.n_heldout),
                        str(f.n_negatives),
                        self.format_score(f.auc),
                        str(f.fit.sweeps),
                    ]
                    for f in report.folds
                ],
            ),
        )
        md += self.markdown_section(
            "Top-Rank Hits",
            self.markdown_table(
                ["Threshold", "Hits", "Share"],
                [
                    [str(t), str(c), self.format_score(c / report.n_positives, 3)]
                    for t, c in zip(report.thresholds, report.top_k, strict=True)
                ],
            ),
        )
        if report.comparison is not None:
            c = report.comparison
            md += self.markdown_section(
                "Raw vs Refined Features",
                self.markdown_table(
                    ["Features", "Mean AUC", "Pooled AUC"],
                    [
                        ["raw", self.format_score(c["raw_mean_auc"]), self.format_score(c["raw_pooled_auc"])],
                        [
                            "refined",
                            self.format_score(c["refined_mean_auc"]),
                            self.format_score(c["refined_pooled_auc"]),
                        ],
                    ],
                )
                + f"Relative improvement: {100.0 * c['relative_improvement']:+.1f}%\n",
            )
        md += self.markdown_section(
            "Protocol",
            "Negatives: all pairs unknown in the full association matrix. "
            "Features are refined once before the folds are split.",
        )
        return md


class CaseStudyReporter(BaseReporter):
    """Leave-disease-out ranking for one disease."""

    def __init__(self, study: CaseStudy) -> None:
        """Initialize with a case study."""
        super().__init__(
            title=f"Case Study: {study.disease_id}",
            description="Drugs ranked after removing every known association of the disease.",
        )
        self.study = study

    def to_dict(self) -> dict[str, Any]:
        """Convert report to dictionary format."""
        return self.study.to_dict()

    def to_markdown(self) -> str:
        """Convert report to markdown format."""
        study = self.study
        with_evidence = any(row.evidence is not None for row in study.rows)
        headers = ["Rank", "Drug", "Score", "Mean score"]
        if with_evidence:
            headers.append("Evidence")
        rows = []
        for row in study.rows[: study.top_k]:
            cells = [
                str(row.rank),
                row.drug_id,
                self.format_score(row.score),
                self.format_score(row.mean_score),
            ]
            if with_evidence:
                cells.append("yes" if row.evidence else "no")
            rows.append(cells)

        md = self.markdown_report_header()
        md += self.markdown_section(f"Top {study.top_k}", self.markdown_table(headers, rows))
        summary = (
            f"- removed associations: {len(study.removed)}\n"
            f"- removed drugs in top {study.top_k}: {study.removed_in_top_k}\n"
            f"- recall: {self.format_score(study.removed_recall, 3)}\n"
        )
        if study.planted_in_top_k is not None:
            summary += (
                f"- planted drugs in top {study.top_k}: {study.planted_in_top_k}\n"
                f"- planted recall: {self.format_score(study.planted_recall, 3)}\n"
            )
        md += self.markdown_section("Recovery", summary)
        return md
