"""Evaluation report rendering and ablation comparison.

Three layouts mirror the shapes used for grounding papers: a compact
Acc/mIoU row per model ("table1"), a per-pathology mIoU breakdown with a
sample-weighted Avg column ("table2"), and signed ablation deltas
("table3"). Each render emits both a delimited-values file (full float
precision, round-trips exactly) and an aligned text table (percent, one
decimal). Significance is marked with ``*`` at p < 0.05.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from medground.evaluation import EvalReport, SampleResult, significance_paired

TABLE2_COLUMNS: tuple[tuple[str, str], ...] = (
    ("Cardio.", "cardiomegaly"),
    ("Opacity", "lung opacity"),
    ("Edema", "edema"),
    ("Consol.", "consolidation"),
    ("Pneu.", "pneumonia"),
    ("Atelect.", "atelectasis"),
    ("Pneumo.", "pneumothorax"),
    ("Pl. Eff.", "pleural effusion"),
)

ABSENT = "n/a"
SIGNIFICANCE_ALPHA = 0.05
LAYOUTS = ("table1", "table2", "table3")


@dataclass
class ReportDocument:
    csv: str
    text: str


@dataclass
class AblationDelta:
    model_with: str
    model_without: str
    split_id: str
    delta_acc: float
    delta_miou: float
    per_category: dict[str, tuple[float, float]] = field(default_factory=dict)
    p_miou: float | None = None
    p_acc: float | None = None

    @property
    def significant_miou(self) -> bool:
        return self.p_miou is not None and self.p_miou < SIGNIFICANCE_ALPHA

    @property
    def significant_acc(self) -> bool:
        return self.p_acc is not None and self.p_acc < SIGNIFICANCE_ALPHA


def compare_ablation(
    report_with: EvalReport,
    report_without: EvalReport,
    results_with: list[SampleResult] | None = None,
    results_without: list[SampleResult] | None = None,
    n_permutations: int = 10_000,
    seed: int = 0,
) -> AblationDelta:
    """Signed Acc/mIoU deltas of ``with`` over ``without`` on one split."""
    if report_with.split_id != report_without.split_id:
        raise ValueError(
            f"split mismatch: {report_with.split_id!r} vs {report_without.split_id!r}"
        )
    per_category = {}
    for cat in sorted(set(report_with.per_category) & set(report_without.per_category)):
        a = report_with.per_category[cat]
        b = report_without.per_category[cat]
        per_category[cat] = (a.acc - b.acc, a.miou - b.miou)
    delta = AblationDelta(
        model_with=report_with.model_id,
        model_without=report_without.model_id,
        split_id=report_with.split_id,
        delta_acc=report_with.overall.acc - report_without.overall.acc,
        delta_miou=report_with.overall.miou - report_without.overall.miou,
        per_category=per_category,
    )
    if results_with is not None and results_without is not None:
        delta.p_miou, delta.p_acc = significance_paired(
            results_with, results_without, n_permutations=n_permutations, seed=seed
        )
    return delta


def _pct(value: float) -> str:
    return f"{100.0 * value:.1f}"


def _signed_pct(value: float) -> str:
    return f"{100.0 * value:+.1f}"


def _star(report: EvalReport, which: int) -> str:
    """'*' when the report is significant vs any baseline at alpha."""
    for p_pair in report.significance.values():
        if p_pair[which] < SIGNIFICANCE_ALPHA:
            return "*"
    return ""


def _text_table(header: list[str], rows: list[list[str]], footer: str = "") -> str:
    widths = [
        max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
        for i in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    if footer:
        lines.append(footer)
    return "\n".join(lines) + "\n"


def _csv_table(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(c) if isinstance(c, float) else c for c in row])
    return buf.getvalue()


def render_report(
    reports: list[EvalReport],
    layout: str,
) -> ReportDocument:
    """Render reports in one of the three fixed layouts."""
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    if not reports:
        raise ValueError("no reports to render")
    if layout == "table1":
        return _render_table1(reports)
    if layout == "table2":
        return _render_table2(reports)
    return _render_table3(reports)


def _render_table1(reports: list[EvalReport]) -> ReportDocument:
    header = ["model", "acc", "miou", "n"]
    csv_rows = [
        [r.model_id, float(r.overall.acc), float(r.overall.miou), r.overall.n]
        for r in reports
    ]
    text_rows = [
        [
            r.model_id,
            _pct(r.overall.acc) + _star(r, 1),
            _pct(r.overall.miou) + _star(r, 0),
            str(r.overall.n),
        ]
        for r in reports
    ]
    footer = f"* p < {SIGNIFICANCE_ALPHA} (paired) vs baseline"
    return ReportDocument(
        csv=_csv_table(header, csv_rows),
        text=_text_table(header, text_rows, footer),
    )


def _render_table2(reports: list[EvalReport]) -> ReportDocument:
    header = ["model"] + [h for h, _ in TABLE2_COLUMNS] + ["Avg"]
    csv_rows: list[list] = []
    text_rows: list[list[str]] = []
    for r in reports:
        csv_row: list = [r.model_id]
        text_row = [r.model_id]
        for _, cat in TABLE2_COLUMNS:
            metrics = r.per_category.get(cat)
            if metrics is None or metrics.n == 0:
                csv_row.append(ABSENT)
                text_row.append(ABSENT)
            else:
                csv_row.append(float(metrics.miou))
                text_row.append(_pct(metrics.miou))
        # Avg is the sample-weighted overall mIoU, not the mean of columns.
        csv_row.append(float(r.overall.miou))
        text_row.append(_pct(r.overall.miou) + _star(r, 0))
        csv_rows.append(csv_row)
        text_rows.append(text_row)
    footer = f"Avg = overall sample-mean mIoU; * p < {SIGNIFICANCE_ALPHA} vs baseline"
    return ReportDocument(
        csv=_csv_table(header, csv_rows),
        text=_text_table(header, text_rows, footer),
    )


def _render_table3(reports: list[EvalReport]) -> ReportDocument:
    if len(reports) % 2 != 0:
        raise ValueError("table3 layout expects (with, without) report pairs")
    header = ["model", "delta_acc", "delta_miou"]
    csv_rows: list[list] = []
    text_rows: list[list[str]] = []
    for i in range(0, len(reports), 2):
        with_r, without_r = reports[i], reports[i + 1]
        delta = compare_ablation(with_r, without_r)
        csv_rows.append([with_r.model_id, float(delta.delta_acc), float(delta.delta_miou)])
        text_rows.append(
            [
                with_r.model_id,
                _signed_pct(delta.delta_acc) + _star(with_r, 1),
                _signed_pct(delta.delta_miou) + _star(with_r, 0),
            ]
        )
    footer = f"* p < {SIGNIFICANCE_ALPHA} vs the model without the augmentation"
    return ReportDocument(
        csv=_csv_table(header, csv_rows),
        text=_text_table(header, text_rows, footer),
    )


def render_ablation(delta: AblationDelta) -> ReportDocument:
    header = ["model", "delta_acc", "delta_miou", "p_acc", "p_miou"]
    csv_rows = [
        [
            delta.model_with,
            float(delta.delta_acc),
            float(delta.delta_miou),
            float(delta.p_acc) if delta.p_acc is not None else ABSENT,
            float(delta.p_miou) if delta.p_miou is not None else ABSENT,
        ]
    ]
    text_rows = [
        [
            delta.model_with,
            _signed_pct(delta.delta_acc) + ("*" if delta.significant_acc else ""),
            _signed_pct(delta.delta_miou) + ("*" if delta.significant_miou else ""),
            f"{delta.p_acc:.4g}" if delta.p_acc is not None else ABSENT,
            f"{delta.p_miou:.4g}" if delta.p_miou is not None else ABSENT,
        ]
    ]
    return ReportDocument(
        csv=_csv_table(header, csv_rows),
        text=_text_table(header, text_rows),
    )


def parse_report_csv(text: str) -> list[dict[str, object]]:
    """Parse a rendered delimited file back into typed rows.

    Numeric cells round-trip exactly because the writer uses full-precision
    float reprs.
    """
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    header, body = rows[0], rows[1:]
    out: list[dict[str, object]] = []
    for row in body:
        parsed: dict[str, object] = {}
        for key, cell in zip(header, row):
            if cell == ABSENT:
                parsed[key] = None
            else:
                try:
                    value = float(cell)
                    parsed[key] = int(value) if key == "n" and value == int(value) else value
                except ValueError:
                    parsed[key] = cell
        out.append(parsed)
    return out
