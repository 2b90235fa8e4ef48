"""Comparison tables and figures from evaluation or statistics reports.

Every rendering writes the delimited table and the matplotlib figure side by
side in the output directory; stdout gets a compact table with one decimal.
"""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .teta import SPLITS, TetaReport  # noqa: E402

_METRICS = ("TETA", "LocA", "AssA", "ClsA")
_PNG_METADATA = {"Software": "motkit"}


class ReportSchemaError(ValueError):
    """Raised when input report JSONs do not share a usable schema."""


def classify_report(doc: dict) -> str:
    if "splits" in doc and "thresholds" in doc:
        return "evaluation"
    if "summary" in doc and "object_size" in doc:
        return "stats"
    raise ReportSchemaError("unrecognized report schema")


def load_reports(paths: list[Path]) -> tuple[str, list]:
    """Load report JSONs; all inputs must share one schema."""
    kinds = set()
    docs = []
    for path in paths:
        doc = json.loads(Path(path).read_text())
        kind = classify_report(doc)
        kinds.add(kind)
        docs.append((path, doc))
    if len(kinds) > 1:
        raise ReportSchemaError(
            "cannot combine evaluation and stats reports in one invocation"
        )
    kind = kinds.pop()
    if kind == "evaluation":
        reports = []
        for path, doc in docs:
            rep = TetaReport.from_json(json.dumps(doc))
            if not rep.label:
                rep.label = Path(path).stem
            reports.append(rep)
        return kind, reports
    return kind, [doc for _, doc in docs]


# ---------------------------------------------------------------------------
# evaluation comparison
# ---------------------------------------------------------------------------

def comparison_rows(reports: list[TetaReport]) -> list[dict]:
    """One row per method, metrics for every split, sorted by All-TETA."""
    rows = []
    for rep in reports:
        row: dict = {"method": rep.label}
        for split in SPLITS:
            teta, loca, assa, clsa = rep.scores(split)
            row[split] = {"TETA": teta, "LocA": loca, "AssA": assa, "ClsA": clsa}
        rows.append(row)
    rows.sort(key=lambda r: -r["all"]["TETA"])
    return rows


def write_comparison(reports: list[TetaReport], out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = comparison_rows(reports)

    csv_path = out_dir / "comparison.csv"
    header = ["method"] + [f"{split}_{m}" for split in SPLITS for m in _METRICS]
    lines = [",".join(header)]
    for row in rows:
        cells = [str(row["method"])]
        for split in SPLITS:
            cells.extend(str(round(row[split][m], 2)) for m in _METRICS)
        lines.append(",".join(cells))
    csv_path.write_text("\n".join(lines) + "\n")

    fig, axes = plt.subplots(1, len(SPLITS), figsize=(4.2 * len(SPLITS), 3.6), sharey=True)
    methods = [row["method"] for row in rows]
    x = range(len(_METRICS))
    width = 0.8 / max(len(methods), 1)
    for ax, split in zip(axes, SPLITS):
        for mi, row in enumerate(rows):
            vals = [row[split][m] for m in _METRICS]
            ax.bar([xi + mi * width for xi in x], vals, width=width, label=methods[mi])
        ax.set_xticks([xi + 0.4 - width / 2 for xi in x])
        ax.set_xticklabels(_METRICS)
        ax.set_title(split.capitalize())
        ax.set_ylim(0, 105)
    axes[0].set_ylabel("score")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    png_path = out_dir / "comparison.png"
    fig.savefig(png_path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
    return [csv_path, png_path]


def comparison_text(reports: list[TetaReport]) -> str:
    rows = comparison_rows(reports)
    widths = max([len(str(r["method"])) for r in rows] + [6])
    header = "method".ljust(widths) + "".join(
        f"  {split[:1].upper()}{split[1:]}-{m}".rjust(12) for split in SPLITS for m in _METRICS
    )
    lines = [header]
    for row in rows:
        cells = str(row["method"]).ljust(widths)
        for split in SPLITS:
            for m in _METRICS:
                cells += f"{row[split][m]:12.1f}"
        lines.append(cells)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# statistics histograms
# ---------------------------------------------------------------------------

def _write_histogram(name: str, counts: dict[str, int], out_dir: Path) -> list[Path]:
    total = sum(counts.values())
    csv_path = out_dir / f"{name}.csv"
    lines = ["class,count,fraction"]
    for cls, count in counts.items():
        frac = count / total if total else 0.0
        lines.append(f"{cls},{count},{round(frac, 4)}")
    csv_path.write_text("\n".join(lines) + "\n")

    fig, ax = plt.subplots(figsize=(4.0, 3.0))
    labels = list(counts)
    fractions = [counts[c] / total if total else 0.0 for c in labels]
    ax.bar(labels, fractions)
    ax.set_ylabel("fraction")
    ax.set_title(name.replace("_", " "))
    ax.set_ylim(0, 1.0)
    fig.tight_layout()
    png_path = out_dir / f"{name}.png"
    fig.savefig(png_path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
    return [csv_path, png_path]


def write_stats_figures(stats_doc: dict, out_dir: Path) -> list[Path]:
    """Histogram CSV+PNG pairs for size/shape/length and attribute ratios."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for name in ("object_size", "object_shape", "track_length"):
        written.extend(_write_histogram(name, stats_doc[name], out_dir))
    attr = stats_doc.get("attributes", {}).get("track_counts")
    if attr:
        written.extend(_write_histogram("attributes", attr, out_dir))
    return written
