"""Ranking tables and plots built from evaluation results."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bench import EvalResult


@dataclass(frozen=True)
class BestRow:
    dataset: str
    model: str
    f1: float
    f1_std: float
    accuracy: float


@dataclass
class RankingTable:
    """Best model per dataset for one (task, modality), ranked by F1."""

    task: str
    modality: str
    rows: list[BestRow]
    summary: dict = field(default_factory=dict)


def _summary(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {"MIN": float(v.min()), "MAX": float(v.max()), "AVG": float(v.mean()), "STD": float(v.std())}


def rank_results(results, protocol: str = "loso") -> list[RankingTable]:
    """Tables of best model per dataset, one per (task, modality).

    Control runs and other protocols are ignored. Ties in F1 go to the
    lexicographically first model name; datasets with equal best F1 are
    ordered by name.
    """
    cells: dict = {}
    for r in results:
        if r.protocol != protocol or r.metadata.get("control") or "train_fraction" in r.metadata:
            continue
        cells.setdefault((r.task, r.modality), {}).setdefault(r.dataset_label, []).append(r)
    tables = []
    for (task, modality), by_ds in sorted(cells.items()):
        rows = []
        for ds, rs in by_ds.items():
            best = min(rs, key=lambda r: (-r.mean_f1, r.model))
            rows.append(BestRow(ds, best.model, best.mean_f1, best.std_f1, best.mean_accuracy))
        rows.sort(key=lambda b: (-b.f1, b.dataset))
        tables.append(RankingTable(task, modality, rows, _summary([b.f1 for b in rows])))
    return tables


def format_ranking_table(table: RankingTable) -> str:
    lines = [f"### {table.task} / {table.modality}", "",
             "| Rank | Dataset | Best model | F1 | Accuracy |", "|---|---|---|---|---|"]
    for i, b in enumerate(table.rows, 1):
        lines.append(f"| {i} | {b.dataset} | {b.model} | {b.f1:.4f} ± {b.f1_std:.4f} | {b.accuracy:.4f} |")
    for k in ("MIN", "MAX", "AVG", "STD"):
        lines.append(f"| {k} | | | {table.summary[k]:.4f} | |")
    return "\n".join(lines) + "\n"


def format_best_model_table(tables: list[RankingTable], task: str) -> str:
    """Datasets as rows, modalities as columns, cells ``MODEL F1``."""
    sel = [t for t in tables if t.task == task]
    if not sel:
        return ""
    mods = [t.modality for t in sel]
    datasets = sorted({b.dataset for t in sel for b in t.rows})
    lookup = {(t.modality, b.dataset): b for t in sel for b in t.rows}
    lines = [f"### Best model per dataset: {task}", "",
             "| Dataset | " + " | ".join(mods) + " |", "|---" * (len(mods) + 1) + "|"]
    for ds in datasets:
        cells = []
        for m in mods:
            b = lookup.get((m, ds))
            cells.append(f"{b.model} {b.f1:.4f}" if b else "n/a")
        lines.append(f"| {ds} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def format_results_table(results) -> str:
    """One line per cell with mean ± std of accuracy and macro-F1."""
    lines = ["| Cell | Folds | Accuracy | Macro-F1 |", "|---|---|---|---|"]
    for r in sorted(results, key=lambda r: r.cell_id):
        lines.append(f"| {r.cell_id} | {len(r.folds)} | {r.mean_accuracy:.4f} ± {r.std_accuracy:.4f} "
                     f"| {r.mean_f1:.4f} ± {r.std_f1:.4f} |")
    return "\n".join(lines) + "\n"


def format_cohort_matrix(results) -> str:
    """Transfer results (train cohort -> test cohort) and LODO rows."""
    lines = ["| Modality | Task | Model | Train | Test | Macro-F1 |", "|---|---|---|---|---|---|"]
    for r in sorted(results, key=lambda r: r.cell_id):
        if r.protocol == "cross":
            train, test = r.metadata["train_cohort"], r.metadata["test_cohort"]
        elif r.protocol == "lodo":
            train, test = f"{r.metadata['cohort']} minus {r.metadata['held_out']}", r.metadata["held_out"]
        else:
            continue
        lines.append(f"| {r.modality} | {r.task} | {r.model} | {train} | {test} | {r.mean_f1:.4f} |")
    return "\n".join(lines) + "\n"


def plot_rankings(tables: list[RankingTable], out_dir: str | Path) -> list[Path]:
    """Bar chart (SVG) of best F1 per dataset for every (task, modality)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "affectbench"
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in tables:
        fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(t.rows) + 2), 3))
        names = [b.dataset for b in t.rows]
        ax.bar(names, [b.f1 for b in t.rows], yerr=[b.f1_std for b in t.rows], color="0.4")
        ax.set_ylim(0, 1)
        ax.set_ylabel("macro-F1")
        ax.set_title(f"{t.task} / {t.modality}")
        ax.tick_params(axis="x", rotation=45)
        fig.tight_layout()
        p = out_dir / f"ranking_{t.task}_{t.modality}.svg"
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(p)
    return paths
