"""Test-set evaluation, report files, and polarity-conflict exports."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as M
from .config import TrainConfig
from .errors import ConfigError
from .graph import EdgeSplit, HeteroGraph, Relation
from .sampling import sample_negatives
from .training import ModelState, predict

log = logging.getLogger(__name__)

HISTOGRAM_BINS = 20


@dataclass
class PolarRecords:
    """Both polarity probabilities for every polar test edge."""

    pair_ids: list[str]
    heads: np.ndarray
    tails: np.ndarray
    p_increase: np.ndarray
    p_decrease: np.ndarray
    is_increase: np.ndarray

    def __len__(self) -> int:
        return len(self.pair_ids)

    @property
    def c(self) -> np.ndarray:
        return M.polarity_degree(self.p_increase, self.p_decrease)

    @property
    def correct(self) -> np.ndarray:
        return M.polarity_correct(self.p_increase, self.p_decrease, self.is_increase)


@dataclass
class EvalReport:
    metrics: dict[str, float]
    per_relation: dict[str, dict[str, float]]
    polar: PolarRecords
    flags: list[str] = field(default_factory=list)
    n_records: int = 0

    def to_text(self) -> str:
        lines = ["signet evaluation report", "", "metric                value"]
        for name, value in self.metrics.items():
            lines.append(f"{name:<20}  {value:.6f}")
        lines += ["", "relation    n_pos  n_neg  auroc     auprc"]
        for rel, row in self.per_relation.items():
            auroc = "n/a" if row["auroc"] is None else f"{row['auroc']:.6f}"
            auprc = "n/a" if row["auprc"] is None else f"{row['auprc']:.6f}"
            lines.append(f"{rel:<10}  {row['n_pos']:>5}  {row['n_neg']:>5}  {auroc:<8}  {auprc}")
        lines += ["", f"records: {self.n_records}", f"polar pairs: {len(self.polar)}"]
        if self.flags:
            lines += ["", "flags:"] + [f"  - {f}" for f in self.flags]
        return "\n".join(lines) + "\n"


def headline_names(config: TrainConfig) -> list[str]:
    return [
        "MACRO_AUROC",
        "MICRO_AUROC",
        "MACRO_AUPRC",
        "MICRO_AUPRC",
        f"AP@{config.ap_k}",
        "AUC_polarity",
        f"CP@{config.cp_k}",
    ]


def evaluate(
    state: ModelState,
    graph: HeteroGraph,
    split: EdgeSplit,
    config: TrainConfig | None = None,
    seed: int | None = None,
) -> EvalReport:
    """Score test positives plus 1:1 filtered corruptions and compute every metric."""
    config = config or state.config
    seed = config.seed if seed is None else seed
    if len(split.test) == 0:
        raise ConfigError("test split is empty")
    flags: list[str] = []
    rng = np.random.default_rng(seed)
    labeled = sample_negatives(split.test, graph, 1, rng)
    if labeled.collisions:
        flags.append(f"{labeled.collisions} evaluation negatives could not avoid true edges")

    polar_rows = split.test[np.isin(split.test[:, 1], [int(r) for r in (Relation.INCREASE, Relation.DECREASE)])]
    probe = np.concatenate(
        [
            np.stack([polar_rows[:, 0], np.full(len(polar_rows), int(Relation.INCREASE)), polar_rows[:, 2]], axis=1),
            np.stack([polar_rows[:, 0], np.full(len(polar_rows), int(Relation.DECREASE)), polar_rows[:, 2]], axis=1),
        ]
    ).reshape(-1, 3)
    probs = predict(state, graph, split, np.concatenate([labeled.triplets, probe]))
    scores = probs[: len(labeled.triplets)]
    polar_probs = probs[len(labeled.triplets) :]
    n_polar = len(polar_rows)

    per_relation: dict[str, dict] = {}
    grouped = {}
    for rel in Relation:
        mask = labeled.triplets[:, 1] == int(rel)
        if not mask.any():
            continue
        s, y = scores[mask], labeled.labels[mask]
        grouped[rel.label] = (s, y)
        two_class = 0 < y.sum() < len(y)
        per_relation[rel.label] = {
            "n_pos": int(y.sum()),
            "n_neg": int(len(y) - y.sum()),
            "auroc": M.auroc(s, y) if two_class else None,
            "auprc": M.auprc(s, y) if two_class else None,
        }
    mm = M.macro_micro(grouped)
    for key in mm["excluded"]:
        flags.append(f"relation {key} excluded from macro averages (single class)")

    if len(labeled.triplets) < config.ap_k:
        flags.append(f"AP@{config.ap_k} computed over only {len(labeled.triplets)} records")
    polar = PolarRecords(
        pair_ids=[f"{graph.chemicals[h]}|{graph.genes[t]}" for h, t in zip(polar_rows[:, 0], polar_rows[:, 2])],
        heads=polar_rows[:, 0].copy(),
        tails=polar_rows[:, 2].copy(),
        p_increase=polar_probs[:n_polar],
        p_decrease=polar_probs[n_polar:],
        is_increase=polar_rows[:, 1] == int(Relation.INCREASE),
    )
    if n_polar == 0:
        raise ConfigError("test split has no Increase/Decrease edges; polarity metrics undefined")
    if n_polar < config.cp_k:
        flags.append(f"CP@{config.cp_k} clamped to {n_polar} polar pairs")

    names = headline_names(config)
    values = [
        mm["macro_auroc"],
        mm["micro_auroc"],
        mm["macro_auprc"],
        mm["micro_auprc"],
        M.average_precision_at_k(scores, labeled.labels, config.ap_k),
        M.auc_polarity(polar.p_increase, polar.p_decrease, polar.is_increase, config.auc_polarity_mode),
        M.cp_at_k(polar.p_increase, polar.p_decrease, polar.is_increase, config.cp_k),
    ]
    return EvalReport(dict(zip(names, values)), per_relation, polar, flags, len(labeled.triplets))


# --- file exports -----------------------------------------------------------


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _num(x: float) -> str:
    return repr(float(x))


def write_report(report: EvalReport, directory) -> list[Path]:
    """``report.txt``, ``metrics.csv`` and the polarity exports under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / "report.txt"]
    paths[0].write_text(report.to_text(), encoding="utf-8")
    paths.append(_write_csv(directory / "metrics.csv", ["metric", "value"],
                            [[k, _num(v)] for k, v in report.metrics.items()]))
    paths += export_paired_ranks(report.polar, directory)
    paths += export_c_distribution(report.polar, directory)
    return paths


def paired_log_ranks(polar: PolarRecords) -> tuple[np.ndarray, np.ndarray]:
    """log2 of descending ranks of Decrease and of Increase probabilities."""
    return np.log2(M.descending_ranks(polar.p_decrease)), np.log2(M.descending_ranks(polar.p_increase))


def export_paired_ranks(polar: PolarRecords, directory) -> list[Path]:
    directory = Path(directory)
    dec, inc = paired_log_ranks(polar)
    csv_path = _write_csv(
        directory / "paired_ranks.csv",
        ["pair_id", "log2_rank_decrease", "log2_rank_increase"],
        [[pid, _num(d), _num(i)] for pid, d, i in zip(polar.pair_ids, dec, inc)],
    )
    svg_path = directory / "paired_ranks.svg"
    svg_path.write_text(paired_rank_svg(dec, inc, polar.is_increase), encoding="utf-8")
    return [csv_path, svg_path]


def paired_rank_svg(log_dec: np.ndarray, log_inc: np.ndarray, is_increase: np.ndarray) -> str:
    """Decrease ranks on the left axis, Increase ranks on the right, one line per pair."""
    width, height, top, bottom, left, right = 420, 460, 40, 420, 90, 330
    span = max(float(np.max(log_dec, initial=0.0)), float(np.max(log_inc, initial=0.0)), 1.0)

    def y(v):
        return top + (bottom - top) * float(v) / span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="white"/>',
        f'<path d="M{left} {top} V{bottom} M{right} {top} V{bottom}" stroke="black" stroke-width="1.5" fill="none"/>',
        f'<text x="{left}" y="{top - 14}" text-anchor="middle" font-size="13">Decrease</text>',
        f'<text x="{right}" y="{top - 14}" text-anchor="middle" font-size="13">Increase</text>',
        f'<text x="{left - 8}" y="{top + 4}" text-anchor="end" font-size="10">0</text>',
        f'<text x="{left - 8}" y="{bottom + 4}" text-anchor="end" font-size="10">{span:.2f}</text>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="11">log2 rank</text>',
    ]
    for d, i, up in zip(log_dec, log_inc, is_increase):
        colour = "#c0392b" if up else "#2c7fb8"
        parts.append(
            f'<line x1="{left}" y1="{y(d):.3f}" x2="{right}" y2="{y(i):.3f}" '
            f'stroke="{colour}" stroke-opacity="0.5" stroke-width="1"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def c_histograms(polar: PolarRecords, bins: int = HISTOGRAM_BINS) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    edges = np.linspace(0.0, 1.0, bins + 1)
    c = polar.c
    counts_c, _ = np.histogram(c, bins=edges)
    counts_cp, _ = np.histogram(M.transform_c(c) if len(c) else c, bins=edges)
    return edges, counts_c, counts_cp


def export_c_distribution(polar: PolarRecords, directory) -> list[Path]:
    directory = Path(directory)
    c = polar.c
    c_prime = M.transform_c(c) if len(c) else c
    correct = polar.correct
    rows = [[pid, _num(a), _num(b), int(ok)] for pid, a, b, ok in zip(polar.pair_ids, c, c_prime, correct)]
    dist = _write_csv(directory / "c_distribution.csv", ["pair_id", "C", "C_prime", "correct"], rows)
    edges, counts_c, counts_cp = c_histograms(polar)
    hist = _write_csv(
        directory / "c_histogram.csv",
        ["bin_low", "bin_high", "count_C", "count_C_prime"],
        [[_num(lo), _num(hi), int(a), int(b)] for lo, hi, a, b in zip(edges[:-1], edges[1:], counts_c, counts_cp)],
    )
    svg = directory / "c_distribution.svg"
    svg.write_text(histogram_svg(edges, counts_c, counts_cp), encoding="utf-8")
    return [dist, hist, svg]


def histogram_svg(edges: np.ndarray, counts_c: np.ndarray, counts_cp: np.ndarray) -> str:
    """Side-by-side histograms of C (left) and its transform C' (right)."""
    width, height, panel, top, bottom = 640, 300, 280, 30, 260
    peak = max(int(np.max(counts_c, initial=0)), int(np.max(counts_cp, initial=0)), 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="white"/>',
    ]
    for offset, counts, title, colour in ((30, counts_c, "C", "#7f8c8d"), (340, counts_cp, "C prime", "#27ae60")):
        bar = panel / len(counts)
        parts.append(f'<text x="{offset + panel / 2}" y="{top - 10}" text-anchor="middle" font-size="13">{title}</text>')
        parts.append(
            f'<path d="M{offset} {bottom} H{offset + panel}" stroke="black" stroke-width="1" fill="none"/>'
        )
        for k, n in enumerate(counts):
            h = (bottom - top) * int(n) / peak
            parts.append(
                f'<rect x="{offset + k * bar:.3f}" y="{bottom - h:.3f}" width="{bar * 0.9:.3f}" '
                f'height="{h:.3f}" fill="{colour}"/>'
            )
        parts.append(f'<text x="{offset}" y="{bottom + 16}" font-size="10">0</text>')
        parts.append(f'<text x="{offset + panel}" y="{bottom + 16}" text-anchor="end" font-size="10">1</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
