"""Ablation grids: subgraph on/off arms and CL on/off across models, median over seeds."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .errors import ConfigError
from .evaluation import evaluate, headline_names
from .graph import HeteroGraph, split_edges
from .training import train

log = logging.getLogger(__name__)

SUBGRAPH_ARMS = (
    ("Subgraph", True, True),
    ("Only Chemical", True, False),
    ("Only Gene", False, True),
    ("No Subgraph", False, False),
)
GRIDS = ("subgraph", "cl")


@dataclass(frozen=True)
class Arm:
    label: str
    config: TrainConfig


def subgraph_grid(base: TrainConfig, models: list[str]) -> list[Arm]:
    return [
        Arm(label if len(models) == 1 else f"{model}: {label}",
            base.replace(model=model, chem_subgraph=chem, gene_subgraph=gene))
        for model in models
        for label, chem, gene in SUBGRAPH_ARMS
    ]


def cl_grid(base: TrainConfig, models: list[str]) -> list[Arm]:
    return [
        Arm(f"{model}{'-CL' if cl else ''}", base.replace(model=model, cl_enabled=cl))
        for model in models
        for cl in (False, True)
    ]


def build_grid(grid: str, base: TrainConfig, models: list[str]) -> list[Arm]:
    if not models:
        raise ConfigError("at least one model is required")
    if grid == "subgraph":
        arms = subgraph_grid(base, models)
    elif grid == "cl":
        arms = cl_grid(base, models)
    else:
        raise ConfigError(f"unknown grid {grid!r}; valid values: {', '.join(GRIDS)}")
    problems = sorted({p for arm in arms for p in arm.config.errors()})
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
    return arms


def fit_and_evaluate(graph: HeteroGraph, config: TrainConfig) -> dict[str, float]:
    """One full run: split by ``config.seed``, train, evaluate on the test split."""
    split = split_edges(graph, config.split_ratios, config.seed)
    result = train(graph, split, config)
    return evaluate(result.state, graph, split, config).metrics


def _job(args) -> dict[str, float]:
    graph, config = args
    return fit_and_evaluate(graph, config)


def worker_count() -> int:
    raw = os.environ.get("SIGNET_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"SIGNET_THREADS must be an integer, got {raw!r}") from None


def run_grid(graph: HeteroGraph, arms: list[Arm], seeds: list[int], workers: int | None = None) -> list[dict]:
    """Median of every headline metric per arm over ``seeds``; rows in grid order."""
    jobs = [(graph, arm.config.replace(seed=s)) for arm in arms for s in seeds]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]

    rows = []
    for i, arm in enumerate(arms):
        chunk = results[i * len(seeds) : (i + 1) * len(seeds)]
        names = headline_names(arm.config)
        row = {
            "arm": arm.label,
            "model": arm.config.model,
            "cl_enabled": arm.config.cl_enabled,
            "chem_subgraph": arm.config.chem_subgraph,
            "gene_subgraph": arm.config.gene_subgraph,
            "n_seeds": len(seeds),
        }
        for name in names:
            row[name] = float(np.median([m[name] for m in chunk]))
        rows.append(row)
        log.info("arm %s done", arm.label)
    return rows


def write_grid_csv(rows: list[dict], path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = list(rows[0]) if rows else []
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else str(v).lower() if isinstance(v, bool) else v
                             for v in row.values()])
    return path
