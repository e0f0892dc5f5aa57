"""Joint training: cross-entropy + L2, optional Must-Link/Cannot-Link loss, Adam, early stopping."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import GradientTape, Tensor
from .config import TrainConfig
from .errors import NumericHealthError
from .graph import EdgeSplit, HeteroGraph
from .model import LinkModel, build_model
from .optim import AdamState, adam_step
from .sampling import ConstraintPair, build_constraint_pairs, constraint_arrays, sample_negatives

log = logging.getLogger(__name__)


def l2_penalty(params: Mapping[str, Tensor]) -> Tensor:
    """Sum of squared entries of every parameter (sorted-name order)."""
    total = Tensor(0.0)
    for name in sorted(params):
        total = total + ad.sum_squares(params[name])
    return total


def supervised_loss(
    scores: Tensor,
    labels,
    params: Mapping[str, Tensor],
    regularization: float,
    from_logits: bool = True,
) -> Tensor:
    """Mean binary cross-entropy plus ``regularization * ||theta||^2``."""
    ce = ad.bce_with_logits(scores, labels) if from_logits else ad.bce_loss(scores, labels)
    if regularization:
        ce = ce + ad.scale(l2_penalty(params), regularization)
    return ce


def constraint_penalty(probs: Tensor, must_link: np.ndarray, reduction: str = "mean") -> Tensor:
    """``(1 - S)^2`` on Must-Link probes plus ``S^2`` on Cannot-Link probes."""
    if probs.size == 0:
        return Tensor(0.0)
    target = np.asarray(must_link, dtype=np.float64)
    total = ad.sum_squares(ad.sub(probs, target))
    return ad.scale(total, 1.0 / probs.size) if reduction == "mean" else total


def constraint_loss(
    pairs: list[ConstraintPair],
    emb: Tensor,
    model: LinkModel,
    params: Mapping[str, Tensor],
    reduction: str = "mean",
) -> Tensor:
    if not pairs:
        return Tensor(0.0)
    probes, must = constraint_arrays(pairs)
    return constraint_penalty(ad.sigmoid(model.logits(emb, probes, params)), must, reduction)


def total_loss(
    model: LinkModel,
    graph: HeteroGraph,
    labeled,
    pairs: list[ConstraintPair],
    params: Mapping[str, Tensor],
    config: TrainConfig,
) -> tuple[Tensor, Tensor]:
    """Training objective for one batch and its constraint part.

    ``labeled`` holds positives plus sampled negatives; ``pairs`` is empty
    when the constraint term is off.
    """
    emb = model.embed(graph, params)
    logits = model.logits(emb, labeled.triplets, params)
    loss = supervised_loss(logits, labeled.labels, params, config.regularization)
    cons = Tensor(0.0)
    if config.cl_enabled and pairs:
        cons = constraint_loss(pairs, emb, model, params, config.cl_reduction)
        loss = loss + ad.scale(cons, config.cl_weight)
    return loss, cons


@dataclass
class ModelState:
    kind: str
    config: TrainConfig
    n_chem: int
    n_gene: int
    params: dict[str, np.ndarray]
    optimizer: AdamState
    epoch: int = 0
    best_epoch: int = 0
    best_val_loss: float = math.inf

    def build(self) -> LinkModel:
        return build_model(self.config, self.n_chem, self.n_gene)


@dataclass(frozen=True)
class LogRecord:
    epoch: int
    split: str  # train | constraint | val
    loss: float
    seconds: float


@dataclass
class TrainResult:
    state: ModelState
    log: list[LogRecord] = field(default_factory=list)
    stopped_early: bool = False

    def losses(self, split: str) -> list[float]:
        return [r.loss for r in self.log if r.split == split]


def write_log(records: list[LogRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "split", "loss", "seconds"])
        for r in records:
            writer.writerow([r.epoch, r.split, repr(r.loss), f"{r.seconds:.6f}"])


def validation_loss(model: LinkModel, graph: HeteroGraph, params: dict[str, np.ndarray], batch) -> float:
    """Cross-entropy (no regularization, no constraint term) on a fixed labeled batch."""
    probs = model.probabilities(graph, params, batch.triplets)
    return ad.bce_loss(Tensor(probs), batch.labels).item()


def _rngs(seed: int) -> dict[str, np.random.Generator]:
    names = ("init", "shuffle", "negatives", "validation", "neighbours")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


def train(graph: HeteroGraph, split: EdgeSplit, config: TrainConfig) -> TrainResult:
    """Train ``config.model`` on ``split.train``; message passing sees train edges only.

    Negatives are filtered against every edge of ``graph``. Validation loss
    drives early stopping and the best snapshot is restored at the end.
    """
    config.validate()
    rngs = _rngs(config.seed)
    train_graph = graph.with_triplets(split.train)
    model = build_model(config, graph.n_chem, graph.n_gene)
    params = model.init_params(rngs["init"])
    optimizer = AdamState(lr=config.learning_rate, clip_norm=config.grad_norm)
    mode = "with_cl" if config.cl_enabled else "without_cl"

    def pairs_for(batch) -> list[ConstraintPair]:
        return build_constraint_pairs(batch, mode) if config.cl_enabled else []
    val_batch = sample_negatives(split.val, graph, config.n_negatives, rngs["validation"]) if len(split.val) else None

    state = ModelState(config.model, config, graph.n_chem, graph.n_gene, params, optimizer)
    best_params = {k: v.copy() for k, v in params.items()}
    best_optimizer = optimizer.copy()
    records: list[LogRecord] = []
    bad_epochs = 0
    stopped_early = False
    start = time.perf_counter()
    n_train = len(split.train)

    for epoch in range(1, config.epochs + 1):
        model.prepare(train_graph, rngs["neighbours"])
        order = rngs["shuffle"].permutation(n_train)
        total_losses, cons_losses = [], []
        for batch_index, lo in enumerate(range(0, n_train, config.batch_size)):
            batch = split.train[order[lo : lo + config.batch_size]]
            labeled = sample_negatives(batch, graph, config.n_negatives, rngs["negatives"])
            tensors = {k: Tensor(v, requires_grad=True, name=k) for k, v in params.items()}
            try:
                with GradientTape() as tape:
                    loss, cons = total_loss(model, train_graph, labeled, pairs_for(batch), tensors, config)
                grads = tape.gradient(loss, tensors)
            except NumericHealthError as exc:
                raise NumericHealthError(f"epoch {epoch}, batch {batch_index}: {exc}") from exc
            adam_step(params, grads, optimizer)
            total_losses.append(loss.item())
            cons_losses.append(cons.item())

        elapsed = time.perf_counter() - start
        train_loss = float(np.mean(total_losses)) if total_losses else 0.0
        records.append(LogRecord(epoch, "train", train_loss, elapsed))
        records.append(LogRecord(epoch, "constraint", float(np.mean(cons_losses)) if cons_losses else 0.0, elapsed))
        state.epoch = epoch

        if val_batch is None:
            val = train_loss
        else:
            val = validation_loss(model, train_graph, params, val_batch)
            records.append(LogRecord(epoch, "val", val, elapsed))
        if epoch % config.print_step == 0 or epoch == 1:
            log.info("epoch %d train %.5f val %.5f (%.1fs)", epoch, train_loss, val, elapsed)

        if val < state.best_val_loss:
            state.best_val_loss = val
            state.best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
            best_optimizer = optimizer.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                stopped_early = True
                log.info("early stop at epoch %d; restoring epoch %d", epoch, state.best_epoch)
                break

    state.params = best_params
    state.optimizer = best_optimizer
    return TrainResult(state, records, stopped_early)


def initial_state(config: TrainConfig, n_chem: int, n_gene: int) -> ModelState:
    """Untrained state with the same initialization :func:`train` would use."""
    model = build_model(config, n_chem, n_gene)
    params = model.init_params(_rngs(config.seed)["init"])
    optimizer = AdamState(lr=config.learning_rate, clip_norm=config.grad_norm)
    return ModelState(config.model, config, n_chem, n_gene, params, optimizer)


def train_baseline(kind: str, graph: HeteroGraph, split: EdgeSplit, config: TrainConfig) -> TrainResult:
    """Same protocol as :func:`train` with ``config.model`` set to ``kind``."""
    return train(graph, split, config.replace(model=kind))


def predict(state: ModelState, graph: HeteroGraph, split: EdgeSplit, triplets) -> np.ndarray:
    """Probabilities from a trained state, propagating over the train edges."""
    model = state.build()
    return model.probabilities(graph.with_triplets(split.train), state.params, triplets)


def save_run_log(result: TrainResult, directory) -> Path:
    path = Path(directory) / "train_log.csv"
    write_log(result.log, path)
    return path
