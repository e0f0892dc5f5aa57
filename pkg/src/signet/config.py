"""Experiment configuration: flat ``key=value`` files, validation, digests."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

MODEL_KINDS = ("rgcntd", "rgcn", "graphsage", "transe")
AUC_POLARITY_MODES = ("signed", "accuracy", "literal")


@dataclass(frozen=True)
class TrainConfig:
    model: str = "rgcntd"
    epochs: int = 50
    batch_size: int = 256
    hidden_dimensions: tuple[int, ...] = (32, 16)
    learning_rate: float = 1e-2
    regularization: float = 1e-2
    grad_norm: float = 1.0
    cl_enabled: bool = False
    cl_weight: float = 1.0
    cl_reduction: str = "mean"
    patience: int = 5
    seed: int = 0
    chem_subgraph: bool = False
    gene_subgraph: bool = False
    n_negatives: int = 1
    test_batch_size: int = 8192
    print_step: int = 10
    ap_k: int = 20
    cp_k: int = 500
    n_bases: int = 4
    n_factors: int = 4
    activation: str = "relu"
    transe_margin: float = 2.0
    sage_sample_size: int = 10
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    auc_polarity_mode: str = "signed"

    def replace(self, **changes) -> TrainConfig:
        return dataclasses.replace(self, **changes)

    def errors(self) -> list[str]:
        problems = []
        if self.model not in MODEL_KINDS:
            problems.append(f"model: {self.model!r} is not one of {', '.join(MODEL_KINDS)}")
        for name in ("epochs", "batch_size", "patience", "n_negatives", "test_batch_size",
                     "print_step", "ap_k", "cp_k", "n_bases", "n_factors", "sage_sample_size"):
            if getattr(self, name) < 1:
                problems.append(f"{name}: must be >= 1, got {getattr(self, name)}")
        if len(self.hidden_dimensions) < 2 or any(d < 1 for d in self.hidden_dimensions):
            problems.append(f"hidden_dimensions: need at least two positive widths, got {list(self.hidden_dimensions)}")
        for name in ("learning_rate", "grad_norm"):
            if not getattr(self, name) > 0:
                problems.append(f"{name}: must be > 0, got {getattr(self, name)}")
        for name in ("regularization", "cl_weight", "transe_margin"):
            if getattr(self, name) < 0:
                problems.append(f"{name}: must be >= 0, got {getattr(self, name)}")
        if self.cl_reduction not in ("mean", "sum"):
            problems.append(f"cl_reduction: must be 'mean' or 'sum', got {self.cl_reduction!r}")
        if self.activation not in ("relu", "sigmoid", "identity", "linear"):
            problems.append(f"activation: unknown activation {self.activation!r}")
        if self.auc_polarity_mode not in AUC_POLARITY_MODES:
            problems.append(f"auc_polarity_mode: must be one of {', '.join(AUC_POLARITY_MODES)}")
        r = self.split_ratios
        if len(r) != 3 or any(x <= 0 for x in r) or abs(sum(r) - 1.0) > 1e-9:
            problems.append(f"split_ratios: need three positive fractions summing to 1, got {list(r)}")
        return problems

    def validate(self) -> TrainConfig:
        problems = self.errors()
        if problems:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name}={_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    @classmethod
    def from_mapping(cls, values: dict[str, str], base: TrainConfig | None = None) -> TrainConfig:
        base = base or cls()
        known = {f.name: f for f in fields(cls)}
        changes = {}
        problems = []
        for key, raw in values.items():
            if key not in known:
                problems.append(f"{key}: unknown configuration key")
                continue
            try:
                changes[key] = _parse(raw, getattr(cls(), key))
            except ValueError as exc:
                problems.append(f"{key}: {exc}")
        if problems:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
        return dataclasses.replace(base, **changes)

    @classmethod
    def from_text(cls, text: str, base: TrainConfig | None = None) -> TrainConfig:
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
        return cls.from_mapping(values, base)

    @classmethod
    def from_file(cls, path, base: TrainConfig | None = None) -> TrainConfig:
        return cls.from_text(Path(path).read_text(encoding="utf-8"), base)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(raw, default):
    kind = type(default)
    if not isinstance(raw, str):
        if kind is tuple:
            return tuple(type(default[0])(x) for x in raw)
        return kind(raw)
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("true", "on", "yes", "1"):
            return True
        if low in ("false", "off", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is tuple:
        items = [x for x in raw.strip("[]()").replace(" ", "").split(",") if x]
        element = type(default[0]) if default else float
        return tuple(element(x) for x in items)
    return raw
