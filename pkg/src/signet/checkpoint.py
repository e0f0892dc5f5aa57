"""Versioned little-endian binary checkpoints.

Layout::

    magic        8 bytes   b"SIGNETCK"
    version      uint32
    digest       32 bytes  sha256 of the config text
    header_len   uint32
    header       JSON (utf-8, sorted keys): kind, sizes, epochs, optimizer
                 scalars, config text, shape manifest
    payload      float64 arrays in manifest order: params, then Adam m, then v
    checksum     32 bytes  sha256 of everything above
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .errors import CheckpointError, ConfigError
from .model import build_model
from .optim import AdamState
from .training import ModelState

MAGIC = b"SIGNETCK"
VERSION = 1
_DTYPE = np.dtype("<f8")


def _manifest(arrays: dict[str, np.ndarray]) -> list[list]:
    return [[name, list(arrays[name].shape)] for name in sorted(arrays)]


def save_checkpoint(state: ModelState, path) -> Path:
    path = Path(path)
    config_text = state.config.to_text()
    opt = state.optimizer
    header = {
        "kind": state.kind,
        "n_chem": state.n_chem,
        "n_gene": state.n_gene,
        "epoch": state.epoch,
        "best_epoch": state.best_epoch,
        "best_val_loss": None if not np.isfinite(state.best_val_loss) else state.best_val_loss,
        "optimizer": {
            "lr": opt.lr,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "eps": opt.eps,
            "weight_decay": opt.weight_decay,
            "clip_norm": opt.clip_norm,
            "step": opt.step,
        },
        "config": config_text,
        "params": _manifest(state.params),
        "moments": _manifest(opt.m),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [
        MAGIC,
        struct.pack("<I", VERSION),
        hashlib.sha256(config_text.encode("utf-8")).digest(),
        struct.pack("<I", len(header_bytes)),
        header_bytes,
    ]
    for name in sorted(state.params):
        chunks.append(np.ascontiguousarray(state.params[name], dtype=_DTYPE).tobytes())
    for moments in (opt.m, opt.v):
        for name in sorted(opt.m):
            chunks.append(np.ascontiguousarray(moments[name], dtype=_DTYPE).tobytes())
    body = b"".join(chunks)
    path.write_bytes(body + hashlib.sha256(body).digest())
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def arrays(self, manifest) -> dict[str, np.ndarray]:
        out = {}
        for name, shape in manifest:
            count = int(np.prod(shape)) if shape else 1
            raw = self.take(count * 8)
            out[name] = np.frombuffer(raw, dtype=_DTYPE).astype(np.float64).reshape(shape)
        return out


def load_checkpoint(path, expected: TrainConfig | None = None) -> ModelState:
    """Read a checkpoint; with ``expected`` also verify its shape manifest."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 4 + 32 + 4 + 32:
        raise CheckpointError(f"{path}: checkpoint is truncated")
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a signet checkpoint")
    body, checksum = data[:-32], data[-32:]
    reader = _Reader(body)
    reader.take(len(MAGIC))
    (version,) = struct.unpack("<I", reader.take(4))
    if version != VERSION:
        raise CheckpointError(f"{path}: checkpoint format version {version}, this build reads {VERSION}")
    if hashlib.sha256(body).digest() != checksum:
        raise CheckpointError(f"{path}: checksum mismatch (truncated or corrupted file)")
    digest = reader.take(32)
    (header_len,) = struct.unpack("<I", reader.take(4))
    try:
        header = json.loads(reader.take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header ({exc})") from None
    config_text = header["config"]
    if hashlib.sha256(config_text.encode("utf-8")).digest() != digest:
        raise CheckpointError(f"{path}: config digest does not match embedded config")
    try:
        config = TrainConfig.from_text(config_text)
    except ConfigError as exc:
        raise CheckpointError(f"{path}: embedded config invalid: {exc}") from None

    params = reader.arrays(header["params"])
    m = reader.arrays(header["moments"])
    v = reader.arrays(header["moments"])
    if reader.pos != len(body):
        raise CheckpointError(f"{path}: {len(body) - reader.pos} trailing bytes")

    if expected is not None:
        want = build_model(expected, header["n_chem"], header["n_gene"]).param_shapes()
        got = {name: tuple(shape) for name, shape in header["params"]}
        if {k: tuple(s) for k, s in want.items()} != got:
            raise CheckpointError(
                f"{path}: parameter shapes do not match the configuration "
                f"(checkpoint {sorted(got.items())} vs config {sorted(want.items())})"
            )

    opt = header["optimizer"]
    optimizer = AdamState(
        lr=opt["lr"],
        beta1=opt["beta1"],
        beta2=opt["beta2"],
        eps=opt["eps"],
        weight_decay=opt["weight_decay"],
        clip_norm=opt["clip_norm"],
        step=opt["step"],
        m=m,
        v=v,
    )
    best = header["best_val_loss"]
    return ModelState(
        kind=header["kind"],
        config=config,
        n_chem=header["n_chem"],
        n_gene=header["n_gene"],
        params=params,
        optimizer=optimizer,
        epoch=header["epoch"],
        best_epoch=header["best_epoch"],
        best_val_loss=float("inf") if best is None else float(best),
    )
