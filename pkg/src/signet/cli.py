"""``signet`` command line: generate | train | eval | ablate.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric-health abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import shutil
import sys
import time
from pathlib import Path

from .ablation import GRIDS, build_grid, run_grid, write_grid_csv
from .checkpoint import load_checkpoint, save_checkpoint
from .config import MODEL_KINDS, TrainConfig
from .errors import ConfigError, NumericHealthError, SignetError
from .evaluation import evaluate, write_report
from .graph import HeteroGraph, generate_synthetic, ingest_tsv, split_edges, write_tsv
from .training import save_run_log, train

log = logging.getLogger("signet")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
CONFIG_FIELDS = [f.name for f in dataclasses.fields(TrainConfig)]


def _timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _prepare_dir(path: Path, force: bool) -> Path:
    if path.exists() and any(path.iterdir()):
        if not force:
            raise ConfigError(f"{path} exists and is not empty; pass --force to overwrite")
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_dataset(directory) -> HeteroGraph:
    directory = Path(directory)
    nodes, edges = directory / "nodes.tsv", directory / "edges.tsv"
    for p in (nodes, edges):
        if not p.is_file():
            raise FileNotFoundError(f"dataset file missing: {p}")
    return ingest_tsv(nodes, edges)


# --- config resolution ------------------------------------------------------


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training configuration (override --config)")
    for name in CONFIG_FIELDS:
        if name == "seed":
            continue
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        group.add_argument(*flags, dest=f"cfg_{name}", metavar="VALUE", default=None)
    group.add_argument("--cl", dest="cfg_cl_enabled", metavar="on|off", default=None, help="alias for --cl_enabled")


def resolve_config(args) -> TrainConfig:
    """Defaults, then the ``--config`` file, then explicit flags."""
    config = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    overrides = {name: getattr(args, f"cfg_{name}") for name in CONFIG_FIELDS if getattr(args, f"cfg_{name}", None) is not None}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    config = TrainConfig.from_mapping(overrides, base=config)
    return config.validate()


# --- commands ---------------------------------------------------------------


def cmd_generate(args) -> int:
    graph = generate_synthetic(
        args.chem,
        args.gene,
        args.density,
        args.polarity_signal,
        seed=0 if args.seed is None else args.seed,
        binding_fraction=args.binding_fraction,
        homo_density=args.homo_density,
    )
    out = _prepare_dir(Path(args.out), args.force)
    write_tsv(graph, out)
    meta = {
        "generator": graph.metadata["generator"],
        "chem_signs": {n: int(s) for n, s in zip(graph.chemicals, graph.metadata["chem_signs"])},
        "gene_signs": {n: int(s) for n, s in zip(graph.genes, graph.metadata["gene_signs"])},
        "summary": graph.summary(),
    }
    (out / "generator.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out} ({graph.summary()})")
    return EXIT_OK


def run_directory(out: Path, config: TrainConfig) -> Path:
    return out / config.digest()[:12]


def cmd_train(args) -> int:
    config = resolve_config(args)
    graph = _load_dataset(args.dataset)
    run_dir = _prepare_dir(run_directory(Path(args.out), config), args.force)
    artifacts = {name: name for name in ("config.txt", "checkpoint.bin", "train_log.csv")}
    manifest = {
        "digest": config.digest(),
        "seed": config.seed,
        "model": config.model,
        "cl_enabled": config.cl_enabled,
        "chem_subgraph": config.chem_subgraph,
        "gene_subgraph": config.gene_subgraph,
        "dataset": str(Path(args.dataset).resolve()),
        "artifacts": artifacts,
        "started": _timestamp(),
    }
    _write_manifest(run_dir, manifest)
    (run_dir / "config.txt").write_text(config.to_text(), encoding="utf-8")

    split = split_edges(graph, config.split_ratios, config.seed)
    for w in split.warnings:
        log.warning(w)
    result = train(graph, split, config)
    save_checkpoint(result.state, run_dir / "checkpoint.bin")
    save_run_log(result, run_dir)
    manifest.update(finished=_timestamp(), best_epoch=result.state.best_epoch, epochs_run=result.state.epoch)
    _write_manifest(run_dir, manifest)
    print(run_dir)
    return EXIT_OK


def _write_manifest(run_dir: Path, manifest: dict) -> None:
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_eval(args) -> int:
    run_dir = Path(args.run_dir)
    ckpt = run_dir / "checkpoint.bin"
    if not ckpt.is_file():
        raise FileNotFoundError(f"no checkpoint at {ckpt}; run 'signet train' first")
    config = TrainConfig.from_file(run_dir / "config.txt")
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("digest") != config.digest():
        raise ConfigError(f"{run_dir}: config.txt does not match the manifest digest")
    state = load_checkpoint(ckpt, expected=config)
    if state.config.digest() != config.digest():
        raise ConfigError(f"{ckpt}: checkpoint was trained under a different configuration than {run_dir / 'config.txt'}")

    graph = _load_dataset(args.dataset or manifest["dataset"])
    if (graph.n_chem, graph.n_gene) != (state.n_chem, state.n_gene):
        raise ConfigError(
            f"dataset has {graph.n_chem} chemicals / {graph.n_gene} genes, "
            f"checkpoint expects {state.n_chem} / {state.n_gene}"
        )
    split = split_edges(graph, config.split_ratios, config.seed)
    report = evaluate(state, graph, split, config, seed=args.seed)
    out = Path(args.out) if args.out else run_dir / "eval"
    _prepare_dir(out, force=True)
    write_report(report, out)
    for flag in report.flags:
        log.warning(flag)
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_ablate(args) -> int:
    base = resolve_config(args)
    models = [m.strip() for m in (args.models or "").split(",") if m.strip()]
    if args.models is not None and not models:
        raise ConfigError("--models is empty; give a comma-separated subset of " + ", ".join(MODEL_KINDS))
    models = models or [base.model]
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    arms = build_grid(args.grid, base, models)
    graph = _load_dataset(args.dataset)
    seeds = [base.seed + i for i in range(args.seeds)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"ablation_{args.grid}.csv"
    if target.exists() and not args.force:
        raise ConfigError(f"{target} exists; pass --force to overwrite")
    rows = run_grid(graph, arms, seeds)
    write_grid_csv(rows, target)
    print(target)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _common(parser: argparse.ArgumentParser, out_default: str) -> None:
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=out_default)
    parser.add_argument("--force", action="store_true", help="overwrite existing outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset")
    _common(gen, "data")
    gen.add_argument("--chem", type=int, required=True)
    gen.add_argument("--gene", type=int, required=True)
    gen.add_argument("--density", type=float, required=True)
    gen.add_argument("--polarity-signal", type=float, required=True)
    gen.add_argument("--binding-fraction", type=float, default=0.2)
    gen.add_argument("--homo-density", type=float, default=0.05)
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser("train", help="train a model on a dataset directory")
    _common(tr, "runs")
    tr.add_argument("dataset")
    _add_config_flags(tr)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a trained run directory")
    _common(ev, "")
    ev.add_argument("run_dir")
    ev.add_argument("--dataset", help="dataset directory (default: the one recorded in the manifest)")
    ev.set_defaults(func=cmd_eval)

    ab = sub.add_parser("ablate", help="run an ablation grid over seeds")
    _common(ab, "ablations")
    ab.add_argument("dataset")
    ab.add_argument("--grid", choices=GRIDS, required=True)
    ab.add_argument("--models", default=None, help="comma-separated model kinds")
    ab.add_argument("--seeds", type=int, default=3, help="number of seeds, counting up from --seed")
    _add_config_flags(ab)
    ab.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericHealthError as exc:
        print(f"numeric health abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SignetError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
