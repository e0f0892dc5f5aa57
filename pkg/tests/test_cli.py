import csv
import json
from pathlib import Path

import pytest

from signet.cli import main
from signet.graph import ingest_tsv

FAST = ["--epochs", "3", "--hidden_dimensions", "8,4", "--batch-size", "64"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "ds"
    assert main(["generate", "--chem", "40", "--gene", "60", "--density", "0.05",
                 "--polarity-signal", "0.9", "--seed", "1", "--out", str(out)]) == 0
    return out


def _only_run(out: Path) -> Path:
    runs = [p for p in out.iterdir() if p.is_dir()]
    assert len(runs) == 1
    return runs[0]


def test_generate_is_readable_and_repeatable(dataset, tmp_path):
    graph = ingest_tsv(dataset / "nodes.tsv", dataset / "edges.tsv")
    assert (graph.n_chem, graph.n_gene) == (40, 60) and graph.num_edges > 0
    meta = json.loads((dataset / "generator.json").read_text())
    assert set(meta["chem_signs"]) == set(graph.chemicals)
    again = tmp_path / "again"
    assert main(["generate", "--chem", "40", "--gene", "60", "--density", "0.05",
                 "--polarity-signal", "0.9", "--seed", "1", "--out", str(again)]) == 0
    for name in ("nodes.tsv", "edges.tsv", "generator.json"):
        assert (again / name).read_bytes() == (dataset / name).read_bytes()


def test_generate_refuses_non_empty_dir_and_bad_density(dataset, capsys):
    args = ["generate", "--chem", "4", "--gene", "4", "--density", "0.5", "--polarity-signal", "1", "--out", str(dataset)]
    assert main(args) == 2
    assert "--force" in capsys.readouterr().err
    assert main(["generate", "--chem", "4", "--gene", "4", "--density", "0", "--polarity-signal", "1",
                 "--out", str(dataset.parent / "zero")]) == 2


def test_train_then_eval(dataset, tmp_path):
    runs = tmp_path / "runs"
    assert main(["train", "--model", "rgcntd", "--cl", "on", "--seed", "3", "--out", str(runs), *FAST, str(dataset)]) == 0
    run = _only_run(runs)
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["cl_enabled"] is True and run.name == manifest["digest"][:12]
    assert {"checkpoint.bin", "train_log.csv", "config.txt"} <= {p.name for p in run.iterdir()}
    assert "finished" in manifest and "started" in manifest

    assert main(["eval", str(run)]) == 0
    rows = list(csv.reader((run / "eval" / "metrics.csv").open()))
    assert rows[0] == ["metric", "value"]
    assert [r[0] for r in rows[1:]] == ["MACRO_AUROC", "MICRO_AUROC", "MACRO_AUPRC", "MICRO_AUPRC",
                                        "AP@20", "AUC_polarity", "CP@500"]
    first = (run / "eval" / "metrics.csv").read_bytes()
    assert main(["eval", str(run), "--out", str(tmp_path / "second")]) == 0
    assert (tmp_path / "second" / "metrics.csv").read_bytes() == first
    header = (run / "eval" / "c_distribution.csv").read_text().splitlines()[0]
    assert header == "pair_id,C,C_prime,correct"


def test_transe_without_cl_logs_zero_constraint(dataset, tmp_path):
    runs = tmp_path / "runs"
    assert main(["train", "--model", "transe", "--cl", "off", "--out", str(runs), *FAST, str(dataset)]) == 0
    rows = list(csv.DictReader((_only_run(runs) / "train_log.csv").open()))
    cons = [float(r["loss"]) for r in rows if r["split"] == "constraint"]
    assert cons and all(v == 0.0 for v in cons)


def test_config_file_and_flag_precedence(dataset, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("model=transe\nepochs=2\nseed=5\n")
    runs = tmp_path / "runs"
    assert main(["train", "--config", str(cfg), "--epochs", "1", "--out", str(runs), str(dataset)]) == 0
    text = (_only_run(runs) / "config.txt").read_text()
    assert "model=transe" in text and "epochs=1" in text and "seed=5" in text


def test_unknown_model_lists_valid_values(dataset, tmp_path, capsys):
    assert main(["train", "--model", "bionet", "--out", str(tmp_path), str(dataset)]) == 2
    err = capsys.readouterr().err
    assert all(m in err for m in ("rgcntd", "rgcn", "graphsage", "transe"))


def test_eval_errors(dataset, tmp_path, capsys):
    assert main(["eval", str(tmp_path)]) == 3
    assert "checkpoint" in capsys.readouterr().err
    runs = tmp_path / "runs"
    main(["train", "--out", str(runs), *FAST, str(dataset)])
    run = _only_run(runs)
    (run / "config.txt").write_text((run / "config.txt").read_text().replace("epochs=3", "epochs=4"))
    assert main(["eval", str(run)]) == 2


def test_missing_dataset_is_data_error(tmp_path):
    assert main(["train", "--out", str(tmp_path / "r"), str(tmp_path / "nope")]) == 3


def test_ablate_grids(dataset, tmp_path):
    out = tmp_path / "abl"
    assert main(["ablate", "--grid", "cl", "--models", "rgcntd,transe", "--seeds", "1", "--out", str(out),
                 *FAST, str(dataset)]) == 0
    rows = list(csv.DictReader((out / "ablation_cl.csv").open()))
    assert [r["arm"] for r in rows] == ["rgcntd", "rgcntd-CL", "transe", "transe-CL"]
    assert main(["ablate", "--grid", "cl", "--models", "rgcntd", "--out", str(out), str(dataset)]) == 2
    assert main(["ablate", "--grid", "cl", "--models", " , ", "--out", str(tmp_path / "x"), str(dataset)]) == 2


def test_run_is_reproducible_with_force(dataset, tmp_path):
    runs = tmp_path / "runs"
    args = ["train", "--seed", "2", "--out", str(runs), *FAST, str(dataset)]
    assert main(args) == 0
    run = _only_run(runs)
    first = (run / "checkpoint.bin").read_bytes()
    assert main(args) == 2
    assert main([*args, "--force"]) == 0
    assert (run / "checkpoint.bin").read_bytes() == first
