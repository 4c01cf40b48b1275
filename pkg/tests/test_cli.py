import json

import numpy as np
import pytest

from graphvault.cli import main
from graphvault.container import read_container

from conftest import SBM_PARAMS


def make_dataset(tmp_path):
    path = tmp_path / "fixture.gvg"
    rc = main(["gen-synthetic", "--out", str(path),
               "--n-per-class", "30", "--classes", "3", "--p-in", "0.15",
               "--p-out", "0.01", "--feat-dim", "6", "--feat-noise", "1.0",
               "--seed", "11"])
    assert rc == 0
    return path


def write_config(tmp_path, dataset, out_dir, epochs=40, **extra):
    cfg = {
        "schema_version": 1,
        "dataset": str(dataset),
        "family": "M1",
        "topology": "parallel",
        "substitute": {"kind": "knn", "k": 2, "seed": 0},
        "train": {"epochs": epochs, "lr": 0.01, "weight_decay": 5e-4, "seed": 0},
        "rectifier_train": {"epochs": epochs, "lr": 0.01,
                            "weight_decay": 5e-4, "seed": 0},
        "out_dir": str(out_dir),
    }
    cfg.update(extra)
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    dataset = make_dataset(tmp)
    out = tmp / "run"
    cfg = write_config(tmp, dataset, out)
    assert main(["train", "--config", str(cfg)]) == 0
    return out


def test_gen_synthetic_valid_container(tmp_path):
    path = make_dataset(tmp_path)
    g = read_container(path)
    assert g.n_nodes == 90 and g.n_classes == 3


def test_train_artifacts(run_dir):
    for name in ("backbone.gvmd", "rectifier.gvmd", "original.gvmd", "mlp.gvmd",
                 "manifest.json", "eval_report.json", "eval_report.txt",
                 "silhouette.png", "experiment.json"):
        assert (run_dir / name).exists(), name
    rep = json.loads((run_dir / "eval_report.json").read_text())
    assert rep["p_rec"] > rep["p_bb"]


def test_train_reproducible_reports(tmp_path):
    dataset = make_dataset(tmp_path)
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        cfg = write_config(tmp_path, dataset, out, epochs=15)
        assert main(["train", "--config", str(cfg)]) == 0
        outs.append((out / "eval_report.json").read_bytes())
    assert outs[0] == outs[1]


def test_infer_matches_monolithic_and_writes_report(run_dir, capsys):
    assert main(["infer", "--run-dir", str(run_dir), "--query", "0,3,5"]) == 0
    out = capsys.readouterr().out
    labels = json.loads(out.splitlines()[0])["labels"]
    assert len(labels) == 3
    assert (run_dir / "run_report.json").exists()
    assert (run_dir / "run_breakdown.png").exists()
    rep = json.loads((run_dir / "run_report.json").read_text())
    assert rep["memory"]["peak_bytes"] < 96 * 2**20


def test_infer_empty_query(run_dir, capsys):
    assert main(["infer", "--run-dir", str(run_dir), "--query", ""]) == 0
    assert json.loads(capsys.readouterr().out.splitlines()[0])["labels"] == []


def test_infer_budget_exceeded_error_json(run_dir, capsys):
    rc = main(["infer", "--run-dir", str(run_dir), "--epc-budget-mb", "0.0001"])
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "BudgetExceededError"


def test_attack_three_exposures_and_determinism(run_dir):
    assert main(["attack", "--run-dir", str(run_dir), "--seed", "5"]) == 0
    first = (run_dir / "attack_report.json").read_bytes()
    reports = json.loads(first)
    assert [r["exposure"] for r in reports] == ["org", "gv", "base"]
    assert all(set(r["auc"]) == {"euclidean", "correlation", "cosine",
                                 "chebyshev", "braycurtis", "canberra"}
               for r in reports)
    assert main(["attack", "--run-dir", str(run_dir), "--seed", "5"]) == 0
    assert (run_dir / "attack_report.json").read_bytes() == first
    assert (run_dir / "attack.png").exists()


def test_attack_single_metric(run_dir):
    assert main(["attack", "--run-dir", str(run_dir), "--metrics", "cosine"]) == 0
    reports = json.loads((run_dir / "attack_report.json").read_text())
    assert all(set(r["auc"]) == {"cosine"} for r in reports)


def test_attack_unknown_metric_error(run_dir, capsys):
    assert main(["attack", "--run-dir", str(run_dir), "--metrics", "minkowski"]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "minkowski" in err["message"]


def test_ablate_empty_sweep_header_only(tmp_path, capsys):
    dataset = make_dataset(tmp_path)
    out = tmp_path / "ablate"
    cfg = write_config(tmp_path, dataset, out, epochs=5)
    rc = main(["ablate", "--config", str(cfg), "--sweep", "knn", "--values", ""])
    assert rc == 0
    lines = (out / "ablation.csv").read_text().splitlines()
    assert lines == ["sweep,value,p_bb,p_rec,delta_p"]


def test_ablate_rows_and_figure(tmp_path):
    dataset = make_dataset(tmp_path)
    out = tmp_path / "ablate2"
    cfg = write_config(tmp_path, dataset, out, epochs=10)
    rc = main(["ablate", "--config", str(cfg), "--sweep", "random",
               "--values", "0.5,1.0"])
    assert rc == 0
    lines = (out / "ablation.csv").read_text().splitlines()
    assert len(lines) == 3
    assert (out / "ablation.png").exists()


def test_ablate_parallel_jobs_match_serial(tmp_path):
    dataset = make_dataset(tmp_path)
    csvs = []
    for tag, jobs in (("serial", "1"), ("par", "2")):
        out = tmp_path / tag
        cfg = write_config(tmp_path, dataset, out, epochs=8)
        rc = main(["ablate", "--config", str(cfg), "--sweep", "knn",
                   "--values", "1,2", "--jobs", jobs])
        assert rc == 0
        csvs.append((out / "ablation.csv").read_bytes())
    assert csvs[0] == csvs[1]


def test_report_rerenders(run_dir, capsys):
    (run_dir / "silhouette.png").unlink()
    assert main(["report", "--run-dir", str(run_dir)]) == 0
    assert (run_dir / "silhouette.png").exists()


def test_missing_dataset_error_json(tmp_path, capsys):
    cfg = write_config(tmp_path, tmp_path / "nope.gvg", tmp_path / "x", epochs=1)
    rc = main(["train", "--config", str(cfg)])
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "GraphVaultError"
    assert "not found" in err["message"]


def test_malformed_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = main(["train", "--config", str(bad)])
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "line" in err["message"]


def test_synthetic_inline_config(tmp_path):
    out = tmp_path / "syn"
    cfg_path = tmp_path / "syn.json"
    cfg_path.write_text(json.dumps({
        "synthetic": dict(SBM_PARAMS, n_per_class=25),
        "topology": "series",
        "train": {"epochs": 10, "seed": 0},
        "rectifier_train": {"epochs": 10, "seed": 0},
        "out_dir": str(out),
    }))
    assert main(["train", "--config", str(cfg_path)]) == 0
    assert json.loads((out / "manifest.json").read_text())["topology"] == "series"
