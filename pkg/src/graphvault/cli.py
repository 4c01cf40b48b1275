"""Batch CLI: train, infer, attack, ablate, gen-synthetic, report.

Experiments are described by a single JSON config; common fields can be
overridden by flags. Re-running a command with the same config and seeds
reproduces byte-identical artifacts apart from wall-clock timings.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import report as rpt
from .attack import EXPOSURES, METRICS, TrainedSystem, attack_table, run_attack
from .container import read_container, write_container
from .errors import GraphVaultError
from .graph import Graph
from .models import load_partitioned, make_spec, read_model, save_partitioned, \
    write_model
from .partition import run_partitioned
from .substitute import SubstituteSpec
from .synth import sbm_generate
from .training import (TrainConfig, evaluate, export_embeddings, make_split,
                       train_backbone, train_original, train_partitioned)

DEFAULT_CONFIG = {
    "schema_version": 1,
    "family": "M1",
    "base_family": None,    # widths for family=mlp; defaults to the family
    "topology": "parallel",
    "substitute": {"kind": "knn", "k": 2, "seed": 0},
    "split": None,
    "train": {"epochs": 200, "lr": 0.01, "weight_decay": 5e-4, "seed": 0},
    "rectifier_train": {"epochs": 300, "lr": 0.01, "weight_decay": 5e-4, "seed": 0},
    "baselines": True,
    "export_embeddings": False,
}


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path:
        try:
            user = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise GraphVaultError(f"config {path}: line {e.lineno}: {e.msg}") from e
        if user.get("schema_version", 1) != 1:
            raise GraphVaultError(f"config schema_version {user['schema_version']} unsupported")
        cfg.update(user)
    for key, val in overrides.items():
        if val is None:
            continue
        if key in ("epochs", "seed"):
            cfg["train"] = dict(cfg["train"], **{key: val})
            if key == "seed":
                cfg["rectifier_train"] = dict(cfg["rectifier_train"], seed=val)
        else:
            cfg[key] = val
    return cfg


def load_graph(cfg: dict) -> Graph:
    if cfg.get("dataset"):
        path = Path(cfg["dataset"])
        if not path.exists():
            raise GraphVaultError(f"dataset file not found: {path}")
        graph = read_container(path)
    elif cfg.get("synthetic"):
        graph = sbm_generate(**cfg["synthetic"])
    else:
        raise GraphVaultError("config needs either 'dataset' or 'synthetic'")
    if cfg.get("split"):
        train, val, test = make_split(graph, cfg["split"]["per_class"],
                                      cfg["split"].get("seed", 0))
        graph = Graph(graph.features, graph.edges, graph.labels,
                      graph.n_classes, train, val, test)
    return graph


def _train_cfg(d: dict) -> TrainConfig:
    known = {k: d[k] for k in
             ("epochs", "lr", "weight_decay", "seed", "patience",
              "eval_every", "dropout") if k in d}
    return TrainConfig(**known)


def _spec_from_cfg(cfg: dict, graph: Graph, family: str | None = None):
    base = cfg.get("base_family") or \
        (cfg["family"] if cfg["family"] != "mlp" else "M1")
    return make_spec(family or cfg["family"], graph.n_features,
                     graph.n_classes, base)


def cmd_train(args) -> int:
    cfg = load_config(args.config, {
        "dataset": args.dataset, "family": args.family,
        "topology": args.topology, "out_dir": args.out,
        "epochs": args.epochs, "seed": args.seed,
    })
    out = Path(cfg.get("out_dir") or "run")
    out.mkdir(parents=True, exist_ok=True)
    graph = load_graph(cfg)
    spec = _spec_from_cfg(cfg, graph)
    sub_spec = SubstituteSpec.from_dict(cfg["substitute"])
    bb_cfg = _train_cfg(cfg["train"])
    rect_cfg = _train_cfg(cfg["rectifier_train"])

    pm = train_partitioned(graph, sub_spec, spec, cfg["topology"], bb_cfg, rect_cfg)
    save_partitioned(pm, out)
    original = train_original(graph, spec, bb_cfg)
    write_model(original, out / "original.gvmd")
    if cfg.get("baselines", True):
        mlp, _ = train_backbone(graph, sub_spec,
                                _spec_from_cfg(cfg, graph, "mlp"), bb_cfg)
        write_model(mlp, out / "mlp.gvmd")

    report = evaluate(pm, graph, original)
    (out / "eval_report.json").write_text(report.to_json() + "\n")
    (out / "eval_report.txt").write_text(report.to_table() + "\n")
    rpt.fig_silhouette(report, out / "silhouette.png")
    (out / "experiment.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    if cfg.get("export_embeddings"):
        export_embeddings(pm, graph, out / "embeddings")
    print(report.to_table())
    print(f"artifacts written to {out}")
    return 0


def cmd_infer(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = json.loads((run_dir / "experiment.json").read_text())
    if args.dataset:
        cfg["dataset"] = args.dataset
    graph = load_graph(cfg)
    pm = load_partitioned(run_dir, graph)
    if args.query == "all":
        query = np.arange(graph.n_nodes)
    elif args.query.strip() == "":
        query = np.zeros(0, dtype=np.int64)
    else:
        query = np.array([int(q) for q in args.query.split(",")], dtype=np.int64)
    rep = run_partitioned(pm, graph, query, epc_budget_mb=args.epc_budget_mb)
    (run_dir / "run_report.json").write_text(rep.to_json() + "\n")
    rpt.fig_run(rep.to_dict(), run_dir / "run_breakdown.png")
    print(json.dumps({"labels": rep.labels.tolist()}))
    print(f"peak vault memory: {rep.memory.peak / 2**20:.2f} MB; "
          f"transfers: {len(rep.channel.transfers)}", file=sys.stderr)
    return 0


def cmd_attack(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = json.loads((run_dir / "experiment.json").read_text())
    if args.dataset:
        cfg["dataset"] = args.dataset
    graph = load_graph(cfg)
    pm = load_partitioned(run_dir, graph)
    original = read_model(run_dir / "original.gvmd")
    mlp_path = run_dir / "mlp.gvmd"
    if not mlp_path.exists():
        raise GraphVaultError("attack needs the mlp baseline; re-train with baselines=true")
    mlp = read_model(mlp_path, kind="mlp")
    system = TrainedSystem(pm, original, mlp, graph)
    metrics = METRICS if args.metrics == "all" else tuple(args.metrics.split(","))
    for m in metrics:
        if m not in METRICS:
            raise GraphVaultError(f"unknown metric {m!r}; choose from {METRICS}")
    reports = [run_attack(system, e, seed=args.seed, metrics=metrics,
                          include_labels=args.include_labels)
               for e in EXPOSURES]
    payload = [r.to_dict() for r in reports]
    (run_dir / "attack_report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n")
    table = attack_table(reports, metrics)
    (run_dir / "attack_report.txt").write_text(table + "\n")
    rpt.fig_attack(reports, run_dir / "attack.png", metrics)
    print(table)
    return 0


SWEEP_DEFAULTS = {
    "knn": [1, 2, 3, 4, 5, 6, 7, 8],
    "tau": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
    "random": [0.1, 0.5, 1.0, 1.5, 2.0],
}


def _ablate_point(payload: dict) -> dict:
    cfg, sweep, value = payload["cfg"], payload["sweep"], payload["value"]
    graph = load_graph(cfg)
    spec = _spec_from_cfg(cfg, graph)
    seed = cfg["substitute"].get("seed", 0)
    if sweep == "knn":
        sub = SubstituteSpec("knn", k=int(value), seed=seed)
    elif sweep == "tau":
        sub = SubstituteSpec("cosine_threshold", tau=float(value),
                             density_match=True, seed=seed)
    else:
        sub = SubstituteSpec("random", edge_fraction=float(value), seed=seed)
    pm = train_partitioned(graph, sub, spec, cfg["topology"],
                           _train_cfg(cfg["train"]), _train_cfg(cfg["rectifier_train"]))
    from .models import backbone_forward, rectifier_forward
    from .training import accuracy
    bb = backbone_forward(pm.backbone, graph.features, pm.sub_adj)
    logits = rectifier_forward(pm.rectifier, pm.plan, bb, pm.real_adj)
    p_bb = accuracy(bb[-1], graph.labels, graph.test_mask)
    p_rec = accuracy(logits, graph.labels, graph.test_mask)
    return {"sweep": sweep, "value": value, "p_bb": round(p_bb, 2),
            "p_rec": round(p_rec, 2), "delta_p": round(p_rec - p_bb, 2)}


def cmd_ablate(args) -> int:
    cfg = load_config(args.config, {
        "dataset": args.dataset, "family": args.family,
        "topology": args.topology, "out_dir": args.out,
        "epochs": args.epochs, "seed": args.seed,
    })
    out = Path(cfg.get("out_dir") or "run")
    out.mkdir(parents=True, exist_ok=True)
    sweeps = list(SWEEP_DEFAULTS) if args.sweep == "all" else [args.sweep]
    points = []
    for sweep in sweeps:
        if args.values is not None:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        else:
            values = SWEEP_DEFAULTS[sweep]
        points.extend({"cfg": cfg, "sweep": sweep, "value": v} for v in values)
    if args.jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_ablate_point, points))
    else:
        rows = [_ablate_point(p) for p in points]
    csv_path = rpt.write_ablation_csv(rows, out / "ablation.csv")
    if rows:
        rpt.fig_ablation(rows, out / "ablation.png")
    print(f"{len(rows)} sweep points -> {csv_path}")
    return 0


def cmd_gen_synthetic(args) -> int:
    graph = sbm_generate(args.n_per_class, args.classes, args.p_in, args.p_out,
                         args.feat_dim, args.feat_noise, args.seed,
                         train_per_class=args.train_per_class)
    write_container(graph, args.out)
    print(f"wrote {args.out}: n={graph.n_nodes} directed_edges={graph.n_edges} "
          f"d={graph.n_features} C={graph.n_classes}")
    return 0


def cmd_report(args) -> int:
    made = rpt.render_run_dir(args.run_dir)
    if not made:
        raise GraphVaultError(f"no renderable artifacts in {args.run_dir}")
    for p in made:
        print(f"rendered {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphvault",
                                 description="partitioned GNN inference experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train backbone, rectifier, and baselines")
    t.add_argument("--config", help="experiment JSON")
    t.add_argument("--dataset", help="GVG container path (overrides config)")
    t.add_argument("--family", choices=["M1", "M2", "M3", "mlp"])
    t.add_argument("--topology", choices=["parallel", "cascaded", "series"])
    t.add_argument("--out", help="output directory")
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", help="partitioned inference on query nodes")
    i.add_argument("--run-dir", required=True)
    i.add_argument("--dataset")
    i.add_argument("--query", default="all", help="'all', '' or comma list of node ids")
    i.add_argument("--epc-budget-mb", type=float, default=96.0)
    i.set_defaults(func=cmd_infer)

    a = sub.add_parser("attack", help="link-stealing audit on a trained run")
    a.add_argument("--run-dir", required=True)
    a.add_argument("--dataset")
    a.add_argument("--metrics", default="all")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--include-labels", action="store_true",
                   help="let the gv attacker also see predicted labels")
    a.set_defaults(func=cmd_attack)

    b = sub.add_parser("ablate", help="substitute-graph hyperparameter sweeps")
    b.add_argument("--config")
    b.add_argument("--dataset")
    b.add_argument("--family", choices=["M1", "M2", "M3"])
    b.add_argument("--topology", choices=["parallel", "cascaded", "series"])
    b.add_argument("--sweep", choices=["knn", "tau", "random", "all"], default="all")
    b.add_argument("--values", help="comma list overriding sweep values ('' = none)")
    b.add_argument("--out")
    b.add_argument("--epochs", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_ablate)

    g = sub.add_parser("gen-synthetic", help="write an SBM fixture container")
    g.add_argument("--out", required=True)
    g.add_argument("--n-per-class", type=int, default=50)
    g.add_argument("--classes", type=int, default=4)
    g.add_argument("--p-in", type=float, default=0.10)
    g.add_argument("--p-out", type=float, default=0.01)
    g.add_argument("--feat-dim", type=int, default=8)
    g.add_argument("--feat-noise", type=float, default=1.2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--train-per-class", type=int, default=20)
    g.set_defaults(func=cmd_gen_synthetic)

    r = sub.add_parser("report", help="re-render tables and figures for a run")
    r.add_argument("--run-dir", required=True)
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GraphVaultError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
