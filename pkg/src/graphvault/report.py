"""Figure rendering and delimited output for experiment runs.

Every figure lands as a PNG next to the JSON/CSV it was drawn from, so a
run directory is self-contained: machine-readable data plus the plots.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .attack import METRICS, AttackReport  # noqa: E402
from .training import EvalReport  # noqa: E402

_COLORS = {"backbone": "tab:orange", "rectifier": "tab:green",
           "original": "tab:gray"}


def fig_silhouette(report: EvalReport, path: str | Path) -> Path:
    """Per-layer clustering quality of the three models."""
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    for name, scores in (("backbone", report.silhouette_backbone),
                         ("rectifier", report.silhouette_rectifier),
                         ("original", report.silhouette_original)):
        if scores:
            ax.plot(range(1, len(scores) + 1), scores, marker="o",
                    label=name, color=_COLORS[name])
    ax.set_xlabel("layer")
    ax.set_ylabel("silhouette score")
    ax.set_title(f"{report.family} {report.topology}: embedding clustering")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def fig_attack(reports: list[AttackReport], path: str | Path,
               metrics: tuple[str, ...] = METRICS) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 3.2))
    width = 0.8 / max(len(reports), 1)
    for j, rep in enumerate(reports):
        xs = [i + j * width for i in range(len(metrics))]
        ax.bar(xs, [rep.auc[m] for m in metrics], width=width,
               label=f"M_{rep.exposure}")
    ax.set_xticks([i + width * (len(reports) - 1) / 2 for i in range(len(metrics))])
    ax.set_xticklabels(metrics, rotation=20)
    ax.axhline(0.5, color="k", linewidth=0.8, linestyle=":")
    ax.set_ylabel("attack ROC-AUC")
    ax.set_ylim(0.0, 1.0)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def fig_run(run_report: dict, path: str | Path) -> Path:
    """Timing breakdown and vault memory categories for one inference run."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.5, 3.0))
    timing = run_report["timing"]
    names = ["backbone", "transfer", "vault"]
    vals = [timing["backbone_s"], timing["transfer_s"], timing["vault_s"]]
    ax1.bar(names, [v * 1e3 for v in vals], color=["tab:orange", "tab:blue", "tab:green"])
    ax1.set_ylabel("ms")
    ax1.set_title("inference time breakdown")
    mem = run_report["memory"]
    cats = list(mem["category_peaks"].keys())
    ax2.bar(range(len(cats)), [mem["category_peaks"][c] / 2**20 for c in cats],
            color="tab:green")
    ax2.set_xticks(range(len(cats)))
    ax2.set_xticklabels([c.replace(" ", "\n") for c in cats], fontsize=8)
    ax2.axhline(mem["peak_bytes"] / 2**20, color="k", linestyle="--",
                linewidth=0.8, label="overall peak")
    ax2.set_ylabel("MB")
    ax2.set_title("vault memory")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


ABLATION_FIELDS = ("sweep", "value", "p_bb", "p_rec", "delta_p")


def write_ablation_csv(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=ABLATION_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in ABLATION_FIELDS})
    return path


def read_ablation_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(r) for r in csv.DictReader(fh)]


def fig_ablation(rows: list[dict], path: str | Path) -> Path:
    """One panel per sweep kind: accuracy against the swept parameter."""
    sweeps = sorted({r["sweep"] for r in rows})
    if not sweeps:
        sweeps = ["(empty)"]
    fig, axes = plt.subplots(1, len(sweeps), figsize=(3.4 * len(sweeps), 3.0),
                             squeeze=False)
    for ax, sweep in zip(axes[0], sweeps):
        sub = [r for r in rows if r["sweep"] == sweep]
        xs = [float(r["value"]) for r in sub]
        ax.plot(xs, [float(r["p_bb"]) for r in sub], marker="s",
                label="backbone", color="tab:orange")
        ax.plot(xs, [float(r["p_rec"]) for r in sub], marker="o",
                label="rectifier", color="tab:green")
        ax.set_xlabel(sweep)
        ax.set_ylabel("accuracy (%)")
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_run_dir(run_dir: str | Path) -> list[Path]:
    """Re-render every figure a run directory's data supports."""
    run_dir = Path(run_dir)
    made = []
    eval_path = run_dir / "eval_report.json"
    if eval_path.exists():
        d = json.loads(eval_path.read_text())
        rep = EvalReport(
            family=d["family"], topology=d["topology"], p_org=d["p_org"],
            p_bb=d["p_bb"], p_rec=d["p_rec"], theta_bb=d["theta_bb"],
            theta_rec=d["theta_rec"],
            silhouette_backbone=d["silhouette"]["backbone"],
            silhouette_rectifier=d["silhouette"]["rectifier"],
            silhouette_original=d["silhouette"]["original"],
        )
        made.append(fig_silhouette(rep, run_dir / "silhouette.png"))
        (run_dir / "eval_report.txt").write_text(rep.to_table() + "\n")
    attack_path = run_dir / "attack_report.json"
    if attack_path.exists():
        entries = json.loads(attack_path.read_text())
        reports = [AttackReport(exposure=e["exposure"], auc=e["auc"],
                                n_pairs=e["n_pairs"], seed=e["seed"])
                   for e in entries]
        metrics = tuple(reports[0].auc.keys())
        made.append(fig_attack(reports, run_dir / "attack.png", metrics))
    ablation_path = run_dir / "ablation.csv"
    if ablation_path.exists():
        rows = read_ablation_csv(ablation_path)
        made.append(fig_ablation(rows, run_dir / "ablation.png"))
    run_path = run_dir / "run_report.json"
    if run_path.exists():
        made.append(fig_run(json.loads(run_path.read_text()),
                            run_dir / "run_breakdown.png"))
    return made
