"""Render verification outputs to summary tables and figures.

Reads the JSON artifacts written by the CLI into a run directory and emits
delimited tables (CSV) plus PNG figures rendered with the Agg backend, so
everything works headless.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def load_report(run_dir: str) -> dict:
    with open(os.path.join(run_dir, "report.json")) as fh:
        return json.load(fh)


def write_summary_csv(report: dict, path: str) -> None:
    """One row per statistical test in the report."""
    rows = []
    for t in report["tests"]:
        rows.append({
            "theorem": report["theorem"],
            "kind": "test",
            "functional": t.get("functional", ""),
            "statistic": t.get("ks", t.get("value", t.get("fraction", ""))),
            "threshold": t.get("crit", t.get("tolerance", t.get("threshold", ""))),
            "p_value": t.get("p", ""),
            "passed": t["pass"],
        })
    for ctl in report.get("controls", []):
        rows.append({
            "theorem": report["theorem"],
            "kind": ctl["kind"],
            "functional": ctl.get("what", ctl.get("perturbation", "")),
            "statistic": max((t["ks"] for t in ctl.get("tests", [])), default=""),
            "threshold": "",
            "p_value": "",
            "passed": ctl["rejected"],
        })
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def write_functional_samples_csv(report: dict, path: str) -> bool:
    """Raw across-environment functional samples, both sides, long format."""
    samples = report.get("samples", {})
    if "quenched" not in samples or "limit" not in samples:
        return False
    names = samples["functionals"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["side", "env_index", *names])
        for side in ("quenched", "limit"):
            for i, row in enumerate(samples[side]):
                writer.writerow([side, i, *row])
    return True


def write_distance_series_csv(report: dict, path: str) -> bool:
    """Probe distance sequences (one row per seed per schedule step)."""
    samples = report.get("samples", {})
    if "heavy_sequences" not in samples:
        return False
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "seed", "step", "ks_distance"])
        for i, seq in enumerate(samples["heavy_sequences"]):
            for j, d in enumerate(seq):
                writer.writerow(["heavy", i, j, d])
        for j, d in enumerate(samples.get("control_sequence", [])):
            writer.writerow(["control", 0, j, d])
    return True


def _ecdf_xy(values):
    x = np.sort(np.asarray(values, dtype=float))
    y = np.arange(1, len(x) + 1) / len(x)
    return x, y


def render_figures(report: dict, out_dir: str) -> list:
    """PNG figures for whichever sample blocks the report carries."""
    made = []
    samples = report.get("samples", {})
    theorem = report["theorem"]

    if "quenched" in samples and "limit" in samples:
        names = samples["functionals"]
        q = np.asarray(samples["quenched"])
        l = np.asarray(samples["limit"])
        fig, axes = plt.subplots(1, len(names), figsize=(3.2 * len(names), 3.0))
        axes = np.atleast_1d(axes)
        for j, (ax, name) in enumerate(zip(axes, names)):
            for arr, label in ((q[:, j], "quenched"), (l[:, j], "limit")):
                x, y = _ecdf_xy(arr)
                ax.step(x, y, where="post", label=label)
            ax.set_title(name, fontsize=9)
            ax.legend(fontsize=7)
        fig.suptitle(f"{theorem}: functional ECDFs, both sides")
        fig.tight_layout()
        p = os.path.join(out_dir, f"{theorem}_ecdf_pairs.png")
        fig.savefig(p, dpi=120)
        plt.close(fig)
        made.append(p)

    pairs = [(k1, k2) for k1, k2 in (("s_over_n", "upsilon"), ("nu_over_dn", "linv"))
             if k1 in samples and k2 in samples]
    if pairs:
        fig, axes = plt.subplots(1, len(pairs), figsize=(4.2 * len(pairs), 3.2))
        axes = np.atleast_1d(axes)
        for ax, (k1, k2) in zip(axes, pairs):
            for key, label in ((k1, "lattice"), (k2, "limit")):
                x, y = _ecdf_xy(samples[key])
                ax.step(x, y, where="post", label=label)
            ax.set_title(f"{k1} vs {k2}", fontsize=9)
            ax.legend(fontsize=8)
        fig.suptitle("joint convergence: lattice vs limit ECDFs")
        fig.tight_layout()
        p = os.path.join(out_dir, "joint_ecdf_pairs.png")
        fig.savefig(p, dpi=120)
        plt.close(fig)
        made.append(p)

    if "heavy_sequences" in samples:
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        for seq in samples["heavy_sequences"]:
            ax.plot(range(len(seq)), seq, color="C0", alpha=0.35)
        ctl = samples.get("control_sequence", [])
        if ctl:
            ax.plot(range(len(ctl)), ctl, color="C3", lw=2, label="light-tailed control")
        ax.axhline(0.05, color="k", ls="--", lw=1, label="floor")
        ax.set_xlabel("schedule step")
        ax.set_ylabel("KS distance")
        ax.legend(fontsize=8)
        fig.suptitle("probe: distance sequences per seed")
        fig.tight_layout()
        p = os.path.join(out_dir, "probe_distances.png")
        fig.savefig(p, dpi=120)
        plt.close(fig)
        made.append(p)

    if "ratios" in samples:
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        ratios = np.asarray(samples["ratios"])
        ax.boxplot([ratios[:, j] for j in range(ratios.shape[1])],
                   labels=[str(n) for n in samples["n_list"]])
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("left-crossing variance ratio")
        fig.suptitle("left variance / a_n^4 across environments")
        fig.tight_layout()
        p = os.path.join(out_dir, "leftvar_ratios.png")
        fig.savefig(p, dpi=120)
        plt.close(fig)
        made.append(p)

    return made


def render_run(run_dir: str) -> list:
    """Produce all tables and figures for one run directory; returns paths."""
    report = load_report(run_dir)
    made = []
    p = os.path.join(run_dir, "summary.csv")
    write_summary_csv(report, p)
    made.append(p)
    p = os.path.join(run_dir, "functional_samples.csv")
    if write_functional_samples_csv(report, p):
        made.append(p)
    p = os.path.join(run_dir, "distance_series.csv")
    if write_distance_series_csv(report, p):
        made.append(p)
    made.extend(render_figures(report, run_dir))
    return made
