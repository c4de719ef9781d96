"""Figure rendering for experiment outputs (PNG files next to the CSVs)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(dpi=140, bbox_inches="tight")


def _mean_curve(curves):
    return np.mean(np.asarray(curves, dtype=float), axis=0)


def save_training_curves(curves_by_seed: dict, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    for seed, curve in sorted(curves_by_seed.items()):
        ax.plot(curve, lw=0.8, alpha=0.45, label=f"seed {seed}")
    if curves_by_seed:
        ax.plot(_mean_curve(list(curves_by_seed.values())), lw=2.0, color="k", label="mean")
    ax.set_xlabel("epoch")
    ax.set_ylabel("training MSE (probability space)")
    ax.legend(fontsize=7, ncol=2)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_curve_comparison(labeled_curves: list[tuple[str, list]], path,
                          title: str = "") -> None:
    """One mean training curve per experiment variant."""
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    for label, curves in labeled_curves:
        ax.plot(_mean_curve(curves), lw=1.6, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training MSE (probability space)")
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_depth_figure(depth_rows: list[dict], fidelity_rows: list[dict], path) -> None:
    fig, (ax_depth, ax_fid) = plt.subplots(1, 2, figsize=(9.0, 3.8))
    variants = sorted({(r["encoding"], r["structure"]) for r in depth_rows})
    for encoding, structure in variants:
        pts = sorted((r["n_f"], r["depth"]) for r in depth_rows
                     if r["encoding"] == encoding and r["structure"] == structure)
        style = "-" if structure == "canonical" else "--"
        ax_depth.plot([p[0] for p in pts], [p[1] for p in pts], style, marker="o",
                      label=f"{encoding} / {structure}")
    ax_depth.set_yscale("log")
    ax_depth.set_xlabel("feature-register qubits")
    ax_depth.set_ylabel("circuit depth (basis gates)")
    ax_depth.legend(fontsize=7)
    if fidelity_rows:
        qs = [r["qubits"] for r in fidelity_rows]
        ax_fid.plot(qs, [r["mean_fidelity"] for r in fidelity_rows], marker="s", color="tab:blue")
        ax_fid.set_ylim(0.0, 1.02)
    ax_fid.set_xlabel("feature-register qubits")
    ax_fid.set_ylabel("mean encoder fidelity")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
