"""Report figures rendered next to the delimited outputs.

Headless matplotlib only; every function writes a PNG and returns its
path. Figures are presentation artifacts: the JSON/CSV/TSV outputs stay
the source of truth.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import ExperimentResult


def _interp_roc(curve, grid: np.ndarray) -> np.ndarray:
    fpr = np.array([p[1] for p in curve] + [1.0])
    tpr = np.array([p[2] for p in curve] + [1.0])
    return np.interp(grid, fpr, tpr)


def render_roc_figure(result: ExperimentResult, path: str | Path) -> Path:
    """Per-fold ROC staircases plus the mean curve, one panel per model."""
    models = list(result.roc_curves)
    fig, axes = plt.subplots(1, len(models), figsize=(5.2 * len(models), 4.6), squeeze=False)
    grid = np.linspace(0.0, 1.0, 101)
    for ax, name in zip(axes[0], models):
        curves = result.roc_curves[name]
        interp = []
        for fold, curve in enumerate(curves):
            fpr = [p[1] for p in curve] + [1.0]
            tpr = [p[2] for p in curve] + [1.0]
            ax.plot(fpr, tpr, alpha=0.35, lw=1.0, label=f"fold {fold}")
            interp.append(_interp_roc(curve, grid))
        mean_tpr = np.mean(interp, axis=0)
        auc = result.reports[name].mean().get("auc", float("nan"))
        ax.plot(grid, mean_tpr, color="black", lw=2.0, label=f"mean (AUC {auc:.2f})")
        ax.plot([0, 1], [0, 1], ls="--", color="grey", lw=0.8)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_title(name.upper())
        ax.legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_prediction_figure(result: ExperimentResult, path: str | Path) -> Path:
    """Predicted vs. true follow-up scores, one panel per regressor."""
    models = [name for name in result.reports if result.reports[name].task == "predict"]
    fig, axes = plt.subplots(1, len(models), figsize=(4.8 * len(models), 4.6), squeeze=False)
    for ax, name in zip(axes[0], models):
        truth = np.array([row["y2_true"] for row in result.predictions])
        pred = np.array([row[f"pred_{name}"] for row in result.predictions])
        if name == "gp" and result.predictions and "gp_std" in result.predictions[0]:
            err = np.array([row["gp_std"] for row in result.predictions])
            ax.errorbar(truth, pred, yerr=err, fmt="o", ms=4, alpha=0.6, elinewidth=0.8)
        else:
            ax.plot(truth, pred, "o", ms=4, alpha=0.6)
        lim = (-1, 22)
        ax.plot(lim, lim, ls="--", color="grey", lw=0.8)
        ax.set_xlim(lim)
        ax.set_ylim(lim)
        mse = result.reports[name].mean().get("mse", float("nan"))
        ax.set_xlabel("observed follow-up score")
        ax.set_ylabel("predicted")
        ax.set_title(f"{name.upper()} (MSE {mse:.2f})")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_result_figures(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    if result.config.task == "classify":
        return [render_roc_figure(result, out_dir / "roc_curves.png")]
    return [render_prediction_figure(result, out_dir / "predictions.png")]
