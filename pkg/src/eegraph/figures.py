"""Render evaluation reports and training traces to figure files.

Used only by the CLI report paths; the numerical modules never import
matplotlib. Figures are drawn on explicit Figure objects (no pyplot state)
with pinned PNG metadata so repeated runs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

from matplotlib.figure import Figure

__all__ = ["save_recon_figure", "save_loss_figure"]

_PNG_METADATA = {"Software": "eegraph"}


def _save(fig, path, dpi=150):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=dpi, metadata=_PNG_METADATA)


def save_recon_figure(report, path):
    """R^2 and MSE curves over the number of missing channels, per method."""
    fig = Figure(figsize=(9, 3.6), constrained_layout=True)
    ax_r2, ax_mse = fig.subplots(1, 2)
    for method in report.methods:
        cells = [report.cell(method, m) for m in report.n_missing_list]
        xs = list(report.n_missing_list)
        ax_r2.errorbar(xs, [c.r2_mean for c in cells],
                       yerr=[c.r2_std for c in cells],
                       marker="o", capsize=3, label=method)
        ax_mse.errorbar(xs, [c.mse_mean for c in cells],
                        yerr=[c.mse_std for c in cells],
                        marker="o", capsize=3, label=method)
    ax_r2.set_xlabel("missing channels")
    ax_r2.set_ylabel("reconstruction $R^2$")
    ax_mse.set_xlabel("missing channels")
    ax_mse.set_ylabel("MSE")
    ax_r2.grid(True, alpha=0.3)
    ax_mse.grid(True, alpha=0.3)
    ax_r2.legend()
    _save(fig, path)


def save_loss_figure(trace, path):
    """Training loss and validation R^2 against the step index."""
    fig = Figure(figsize=(9, 3.6), constrained_layout=True)
    ax_loss, ax_val = fig.subplots(1, 2)
    steps = range(len(trace))
    ax_loss.plot(steps, trace.loss, lw=1.0)
    ax_loss.set_xlabel("step")
    ax_loss.set_ylabel("loss (1 - $R^2$)")
    ax_loss.grid(True, alpha=0.3)
    ax_val.plot(steps, trace.val_r2, lw=1.0, color="tab:green")
    ax_val.set_xlabel("step")
    ax_val.set_ylabel("validation $R^2$")
    ax_val.grid(True, alpha=0.3)
    _save(fig, path)
