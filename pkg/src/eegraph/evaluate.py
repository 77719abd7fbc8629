"""Masked-reconstruction evaluation: hide channels, reconstruct, score.

For each repetition and each mask size, a fresh seeded mask is drawn
(uniform, without replacement) and shared across all methods, so every cell
compares methods on identical observations. Scores are the pooled R^2 over
all masked entries plus the mean squared error, aggregated as mean and
standard deviation over repetitions. A method failure marks its cell, it
does not abort the run.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import build_laplacian
from .interpolation import MaskSpec, interpolate, spherical_spline_interpolate
from .learning import r_squared

__all__ = [
    "InterpolationMethod",
    "graph_method",
    "spherical_method",
    "mean_method",
    "ReconCell",
    "ReconReport",
    "eval_masked_reconstruction",
    "write_recon_csv",
]


@dataclass(frozen=True)
class InterpolationMethod:
    """A named reconstructor: (observed (o, k) values, mask) -> full (n, k)."""

    name: str
    reconstruct: object


def graph_method(name, graph):
    """Closed-form variation-minimizing interpolation on a fixed graph."""
    lap = build_laplacian(graph)

    def _run(observed, mask):
        return interpolate(lap, observed, mask)

    return InterpolationMethod(name, _run)


def spherical_method(montage, name="spherical", order_m=4, n_terms=50, ridge=1e-5):
    """Spherical-spline baseline over the montage's positions."""

    def _run(observed, mask):
        return spherical_spline_interpolate(
            montage, observed, mask, order_m=order_m, n_terms=n_terms, ridge=ridge
        )

    return InterpolationMethod(name, _run)


def mean_method(name="mean"):
    """Baseline predicting the pooled mean of all observed values everywhere.

    Scores an R^2 of zero up to sampling error, which anchors the metric.
    """

    def _run(observed, mask):
        out = np.empty((len(mask.montage), observed.shape[1]))
        out[list(mask.observed)] = observed
        out[list(mask.missing)] = observed.mean()
        return out

    return InterpolationMethod(name, _run)


@dataclass(frozen=True)
class ReconCell:
    """Aggregated scores for one (method, mask size) cell."""

    method: str
    n_missing: int
    r2_mean: float
    r2_std: float
    mse_mean: float
    mse_std: float
    repetitions: int


@dataclass(frozen=True, eq=False)
class ReconReport:
    """All cells of a masked-reconstruction run, plus its seed."""

    cells: tuple
    methods: tuple
    n_missing_list: tuple
    seed: int

    def cell(self, method, n_missing):
        for c in self.cells:
            if c.method == method and c.n_missing == n_missing:
                return c
        raise KeyError(f"no cell for ({method!r}, {n_missing})")


def eval_masked_reconstruction(data, methods, n_missing_list, repetitions, seed,
                               montage):
    """Score reconstruction methods under random channel masks.

    Parameters
    ----------
    data : EpochSet
        Evaluation signals; channel names must equal ``montage.names`` in
        order (build the montage/graphs restricted to the dataset first).
    methods : sequence of InterpolationMethod
    n_missing_list : sequence of int
        Mask sizes; each must be below the channel count.
    repetitions : int
    seed : int
    montage : Montage

    Returns
    -------
    ReconReport
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if tuple(data.channel_names) != tuple(montage.names):
        raise ValueError("data channels must match the montage names in order")
    n = data.n_channels
    n_missing_list = [int(m) for m in n_missing_list]
    if not n_missing_list or min(n_missing_list) < 1 or max(n_missing_list) >= n:
        raise ValueError(f"mask sizes must lie in [1, {n - 1}]")
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ValueError("method names must be unique")

    flat = data.data.transpose(1, 0, 2).reshape(n, -1)
    rng = np.random.default_rng(seed)
    scores = {(nm, m): ([], []) for nm in names for m in n_missing_list}
    for _ in range(repetitions):
        for n_missing in n_missing_list:
            mask = MaskSpec.from_missing_indices(
                montage, rng.choice(n, size=n_missing, replace=False)
            )
            observed = flat[list(mask.observed)]
            truth = flat[list(mask.missing)]
            for method in methods:
                try:
                    full = method.reconstruct(observed, mask)
                    pred = np.asarray(full)[list(mask.missing)]
                    r2 = r_squared(pred.ravel(), truth.ravel())
                    mse = float(np.mean((pred - truth) ** 2))
                except Exception:
                    continue
                r2s, mses = scores[(method.name, n_missing)]
                r2s.append(r2)
                mses.append(mse)

    cells = []
    for method in methods:
        for n_missing in n_missing_list:
            r2s, mses = scores[(method.name, n_missing)]
            if r2s:
                cells.append(
                    ReconCell(
                        method.name,
                        n_missing,
                        float(np.mean(r2s)),
                        float(np.std(r2s)),
                        float(np.mean(mses)),
                        float(np.std(mses)),
                        len(r2s),
                    )
                )
            else:
                cells.append(
                    ReconCell(method.name, n_missing, float("nan"), float("nan"),
                              float("nan"), float("nan"), 0)
                )
    return ReconReport(tuple(cells), tuple(names), tuple(n_missing_list), int(seed))


def write_recon_csv(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "n_missing", "r2_mean", "r2_std", "mse_mean", "mse_std",
             "repetitions", "seed"]
        )
        for c in report.cells:
            writer.writerow(
                [c.method, c.n_missing, repr(c.r2_mean), repr(c.r2_std),
                 repr(c.mse_mean), repr(c.mse_std), c.repetitions, report.seed]
            )
