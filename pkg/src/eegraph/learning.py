"""Learning a graph by gradient descent on masked-reconstruction loss.

The adjacency is reparametrized through a softplus so that descent on the
free parameters (the strict upper triangle of ``theta``) always realizes a
valid graph: symmetric, nonnegative, zero diagonal. The loss for a batch of
signals is ``1 - R^2`` of the closed-form reconstruction of the masked
channels, pooled over every masked entry of every time sample in the batch.
The gradient is exact, propagated through the linear solve by the adjoint
method (one extra triangular solve per step, no finite differences).

Fine-tuning adapts a graph learned on a full-montage dataset A to a
smaller-montage dataset B with a weighted joint loss: random half-masks of
B's electrodes reconstructed within B's subgraph, plus the fixed mask of all
electrodes A has and B lacks reconstructed on A.

Training is sequential and fully seeded: identical configuration and data
reproduce bit-identical traces and weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .graphs import Graph
from .interpolation import MaskSpec, SingularMaskError, _disconnected_missing

__all__ = [
    "AdjacencyParams",
    "LearnConfig",
    "LossTrace",
    "r_squared",
    "reconstruction_loss",
    "loss_gradient",
    "learn_graph",
    "finetune_graph",
    "write_loss_trace_csv",
]

# Realized weight assigned to absent edges when a graph seeds theta; softplus
# cannot represent an exact zero, and a small floor keeps every pair trainable.
WEIGHT_FLOOR = 1e-4
# Held-out fraction of trials used for the per-step validation R^2.
VAL_FRACTION = 0.2
# Warm-start target for the mean nonzero weight of the initial graph.
INIT_MEAN_WEIGHT = 0.1
INIT_THETA_NOISE = 1e-3
MAX_HALVINGS = 10


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_inv(w):
    # log(exp(w) - 1); w must be strictly positive.
    return np.log(np.expm1(w))


@dataclass(frozen=True, eq=False)
class AdjacencyParams:
    """Free parameters of a learnable adjacency.

    Only the strict upper triangle of ``theta`` is free; the realized weight
    matrix is ``W_ij = W_ji = softplus(theta_ij)`` with a zero diagonal, so
    any parameter value yields a valid graph.
    """

    montage: object
    theta: np.ndarray

    def __post_init__(self):
        n = len(self.montage)
        theta = np.array(self.theta, dtype=float)
        if theta.shape != (n, n):
            raise ValueError(f"theta must have shape ({n}, {n}), got {theta.shape}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    def realize(self):
        """The graph currently encoded by the parameters."""
        return Graph(self.montage, _realize_weights(self.theta))

    @classmethod
    def from_graph(cls, graph, floor=WEIGHT_FLOOR):
        """Parameters whose realized weights match ``graph`` (floored at
        ``floor``, since softplus cannot produce exact zeros)."""
        n = graph.n_vertices
        iu = np.triu_indices(n, 1)
        theta = np.zeros((n, n))
        theta[iu] = _softplus_inv(np.maximum(graph.weights[iu], floor))
        return cls(graph.montage, theta)


def _realize_weights(theta):
    n = theta.shape[0]
    iu = np.triu_indices(n, 1)
    w = np.zeros((n, n))
    w[iu] = _softplus(theta[iu])
    return w + w.T


def r_squared(predicted, truth):
    """Coefficient of determination 1 - SS_res / SS_tot.

    SS_tot is centered on the mean of ``truth``. Always <= 1; raises for
    (near-)constant truth, where the ratio is undefined.
    """
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape or truth.size == 0:
        raise ValueError("predicted and truth must be equal-length nonempty vectors")
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot <= 1e-12 * float(np.sum(truth**2)):
        raise ValueError("R^2 is undefined for constant truth values")
    ss_res = float(np.sum((predicted - truth) ** 2))
    return 1.0 - ss_res / ss_tot


def _batch_matrix(data, trial_idx):
    """Stack selected trials into one (channels, trials*samples) matrix."""
    sel = data[trial_idx]
    return sel.transpose(1, 0, 2).reshape(sel.shape[1], -1)


def _loss_and_grad(theta, data_mat, missing, observed, ridge, names, want_grad):
    """Pooled 1 - R^2 of the masked reconstruction, and its exact gradient.

    ``data_mat`` is (channels, columns) in montage order; ``missing`` and
    ``observed`` are sorted index arrays. The gradient comes from the adjoint
    of the masked solve: with X the reconstruction and Lam the solve of the
    same system against dloss/dX, the Laplacian blocks receive -Lam X^T and
    -Lam S^T, which then chain onto the weights and theta.
    """
    n = theta.shape[0]
    weights = _realize_weights(theta)
    lap = np.diag(weights.sum(axis=1)) - weights

    mask_stub = _IndexMask(missing, observed)
    bad = _disconnected_missing(weights, mask_stub)
    if bad:
        raise SingularMaskError(names[i] for i in bad)

    mi = np.asarray(missing, dtype=int)
    oi = np.asarray(observed, dtype=int)
    block_mm = lap[np.ix_(mi, mi)] + ridge * np.eye(mi.size)
    block_mo = lap[np.ix_(mi, oi)]
    s_obs = data_mat[oi]
    truth = data_mat[mi]

    rhs = -(block_mo @ s_obs)
    try:
        factor = cho_factor(block_mm)
    except np.linalg.LinAlgError:
        raise SingularMaskError(
            (names[i] for i in missing), reason="give a singular system"
        )
    recon = cho_solve(factor, rhs)

    mu = truth.mean()
    ss_tot = float(np.sum((truth - mu) ** 2))
    if ss_tot <= 1e-12 * float(np.sum(truth**2)):
        raise ValueError("masked truth values are constant; R^2 loss is undefined")
    resid = recon - truth
    loss = float(np.sum(resid**2)) / ss_tot
    if not want_grad:
        return loss, None

    adj = cho_solve(factor, (2.0 / ss_tot) * resid)
    grad_lap = np.zeros((n, n))
    grad_lap[np.ix_(mi, mi)] = -adj @ recon.T
    grad_lap[np.ix_(mi, oi)] = -adj @ s_obs.T
    # d lap / d W_ab touches four entries: -1 at (a,b) and (b,a), +1 at the
    # two diagonal cells.
    dg = np.diagonal(grad_lap)
    grad_w = -grad_lap - grad_lap.T + dg[:, None] + dg[None, :]
    iu = np.triu_indices(n, 1)
    grad_theta = np.zeros((n, n))
    grad_theta[iu] = grad_w[iu] * expit(theta[iu])
    return loss, grad_theta


class _IndexMask:
    """Duck-typed stand-in for MaskSpec inside the training loop."""

    def __init__(self, missing, observed):
        self.missing = tuple(int(i) for i in missing)
        self.observed = tuple(int(i) for i in observed)


def _check_batch(params, batch):
    if set(batch.channel_names) != set(params.montage.names):
        raise ValueError("batch channel names do not match the montage")
    perm = [batch.channel_names.index(name) for name in params.montage.names]
    return np.asarray(perm, dtype=int)


def reconstruction_loss(params, batch, mask, ridge):
    """1 - R^2 of reconstructing ``mask.missing`` across the whole batch.

    Every time sample of every trial is reconstructed through the closed form
    on the realized graph; R^2 pools all masked entries, centered on their
    pooled mean.
    """
    perm = _check_batch(params, batch)
    data_mat = _batch_matrix(batch.data, np.arange(batch.n_trials))[perm]
    loss, _ = _loss_and_grad(
        params.theta,
        data_mat,
        np.asarray(mask.missing),
        np.asarray(mask.observed),
        ridge,
        params.montage.names,
        want_grad=False,
    )
    return loss


def loss_gradient(params, batch, mask, ridge):
    """Exact gradient of :func:`reconstruction_loss` w.r.t. theta.

    Returned as an (n, n) array populated on the strict upper triangle.
    A theta entry between two observed electrodes that appears in no
    reconstructed block has gradient exactly zero.
    """
    perm = _check_batch(params, batch)
    data_mat = _batch_matrix(batch.data, np.arange(batch.n_trials))[perm]
    _, grad = _loss_and_grad(
        params.theta,
        data_mat,
        np.asarray(mask.missing),
        np.asarray(mask.observed),
        ridge,
        params.montage.names,
        want_grad=True,
    )
    return grad


@dataclass(frozen=True)
class LearnConfig:
    """Hyperparameters for graph learning and fine-tuning.

    ``mask_fraction`` of the electrodes is hidden at each step (rounded,
    clamped to [1, n-1]); ``finetune_weight`` is the weight alpha on the
    target-dataset loss during fine-tuning; ``ridge`` stabilizes every masked
    solve inside the loss.
    """

    steps: int = 500
    step_size: float = 1.0
    batch_size: int = 16
    mask_fraction: float = 0.5
    seed: int = 0
    ridge: float = 1e-8
    finetune_weight: float = 0.5

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.mask_fraction < 1.0:
            raise ValueError("mask_fraction must be in (0, 1)")
        if not 0.0 <= self.finetune_weight <= 1.0:
            raise ValueError("finetune_weight must be in [0, 1]")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")


@dataclass(frozen=True, eq=False)
class LossTrace:
    """Per-step training loss (1 - R^2) and validation R^2."""

    loss: np.ndarray
    val_r2: np.ndarray

    def __post_init__(self):
        loss = np.array(self.loss, dtype=float)
        val = np.array(self.val_r2, dtype=float)
        if loss.shape != val.shape or loss.ndim != 1:
            raise ValueError("loss and val_r2 must be equal-length vectors")
        loss.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "loss", loss)
        object.__setattr__(self, "val_r2", val)

    def __len__(self):
        return self.loss.size


def write_loss_trace_csv(trace, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "val_r2"])
        for step, (loss, val) in enumerate(zip(trace.loss, trace.val_r2)):
            writer.writerow([step, repr(float(loss)), repr(float(val))])


def _mask_size(fraction, n):
    return min(max(int(round(fraction * n)), 1), n - 1)


def _split_trials(n_trials, rng):
    """Seeded train/validation split; tiny sets validate on themselves."""
    if n_trials < 2:
        idx = np.arange(n_trials)
        return idx, idx
    perm = rng.permutation(n_trials)
    n_val = max(1, int(round(VAL_FRACTION * n_trials)))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _descend(theta, grad, loss_before, evaluate, step_size):
    """One gradient step with halving backoff; returns the accepted theta.

    The step is retried with a halved size (up to MAX_HALVINGS times) while
    it increases the loss; if it still increases, the step is skipped.
    """
    step = step_size
    for _ in range(MAX_HALVINGS + 1):
        candidate = theta - step * grad
        if evaluate(candidate) <= loss_before:
            return candidate
        step *= 0.5
    return theta


def learn_graph(data, cfg, init):
    """Learn a graph for masked-channel reconstruction from signal data.

    Runs ``cfg.steps`` full-gradient steps. Each step draws a fresh seeded
    random mask of ``round(cfg.mask_fraction * n)`` electrodes and a seeded
    batch of trials, reconstructs the masked channels through the realized
    graph, and descends on the pooled ``1 - R^2``. The trace records the
    pre-update loss of each step and the post-update R^2 on a held-out
    validation split (fixed seeded mask).

    Parameters
    ----------
    data : EpochSet
        Training signals; channel names must match ``init``'s montage.
    cfg : LearnConfig
    init : Graph
        Warm start, typically a spatial radius graph. Its weights are scaled
        to a mean nonzero weight of 0.1, floored at a small positive value,
        and perturbed by seeded +-1e-3 noise on theta for symmetry breaking.

    Returns
    -------
    (Graph, LossTrace)

    Deterministic: identical ``data`` and ``cfg.seed`` give bit-identical
    results.
    """
    montage = init.montage
    n = len(montage)
    if n < 4:
        raise ValueError("graph learning needs a montage of at least 4 electrodes")
    if data.n_trials < 1:
        raise ValueError("graph learning needs at least one trial")
    if set(data.channel_names) != set(montage.names):
        raise ValueError("data channel names do not match the montage")
    perm = np.asarray([data.channel_names.index(name) for name in montage.names])

    init_ss, split_ss, val_ss, step_ss = np.random.SeedSequence(cfg.seed).spawn(4)
    iu = np.triu_indices(n, 1)

    w0 = init.weights.copy()
    nonzero = w0[iu][w0[iu] > 0]
    if nonzero.size:
        w0 *= INIT_MEAN_WEIGHT / nonzero.mean()
    theta = np.zeros((n, n))
    theta[iu] = _softplus_inv(np.maximum(w0[iu], WEIGHT_FLOOR))
    theta[iu] += np.random.default_rng(init_ss).uniform(
        -INIT_THETA_NOISE, INIT_THETA_NOISE, size=iu[0].size
    )

    k = _mask_size(cfg.mask_fraction, n)
    train_idx, val_idx = _split_trials(data.n_trials, np.random.default_rng(split_ss))
    val_mask = np.sort(np.random.default_rng(val_ss).choice(n, size=k, replace=False))
    val_obs = np.setdiff1d(np.arange(n), val_mask)
    val_mat = _batch_matrix(data.data, val_idx)[perm]

    rng = np.random.default_rng(step_ss)
    names = montage.names
    losses = np.empty(cfg.steps)
    val_r2 = np.empty(cfg.steps)
    for t in range(cfg.steps):
        batch = train_idx[
            rng.choice(train_idx.size, size=min(cfg.batch_size, train_idx.size),
                       replace=False)
        ]
        mask = np.sort(rng.choice(n, size=k, replace=False))
        obs = np.setdiff1d(np.arange(n), mask)
        batch_mat = _batch_matrix(data.data, batch)[perm]

        loss, grad = _loss_and_grad(
            theta, batch_mat, mask, obs, cfg.ridge, names, want_grad=True
        )
        if not np.isfinite(loss):
            raise ValueError(f"non-finite loss at step {t}")

        def evaluate(candidate):
            value, _ = _loss_and_grad(
                candidate, batch_mat, mask, obs, cfg.ridge, names, want_grad=False
            )
            return value

        theta = _descend(theta, grad, loss, evaluate, cfg.step_size)
        losses[t] = loss
        val_loss, _ = _loss_and_grad(
            theta, val_mat, val_mask, val_obs, cfg.ridge, names, want_grad=False
        )
        val_r2[t] = 1.0 - val_loss

    graph = AdjacencyParams(montage, theta).realize()
    return graph, LossTrace(losses, val_r2)


def finetune_graph(graph, data_a, data_b, cfg):
    """Adapt a graph learned on dataset A to a smaller-montage dataset B.

    At each step two problems are posed: a random half-mask of B's
    electrodes reconstructed inside B's subgraph (weight ``alpha``), and the
    fixed mask of every electrode A has but B lacks reconstructed on the full
    graph with A's data (weight ``1 - alpha``). When B covers all of A the
    second loss is defined as 0. The validation R^2 tracks a held-out split
    of B under a fixed seeded mask; the trace loss is the weighted total.

    Raises
    ------
    ValueError
        If some of B's channels are missing from the graph's montage (they
        are listed), or A's channels do not match the montage.
    """
    montage = graph.montage
    alpha = cfg.finetune_weight
    unmatched = [nm for nm in data_b.channel_names if nm not in set(montage.names)]
    if unmatched:
        raise ValueError(
            "channels of dataset B missing from the montage: " + ", ".join(unmatched)
        )
    if set(data_a.channel_names) != set(montage.names):
        raise ValueError("dataset A channel names do not match the montage")
    n = len(montage)
    perm_a = np.asarray([data_a.channel_names.index(name) for name in montage.names])

    # B's electrodes as ascending montage indices, and the data-row order
    # that realizes that arrangement.
    b_global = np.asarray(sorted(montage.index(nm) for nm in data_b.channel_names))
    b_names_sorted = [montage.names[i] for i in b_global]
    perm_b = np.asarray([data_b.channel_names.index(nm) for nm in b_names_sorted])
    nb = b_global.size
    if nb < 4:
        raise ValueError("fine-tuning needs at least 4 electrodes in dataset B")
    a_only = np.setdiff1d(np.arange(n), b_global)
    use_a = alpha < 1.0 and a_only.size > 0
    use_b = alpha > 0.0

    theta = AdjacencyParams.from_graph(graph).theta.copy()
    kb = _mask_size(cfg.mask_fraction, nb)

    _unused, split_ss, val_ss, step_ss = np.random.SeedSequence(cfg.seed).spawn(4)
    train_b, val_b = _split_trials(data_b.n_trials, np.random.default_rng(split_ss))
    val_mask_local = np.sort(
        np.random.default_rng(val_ss).choice(nb, size=kb, replace=False)
    )
    val_obs_local = np.setdiff1d(np.arange(nb), val_mask_local)
    val_mat = _batch_matrix(data_b.data, val_b)[perm_b]

    rng = np.random.default_rng(step_ss)
    b_names = tuple(b_names_sorted)
    sub = np.ix_(b_global, b_global)

    def joint_loss(th, b_mat, mask_b, obs_b, a_mat, want_grad):
        total = 0.0
        grad = np.zeros((n, n)) if want_grad else None
        if use_b:
            loss_b, grad_b = _loss_and_grad(
                th[sub], b_mat, mask_b, obs_b, cfg.ridge, b_names, want_grad
            )
            total += alpha * loss_b
            if want_grad:
                grad[sub] += alpha * grad_b
        if use_a:
            loss_a, grad_a = _loss_and_grad(
                th, a_mat, a_only, b_global, cfg.ridge, montage.names, want_grad
            )
            total += (1.0 - alpha) * loss_a
            if want_grad:
                grad += (1.0 - alpha) * grad_a
        return total, grad

    losses = np.empty(cfg.steps)
    val_r2 = np.empty(cfg.steps)
    for t in range(cfg.steps):
        batch_b = train_b[
            rng.choice(train_b.size, size=min(cfg.batch_size, train_b.size),
                       replace=False)
        ]
        mask_b = np.sort(rng.choice(nb, size=kb, replace=False))
        obs_b = np.setdiff1d(np.arange(nb), mask_b)
        b_mat = _batch_matrix(data_b.data, batch_b)[perm_b]
        a_mat = None
        if use_a:
            batch_a = rng.choice(
                data_a.n_trials, size=min(cfg.batch_size, data_a.n_trials),
                replace=False,
            )
            a_mat = _batch_matrix(data_a.data, np.sort(batch_a))[perm_a]

        loss, grad = joint_loss(theta, b_mat, mask_b, obs_b, a_mat, want_grad=True)
        if not np.isfinite(loss):
            raise ValueError(f"non-finite loss at step {t}")

        def evaluate(candidate):
            value, _ = joint_loss(candidate, b_mat, mask_b, obs_b, a_mat,
                                  want_grad=False)
            return value

        theta = _descend(theta, grad, loss, evaluate, cfg.step_size)
        losses[t] = loss
        val_loss, _ = _loss_and_grad(
            theta[sub], val_mat, val_mask_local, val_obs_local, cfg.ridge, b_names,
            want_grad=False,
        )
        val_r2[t] = 1.0 - val_loss

    return AdjacencyParams(montage, theta).realize(), LossTrace(losses, val_r2)
