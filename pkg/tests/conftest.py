"""Shared builders and independent oracles for the test suite.

The oracles here deliberately avoid the library's solution paths: the
masked-interpolation oracle assembles normal equations by finite differences
of the pairwise variation sum (never touching Laplacian blocks), so it can
arbitrate the closed form.
"""

import numpy as np
import pytest

from eegraph import Graph, synthetic_montage


def random_connected_graph(n, rng, p=0.4):
    """Erdos-Renyi-style weights in [0.5, 1.5] plus a random spanning path."""
    w = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    edges = rng.random(iu[0].size) < p
    w[iu] = np.where(edges, rng.uniform(0.5, 1.5, iu[0].size), 0.0)
    perm = rng.permutation(n)
    for a, b in zip(perm[:-1], perm[1:]):
        i, j = min(a, b), max(a, b)
        if w[i, j] == 0:
            w[i, j] = rng.uniform(0.5, 1.5)
    w = w + w.T
    return Graph(synthetic_montage(n), w)


def random_wired_graph(montage, seed, p=0.25, mean_degree=4.5):
    """Connected random graph with no relation to electrode geometry."""
    n = len(montage)
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    w = np.zeros((n, n))
    edges = rng.random(iu[0].size) < p
    w[iu] = np.where(edges, rng.uniform(0.5, 1.5, iu[0].size), 0.0)
    perm = rng.permutation(n)
    for a, b in zip(perm[:-1], perm[1:]):
        i, j = min(a, b), max(a, b)
        if w[i, j] == 0:
            w[i, j] = rng.uniform(0.5, 1.5)
    w = w + w.T
    w *= mean_degree / w.sum(axis=1).mean()
    return Graph(montage, w)


def pairwise_variation(weights, s):
    """Half the ordered-pair weighted squared-difference sum."""
    diff = s[:, None] - s[None, :]
    return 0.5 * float(np.sum(weights * diff**2))


def oracle_fill(graph, observed_values, mask):
    """Brute-force minimizer of the variation over the missing entries.

    Builds the gradient and Hessian of the quadratic objective by central
    finite differences of the pairwise variation sum (exact for quadratics)
    and solves the normal equations. Independent of the closed form and of
    the Laplacian partition.
    """
    n = graph.n_vertices
    miss = list(mask.missing)
    obs = list(mask.observed)

    def objective(x):
        s = np.empty(n)
        s[obs] = observed_values
        s[miss] = x
        return pairwise_variation(graph.weights, s)

    m = len(miss)
    h = 1.0
    f0 = objective(np.zeros(m))
    grad = np.empty(m)
    hess = np.empty((m, m))
    for i in range(m):
        step = np.zeros(m)
        step[i] = h
        grad[i] = (objective(step) - objective(-step)) / (2 * h)
    for i in range(m):
        for j in range(i, m):
            both = np.zeros(m)
            both[i] += h
            both[j] += h
            only_i = np.zeros(m)
            only_i[i] = h
            only_j = np.zeros(m)
            only_j[j] = h
            hess[i, j] = hess[j, i] = (
                objective(both) - objective(only_i) - objective(only_j) + f0
            ) / h**2
    return np.linalg.solve(hess, -grad)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
