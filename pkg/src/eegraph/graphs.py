"""Electrode montages, graphs over them, Laplacians, and graph spectra.

A montage fixes the vertex set: named electrodes at positions on the unit
sphere (the head model). A graph is a symmetric nonnegative weight matrix
over a montage. From the weights we derive the combinatorial Laplacian
L = D - W, its eigendecomposition (the graph Fourier basis), and the
quadratic signal-variation functional s^T L s used for interpolation and
graph learning.

Graph signals are plain 1-D float arrays of length ``len(montage)``, indexed
in montage order; no wrapper class is needed.

Everything here is immutable after construction (frozen dataclasses holding
read-only arrays) and all operations are pure functions, so objects are safe
to share between threads.

Montages are small (at most ~128 electrodes), so all matrices are dense.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "Montage",
    "Graph",
    "Laplacian",
    "Spectrum",
    "build_laplacian",
    "spectrum",
    "gft",
    "igft",
    "total_variation",
    "total_variation_spectral",
    "total_variation_pairwise",
    "subgraph",
    "load_montage",
    "save_montage",
    "montage_from_dict",
    "montage_to_dict",
    "load_graph",
    "save_graph",
    "graph_from_dict",
    "graph_to_dict",
]

UNIT_NORM_TOL = 1e-6


def _readonly(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Montage:
    """Named electrode positions on the unit sphere.

    Parameters
    ----------
    names : sequence of str
        Unique, nonempty electrode names. The ordering is significant: it
        defines the vertex indexing used by every graph and signal.
    positions : array, shape (n, 3)
        Cartesian positions; each row must have Euclidean norm within
        ``1e-6`` of 1. Use :func:`load_montage` to normalize raw coordinates.
    """

    names: tuple
    positions: np.ndarray

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        if not names:
            raise ValueError("montage needs at least one electrode")
        if any(not n for n in names):
            raise ValueError("electrode names must be nonempty")
        if len(set(names)) != len(names):
            raise ValueError("electrode names must be unique")
        pos = np.array(self.positions, dtype=float)
        if pos.shape != (len(names), 3):
            raise ValueError(
                f"positions must have shape ({len(names)}, 3), got {pos.shape}"
            )
        norms = np.linalg.norm(pos, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(
                f"electrode {names[worst]!r} is off the unit sphere "
                f"(|pos| = {norms[worst]:.8f})"
            )
        pos.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        if not isinstance(other, Montage):
            return NotImplemented
        return self.names == other.names and np.array_equal(
            self.positions, other.positions
        )

    def __hash__(self):
        return hash(self.names)

    @cached_property
    def _name_to_index(self):
        return {name: i for i, name in enumerate(self.names)}

    def index(self, name):
        """Vertex index of an electrode name."""
        try:
            return self._name_to_index[name]
        except KeyError:
            raise ValueError(f"unknown electrode {name!r}") from None

    def indices(self, names):
        """Vertex indices for a sequence of names, in the given order."""
        return [self.index(n) for n in names]

    def subset(self, names):
        """New montage restricted to ``names``, in the given order."""
        idx = self.indices(names)
        return Montage(tuple(names), self.positions[idx])


@dataclass(frozen=True, eq=False)
class Graph:
    """Weighted undirected graph over a montage.

    ``weights`` must be exactly symmetric, entrywise nonnegative, and have a
    zero diagonal.
    """

    montage: Montage
    weights: np.ndarray

    def __post_init__(self):
        n = len(self.montage)
        w = np.array(self.weights, dtype=float)
        if w.shape != (n, n):
            raise ValueError(f"weights must have shape ({n}, {n}), got {w.shape}")
        if not np.array_equal(w, w.T):
            raise ValueError("weights must be exactly symmetric")
        if np.any(np.diagonal(w) != 0.0):
            raise ValueError("weights must have a zero diagonal")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_vertices(self):
        return len(self.montage)

    def degrees(self):
        """Vector of weighted vertex degrees D_ii = sum_k W_ik."""
        return self.weights.sum(axis=1)


@dataclass(frozen=True, eq=False)
class Laplacian:
    """Combinatorial Laplacian L = D - W of a graph, with its source graph."""

    matrix: np.ndarray
    graph: Graph

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        n = self.graph.n_vertices
        if m.shape != (n, n):
            raise ValueError(f"Laplacian must have shape ({n}, {n}), got {m.shape}")
        scale = np.abs(m).max()
        row_sums = m.sum(axis=1)
        if np.abs(row_sums).max() > 1e-9 * max(scale, 1e-300):
            raise ValueError("Laplacian rows must sum to zero")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_vertices(self):
        return self.graph.n_vertices


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigendecomposition of a Laplacian: L = U diag(eigenvalues) U^T.

    Eigenvalues are sorted ascending; ``eigenvectors`` holds the orthonormal
    basis column-wise, aligned with the eigenvalues. Signs are fixed so each
    column's largest-magnitude entry is nonnegative (ties broken by lowest
    index), which makes spectra reproducible across linear-algebra backends.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        vals = _readonly(self.eigenvalues)
        vecs = _readonly(self.eigenvectors)
        if vals.ndim != 1 or vecs.shape != (vals.size, vals.size):
            raise ValueError("inconsistent spectrum shapes")
        if np.any(np.diff(vals) < 0):
            raise ValueError("eigenvalues must be nondecreasing")
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "eigenvectors", vecs)

    @property
    def n_vertices(self):
        return self.eigenvalues.size


def build_laplacian(graph):
    """Combinatorial Laplacian L = D - W of ``graph``.

    The result has zero row sums and is positive semidefinite for any valid
    graph (symmetric nonnegative weights).
    """
    w = graph.weights
    lap = np.diag(graph.degrees()) - w
    return Laplacian(lap, graph)


def spectrum(lap):
    """Eigendecomposition of a Laplacian with a fixed sign convention.

    Raises
    ------
    ValueError
        If the symmetric eigensolver fails to converge.
    """
    try:
        vals, vecs = np.linalg.eigh(lap.matrix)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"Laplacian eigendecomposition failed: {exc}") from exc
    # Sign fix: largest-magnitude entry of each eigenvector made nonnegative.
    # np.argmax returns the first maximum, i.e. the lowest index on ties.
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[lead, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    return Spectrum(vals, vecs * signs)


def _check_signal(n, s):
    s = np.asarray(s, dtype=float)
    if s.shape != (n,):
        raise ValueError(f"signal must have shape ({n},), got {s.shape}")
    return s


def gft(spec, s):
    """Graph Fourier transform: project a signal onto the Laplacian basis.

    Returns ``U^T s``. Orthonormality of U makes this an isometry
    (Parseval: the l2 norm is preserved).
    """
    s = _check_signal(spec.n_vertices, s)
    return spec.eigenvectors.T @ s


def igft(spec, s_hat):
    """Inverse graph Fourier transform: ``U s_hat``."""
    s_hat = _check_signal(spec.n_vertices, s_hat)
    return spec.eigenvectors @ s_hat


def total_variation(lap, s):
    """Signal variation s^T L s: how non-smooth a signal is on the graph.

    This quadratic form is the canonical value. It also equals the spectral
    sum ``sum_i lambda_i * s_hat_i**2`` and the pairwise sum
    ``0.5 * sum_ij W_ij (s_i - s_j)**2``; the full sum over ordered pairs
    counts each edge twice, hence the one-half factor that makes the three
    forms coincide. See :func:`total_variation_spectral` and
    :func:`total_variation_pairwise` for the two alternative evaluations.
    """
    s = _check_signal(lap.n_vertices, s)
    return float(s @ lap.matrix @ s)


def total_variation_spectral(spec, s):
    """Variation evaluated in the spectral domain: sum_i lambda_i s_hat_i^2."""
    s_hat = gft(spec, s)
    return float(np.sum(spec.eigenvalues * s_hat**2))


def total_variation_pairwise(graph, s):
    """Variation as half the ordered-pair sum of weighted squared differences."""
    s = _check_signal(graph.n_vertices, s)
    diff = s[:, None] - s[None, :]
    return 0.5 * float(np.sum(graph.weights * diff**2))


def subgraph(graph, names):
    """Restriction of a graph to the named electrodes, in the given order."""
    idx = graph.montage.indices(names)
    return Graph(graph.montage.subset(names), graph.weights[np.ix_(idx, idx)])


# ---------------------------------------------------------------------------
# JSON serialization.
#
# Montage files look like
#   {"electrodes": [{"name": "C3", "pos": [x, y, z]}, ...]}
# and graph files add a row-major "weights" matrix. Positions are normalized
# to unit norm on load; a vector with norm below 1e-6 is rejected.
# ---------------------------------------------------------------------------


def montage_to_dict(montage):
    return {
        "electrodes": [
            {"name": name, "pos": [float(x) for x in pos]}
            for name, pos in zip(montage.names, montage.positions)
        ]
    }


def montage_from_dict(d):
    try:
        electrodes = d["electrodes"]
    except (TypeError, KeyError):
        raise ValueError("montage JSON must contain an 'electrodes' list") from None
    names = []
    positions = []
    for entry in electrodes:
        try:
            name = entry["name"]
            pos = np.asarray(entry["pos"], dtype=float)
        except (TypeError, KeyError, ValueError):
            raise ValueError(
                "each electrode needs a 'name' and a 3-vector 'pos'"
            ) from None
        if pos.shape != (3,):
            raise ValueError(f"electrode {name!r}: 'pos' must be a 3-vector")
        norm = float(np.linalg.norm(pos))
        if norm < UNIT_NORM_TOL:
            raise ValueError(f"electrode {name!r}: position norm {norm} too small")
        names.append(name)
        # Normalize off-sphere coordinates; positions already at unit norm are
        # kept bit-exact so save/load round-trips are lossless.
        positions.append(pos if abs(norm - 1.0) <= 1e-9 else pos / norm)
    return Montage(tuple(names), np.array(positions))


def graph_to_dict(graph):
    d = montage_to_dict(graph.montage)
    d["weights"] = [[float(x) for x in row] for row in graph.weights]
    return d


def graph_from_dict(d):
    montage = montage_from_dict(d)
    try:
        weights = np.array(d["weights"], dtype=float)
    except (TypeError, KeyError, ValueError):
        raise ValueError("graph JSON must contain a numeric 'weights' matrix") from None
    return Graph(montage, weights)


def _dump_json(d, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(d, fh, indent=1)
        fh.write("\n")


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc


def save_montage(montage, path):
    _dump_json(montage_to_dict(montage), path)


def load_montage(path):
    """Load a montage from JSON; graph files are accepted (weights ignored)."""
    return montage_from_dict(_load_json(path))


def save_graph(graph, path):
    _dump_json(graph_to_dict(graph), path)


def load_graph(path):
    return graph_from_dict(_load_json(path))
