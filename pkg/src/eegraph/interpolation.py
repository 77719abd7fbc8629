"""Reconstruction of missing electrode values on a fixed montage.

Two interpolators:

* :func:`interpolate` fills the missing entries of a graph signal with the
  unique minimizer of the variation s^T L s given the observed entries. With
  M the missing index set and M' its complement, the minimizer is the closed
  form ``s_M = -L_MM^{-1} L_MM' s_M'`` where L_MM is the principal submatrix
  of the Laplacian on M and L_MM' the off-diagonal block. The solve uses a
  Cholesky factorization of the (ridge-stabilized) submatrix rather than an
  explicit inverse.

* :func:`spherical_spline_interpolate` is the classical scalp-potential
  interpolation with spherical splines (Perrin et al., 1989), provided as a
  graph-free baseline.

Pure functions over immutable inputs; a :class:`PartitionedLaplacian` may be
cached and reused across many signals that share a mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import legval
from scipy.linalg import cho_factor, cho_solve

from .graphs import Montage  # noqa: F401  (re-exported type in signatures)

__all__ = [
    "MaskSpec",
    "PartitionedLaplacian",
    "SingularMaskError",
    "partition_laplacian",
    "interpolate",
    "spherical_spline_interpolate",
]

# Relative diagonal ridge for the masked-submatrix solve, and the residual
# level beyond which the system is reported as singular.
RIDGE_SCALE = 1e-9
RESIDUAL_TOL = 1e-6


class SingularMaskError(ValueError):
    """The masked Laplacian block cannot be solved.

    Typically some missing electrode has no path to any observed electrode,
    so its value is unconstrained by the variation objective.
    """

    def __init__(self, names, reason="not connected to any observed electrode"):
        self.vertex_names = tuple(names)
        listed = ", ".join(self.vertex_names) if self.vertex_names else "<none>"
        super().__init__(f"missing electrodes {reason}: {listed}")


@dataclass(frozen=True, eq=False)
class MaskSpec:
    """Partition of a montage into missing and observed electrodes.

    ``missing`` and ``observed`` are sorted index tuples that together cover
    every vertex exactly once; ``observed`` must be nonempty. The missing set
    may be empty (interpolation is then the identity).
    """

    montage: Montage
    missing: tuple
    observed: tuple

    def __post_init__(self):
        n = len(self.montage)
        missing = tuple(sorted(int(i) for i in self.missing))
        observed = tuple(sorted(int(i) for i in self.observed))
        if set(missing) & set(observed):
            raise ValueError("missing and observed sets must be disjoint")
        if sorted(missing + observed) != list(range(n)):
            raise ValueError("missing and observed must partition all vertices")
        if not observed:
            raise ValueError("at least one electrode must be observed")
        object.__setattr__(self, "missing", missing)
        object.__setattr__(self, "observed", observed)

    @classmethod
    def from_missing_indices(cls, montage, missing):
        missing = sorted(set(int(i) for i in missing))
        if missing and (missing[0] < 0 or missing[-1] >= len(montage)):
            raise ValueError("missing index out of range")
        observed = [i for i in range(len(montage)) if i not in set(missing)]
        return cls(montage, tuple(missing), tuple(observed))

    @classmethod
    def from_missing_names(cls, montage, names):
        return cls.from_missing_indices(montage, montage.indices(names))

    @property
    def missing_names(self):
        return tuple(self.montage.names[i] for i in self.missing)

    @property
    def observed_names(self):
        return tuple(self.montage.names[i] for i in self.observed)

    @property
    def n_missing(self):
        return len(self.missing)


@dataclass(frozen=True, eq=False)
class PartitionedLaplacian:
    """The two Laplacian blocks read by the closed-form reconstruction.

    ``l_mm`` keeps the rows and columns with indices in the missing set;
    ``l_mo`` keeps the missing rows and observed columns. ``missing`` and
    ``observed`` map block positions back to montage indices.
    """

    l_mm: np.ndarray
    l_mo: np.ndarray
    missing: tuple
    observed: tuple


def partition_laplacian(lap, mask):
    """Extract the (missing, missing) and (missing, observed) blocks."""
    if mask.montage != lap.graph.montage:
        raise ValueError("mask montage does not match Laplacian montage")
    mi = np.asarray(mask.missing, dtype=int)
    oi = np.asarray(mask.observed, dtype=int)
    l_mm = lap.matrix[np.ix_(mi, mi)].copy()
    l_mo = lap.matrix[np.ix_(mi, oi)].copy()
    l_mm.setflags(write=False)
    l_mo.setflags(write=False)
    return PartitionedLaplacian(l_mm, l_mo, mask.missing, mask.observed)


def _disconnected_missing(weights, mask):
    """Missing vertices with no path (through any vertices) to an observed one."""
    n = weights.shape[0]
    reached = np.zeros(n, dtype=bool)
    stack = list(mask.observed)
    reached[list(mask.observed)] = True
    adj = weights != 0.0
    while stack:
        v = stack.pop()
        for u in np.nonzero(adj[v])[0]:
            if not reached[u]:
                reached[u] = True
                stack.append(u)
    return [i for i in mask.missing if not reached[i]]


def _as_columns(values, n_expected, what):
    values = np.asarray(values, dtype=float)
    squeeze = values.ndim == 1
    if squeeze:
        values = values[:, None]
    if values.ndim != 2 or values.shape[0] != n_expected:
        raise ValueError(
            f"{what} must have {n_expected} rows, got shape {values.shape}"
        )
    return values, squeeze


def interpolate(lap, observed_values, mask, ridge=None):
    """Fill missing entries with the variation-minimizing closed form.

    Parameters
    ----------
    lap : Laplacian
    observed_values : array, shape (n_observed,) or (n_observed, k)
        Values at ``mask.observed``, in ascending-index order. A 2-D array
        interpolates k signals against one factorization.
    mask : MaskSpec
    ridge : float, optional
        Diagonal stabilizer added to the missing-block submatrix. Defaults to
        ``1e-9 * trace(L_MM) / |M|``. If the solve residual against the
        unridged block exceeds ``1e-6`` relative, the mask is reported as
        singular.

    Returns
    -------
    array, shape (n,) or (n, k)
        Full signal(s); observed entries pass through unchanged.

    Raises
    ------
    SingularMaskError
        If some missing electrode is disconnected from every observed one,
        or the masked block is numerically singular beyond the ridge.
    """
    if mask.montage != lap.graph.montage:
        raise ValueError("mask montage does not match Laplacian montage")
    obs, squeeze = _as_columns(observed_values, len(mask.observed), "observed_values")
    n = lap.n_vertices
    out = np.empty((n, obs.shape[1]))
    out[list(mask.observed)] = obs
    if mask.n_missing == 0:
        return out[:, 0] if squeeze else out

    bad = _disconnected_missing(lap.graph.weights, mask)
    if bad:
        raise SingularMaskError(lap.graph.montage.names[i] for i in bad)

    part = partition_laplacian(lap, mask)
    m = mask.n_missing
    if ridge is None:
        ridge = RIDGE_SCALE * np.trace(part.l_mm) / m
    rhs = -(part.l_mo @ obs)
    try:
        factor = cho_factor(part.l_mm + ridge * np.eye(m))
    except np.linalg.LinAlgError:
        raise SingularMaskError(mask.missing_names, reason="give a singular system")
    filled = cho_solve(factor, rhs)

    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm > 0:
        residual = np.linalg.norm(part.l_mm @ filled - rhs) / rhs_norm
        if residual > RESIDUAL_TOL:
            raise SingularMaskError(
                mask.missing_names,
                reason=f"give a numerically singular system (residual {residual:.2e})",
            )
    out[list(mask.missing)] = filled
    return out[:, 0] if squeeze else out


# ---------------------------------------------------------------------------
# Spherical splines (Perrin et al., 1989).
# ---------------------------------------------------------------------------


def _spline_kernel(pos_a, pos_b, order_m, n_terms):
    """g(cos angle) between two position sets on the unit sphere.

    g(x) = (1/4pi) * sum_{k=1..n_terms} (2k+1) / (k (k+1))^m * P_k(x),
    evaluated with the stable Legendre recurrence.
    """
    cosang = np.clip(pos_a @ pos_b.T, -1.0, 1.0)
    k = np.arange(1, n_terms + 1, dtype=float)
    coeffs = np.concatenate([[0.0], (2 * k + 1) / (k * (k + 1)) ** order_m])
    return legval(cosang, coeffs) / (4 * np.pi)


def spherical_spline_interpolate(
    montage, observed_values, mask, order_m=4, n_terms=50, ridge=1e-5
):
    """Spherical-spline interpolation of scalp potentials.

    Fits g-splines with a constant term and the zero-sum constraint on the
    spline coefficients to the observed electrodes, then evaluates the fit at
    the missing positions. Observed entries pass through unchanged.

    Parameters
    ----------
    montage : Montage
    observed_values : array, shape (n_observed,) or (n_observed, k)
    mask : MaskSpec
    order_m : int
        Spline stiffness order (4 is the standard choice for potentials).
    n_terms : int
        Number of Legendre terms in the kernel series.
    ridge : float
        Diagonal regularizer on the spline Gram matrix.

    Raises
    ------
    ValueError
        If fewer than 3 electrodes are observed, or the spline system is
        singular beyond the ridge (e.g. coincident electrode positions).
    """
    if mask.montage != montage:
        raise ValueError("mask montage does not match montage")
    if order_m < 1 or n_terms < 1:
        raise ValueError("order_m and n_terms must be positive")
    obs, squeeze = _as_columns(observed_values, len(mask.observed), "observed_values")
    n = len(montage)
    out = np.empty((n, obs.shape[1]))
    out[list(mask.observed)] = obs
    if mask.n_missing == 0:
        return out[:, 0] if squeeze else out
    n_obs = len(mask.observed)
    if n_obs < 3:
        raise ValueError(f"spherical splines need >= 3 observed electrodes, got {n_obs}")

    pos_obs = montage.positions[list(mask.observed)]
    pos_mis = montage.positions[list(mask.missing)]
    gram = _spline_kernel(pos_obs, pos_obs, order_m, n_terms)

    # Augmented system: constant term plus zero-sum constraint on the
    # coefficients ([0, 1^T; 1, G + ridge*I] @ [c0; c] = [0; values]).
    system = np.empty((n_obs + 1, n_obs + 1))
    system[0, 0] = 0.0
    system[0, 1:] = 1.0
    system[1:, 0] = 1.0
    system[1:, 1:] = gram + ridge * np.eye(n_obs)
    rhs = np.vstack([np.zeros((1, obs.shape[1])), obs])
    try:
        sol = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        raise ValueError(
            "spline system is singular; check for coincident electrode positions"
        ) from None
    residual = np.linalg.norm(system @ sol - rhs)
    if residual > RESIDUAL_TOL * max(np.linalg.norm(rhs), 1.0):
        raise ValueError(
            "spline system is numerically singular beyond the ridge; "
            "check for coincident electrode positions"
        )

    kernel_mo = _spline_kernel(pos_mis, pos_obs, order_m, n_terms)
    out[list(mask.missing)] = sol[0] + kernel_mo @ sol[1:]
    return out[:, 0] if squeeze else out
