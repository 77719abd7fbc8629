"""Non-learned graph builders: spatial radius graphs and WPLI weighting.

The spatial graph connects electrode pairs whose Euclidean distance is at
most a radius (binary weights, no self loops). The weighted phase lag index
(WPLI) scores each channel pair in [0, 1] from the signed imaginary part of
their cross-spectrum; multiplying it onto the spatial graph keeps the wiring
but reweights edges by measured phase-lagged coupling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .graphs import Graph

__all__ = [
    "SpectralEstimationConfig",
    "default_spectral_config",
    "spatial_graph",
    "wpli_matrix",
    "wpli_weighted_spatial",
]

# Pairs whose pooled |Im(cross-spectrum)| falls below this fraction of the
# pooled signal power carry no phase-lag evidence; their WPLI is defined as 0.
DEGENERATE_DENOM_SCALE = 1e-12


@dataclass(frozen=True)
class SpectralEstimationConfig:
    """Welch-style cross-spectrum estimation settings.

    ``segment_length`` is in samples; ``overlap`` is the fraction of a
    segment shared with the next one; ``band`` is the (low, high) Hz range
    whose bins are pooled; ``window`` is a scipy window name.
    """

    segment_length: int
    overlap: float = 0.5
    band: tuple = (2.0, 40.0)
    window: str = "hann"

    def __post_init__(self):
        if self.segment_length < 2:
            raise ValueError("segment_length must be at least 2 samples")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError("overlap must be in [0, 1)")
        low, high = self.band
        if not 0.0 < low < high:
            raise ValueError("band must satisfy 0 < low < high")


def default_spectral_config(rate, band=(2.0, 40.0)):
    """1-second Hann segments with 50% overlap at the given sampling rate."""
    return SpectralEstimationConfig(segment_length=int(round(rate)), band=band)


def spatial_graph(montage, radius):
    """Binary graph connecting electrodes within ``radius`` of each other.

    Edges require strictly positive distance, so coincident electrodes and
    the diagonal stay unconnected. Monotone in the radius: growing the radius
    only adds edges.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    pos = montage.positions
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=2))
    weights = ((dist > 0.0) & (dist <= radius)).astype(float)
    return Graph(montage, weights)


def _segment_starts(n_samples, cfg):
    hop = cfg.segment_length - int(round(cfg.overlap * cfg.segment_length))
    hop = max(hop, 1)
    return range(0, n_samples - cfg.segment_length + 1, hop)


def wpli_matrix(epochs, cfg):
    """Weighted phase lag index between all channel pairs.

    For each pair, WPLI = |mean Im(S_xy)| / mean |Im(S_xy)| with the
    cross-spectral values S_xy pooled over Welch segments, trials, and the
    frequency bins inside ``cfg.band``. The estimate is insensitive to
    zero-lag (volume-conduction-like) coupling and to per-channel rescaling.

    Returns a symmetric matrix with zero diagonal and entries in [0, 1].
    Pairs with a degenerate denominator (no imaginary cross-spectral mass,
    e.g. identical signals) score 0.
    """
    n_ch = epochs.n_channels
    if n_ch < 2:
        raise ValueError("WPLI needs at least 2 channels")
    nyquist = epochs.rate / 2.0
    low, high = cfg.band
    if high >= nyquist:
        raise ValueError(f"band high {high} Hz must be below Nyquist {nyquist} Hz")
    if epochs.n_samples < cfg.segment_length:
        raise ValueError(
            f"trials have {epochs.n_samples} samples, need at least one "
            f"segment of {cfg.segment_length}"
        )

    freqs = np.fft.rfftfreq(cfg.segment_length, d=1.0 / epochs.rate)
    bins = np.nonzero((freqs >= low) & (freqs <= high))[0]
    if bins.size == 0:
        raise ValueError("no frequency bins inside the band; use longer segments")
    taper = get_window(cfg.window, cfg.segment_length)

    sum_im = np.zeros((n_ch, n_ch))
    sum_abs_im = np.zeros((n_ch, n_ch))
    power = np.zeros(n_ch)
    starts = list(_segment_starts(epochs.n_samples, cfg))
    for trial in epochs.data:
        for s0 in starts:
            seg = trial[:, s0 : s0 + cfg.segment_length] * taper
            spec = np.fft.rfft(seg, axis=1)[:, bins]
            cross_im = np.einsum("if,jf->ijf", spec, spec.conj()).imag
            sum_im += cross_im.sum(axis=2)
            sum_abs_im += np.abs(cross_im).sum(axis=2)
            power += np.sum(np.abs(spec) ** 2, axis=1)

    scale = 0.5 * (power[:, None] + power[None, :])
    degenerate = sum_abs_im <= DEGENERATE_DENOM_SCALE * scale
    wpli = np.zeros((n_ch, n_ch))
    np.divide(np.abs(sum_im), sum_abs_im, out=wpli, where=~degenerate)
    np.fill_diagonal(wpli, 0.0)
    # Mirror the upper triangle for exact symmetry and clip rounding spill.
    upper = np.triu(wpli, 1)
    return np.clip(upper + upper.T, 0.0, 1.0)


def wpli_weighted_spatial(spatial, wpli):
    """Reweight a spatial graph's edges by elementwise WPLI scores."""
    n = spatial.n_vertices
    wpli = np.asarray(wpli, dtype=float)
    if wpli.shape != (n, n):
        raise ValueError(f"WPLI matrix must have shape ({n}, {n}), got {wpli.shape}")
    return Graph(spatial.montage, spatial.weights * wpli)
