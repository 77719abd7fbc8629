"""Dataset-level preprocessing and homogenization onto a union montage.

An :class:`EpochSet` is a trials x channels x samples tensor (microvolts)
with a sampling rate and named channels. The operations here cover the
standard homogenization chain: resampling, zero-phase band-pass filtering,
windowing, Euclidean alignment (whitening by the inverse square root of the
mean trial covariance), and mapping a dataset onto a union montage with
graph interpolation of the electrodes it lacks.

Channel matching across datasets is strictly by electrode name; unmatched
names are an error, never a fuzzy positional match. Filtering happens before
windowing in the packaged CLI chain.

The on-disk epoch format is EPB1, a little-endian binary layout:
magic ``EPB1``, u32 n_trials, u32 n_channels, u32 n_samples, f32 rate,
u32 name-block length, a UTF-8 JSON name block (either ``[names...]`` or
``[[names...], [labels...]]``), then trials*channels*samples f32 values in
trial-major, channel-major, sample-minor order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.signal import butter, resample as _fft_resample, sosfiltfilt

from .graphs import Montage, build_laplacian
from .interpolation import MaskSpec, interpolate

__all__ = [
    "EpochSet",
    "UnionMontage",
    "union_montage",
    "resample",
    "bandpass",
    "window",
    "euclidean_align",
    "map_to_union",
    "save_epochs",
    "load_epochs",
]

EPB1_MAGIC = b"EPB1"
_HEADER = struct.Struct("<4sIIIfI")

# Eigenvalue handling for the inverse square root in Euclidean alignment.
ALIGN_SINGULAR_TOL = 1e-10
ALIGN_EIGENVALUE_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class EpochSet:
    """Epoched multichannel signals: trials x channels x samples."""

    data: np.ndarray
    rate: float
    channel_names: tuple
    labels: tuple = None

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=float)
        if data.ndim != 3:
            raise ValueError(f"data must be 3-D (trials, channels, samples), got {data.shape}")
        names = tuple(str(n) for n in self.channel_names)
        if len(names) != data.shape[1]:
            raise ValueError("channel_names length must match the channel axis")
        if len(set(names)) != len(names):
            raise ValueError("channel names must be unique")
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        labels = self.labels
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != data.shape[0]:
                raise ValueError("labels length must match the trial axis")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "labels", labels)

    @property
    def n_trials(self):
        return self.data.shape[0]

    @property
    def n_channels(self):
        return self.data.shape[1]

    @property
    def n_samples(self):
        return self.data.shape[2]

    def with_data(self, data, rate=None, channel_names=None):
        return replace(
            self,
            data=data,
            rate=self.rate if rate is None else rate,
            channel_names=self.channel_names if channel_names is None
            else tuple(channel_names),
        )


def resample(epochs, target_rate):
    """FFT-domain rate conversion of whole epochs (inherently anti-aliased).

    The output has ``floor(n_samples * target_rate / rate)`` samples per
    trial. Upsampling is out of scope.
    """
    if target_rate > epochs.rate:
        raise ValueError(
            f"target rate {target_rate} Hz exceeds source rate {epochs.rate} Hz"
        )
    if target_rate == epochs.rate:
        return epochs
    num = int(np.floor(epochs.n_samples * target_rate / epochs.rate))
    if num < 1:
        raise ValueError("target rate too low for the trial length")
    out = _fft_resample(epochs.data, num, axis=2)
    return epochs.with_data(out, rate=float(target_rate))


def bandpass(epochs, low, high):
    """Zero-phase Butterworth band-pass (order 4, applied forward-backward)."""
    nyquist = epochs.rate / 2.0
    if not 0.0 < low < high < nyquist:
        raise ValueError(
            f"band must satisfy 0 < low < high < {nyquist} Hz, got ({low}, {high})"
        )
    sos = butter(4, (low, high), btype="bandpass", fs=epochs.rate, output="sos")
    out = sosfiltfilt(sos, epochs.data, axis=2)
    return epochs.with_data(out)


def window(epochs, start_s, duration_s):
    """Exact sample slice [round(start*rate), round(start*rate)+round(duration*rate))."""
    if start_s < 0:
        raise ValueError("start must be nonnegative")
    first = int(round(start_s * epochs.rate))
    count = int(round(duration_s * epochs.rate))
    if count < 1:
        raise ValueError("window duration too short for one sample")
    if first + count > epochs.n_samples:
        raise ValueError(
            f"window [{start_s}s, {start_s + duration_s}s) exceeds the "
            f"{epochs.n_samples / epochs.rate}s trial"
        )
    return epochs.with_data(epochs.data[:, :, first : first + count])


def _inv_sqrt_psd(matrix):
    vals, vecs = np.linalg.eigh(matrix)
    n = matrix.shape[0]
    if vals.min() < ALIGN_SINGULAR_TOL * np.trace(matrix) / n:
        raise ValueError(
            "mean covariance is singular; alignment would be ill-conditioned"
        )
    vals = np.maximum(vals, ALIGN_EIGENVALUE_FLOOR * vals.max())
    return (vecs / np.sqrt(vals)) @ vecs.T


def euclidean_align(epochs, groups=None):
    """Whiten trials by the inverse square root of their mean covariance.

    Computes ``R = mean_t X_t X_t^T / n_samples`` and returns
    ``R^{-1/2} X_t`` per trial, so the mean covariance of the output is the
    identity. With ``groups`` (one hashable tag per trial, e.g. subject ids)
    the transform is computed and applied per group; otherwise the whole set
    is aligned together.
    """
    if epochs.n_trials < 1:
        raise ValueError("alignment needs at least one trial")
    if groups is None:
        group_ids = np.zeros(epochs.n_trials, dtype=int)
    else:
        groups = np.asarray(groups)
        if groups.shape != (epochs.n_trials,):
            raise ValueError("groups must have one entry per trial")
        _, group_ids = np.unique(groups, return_inverse=True)

    out = np.empty_like(epochs.data)
    for gid in np.unique(group_ids):
        sel = np.nonzero(group_ids == gid)[0]
        trials = epochs.data[sel]
        mean_cov = np.einsum("tcs,tds->cd", trials, trials) / (
            trials.shape[0] * trials.shape[2]
        )
        whitener = _inv_sqrt_psd(mean_cov)
        out[sel] = np.einsum("cd,tds->tcs", whitener, trials)
    return epochs.with_data(out)


@dataclass(frozen=True, eq=False)
class UnionMontage:
    """The union of several datasets' electrodes, with presence masks.

    ``presence`` maps each source dataset name to a boolean vector over the
    union montage marking which electrodes that dataset records.
    """

    montage: Montage
    presence: dict

    def __post_init__(self):
        presence = {}
        for key, mask in self.presence.items():
            mask = np.array(mask, dtype=bool)
            if mask.shape != (len(self.montage),):
                raise ValueError(
                    f"presence mask for {key!r} must cover the union montage"
                )
            mask.setflags(write=False)
            presence[str(key)] = mask
        object.__setattr__(self, "presence", presence)


def union_montage(master, datasets):
    """Union montage of the named electrode sets, positioned from ``master``.

    ``datasets`` maps dataset names to their channel-name lists. Electrode
    order follows ``master``; names unknown to the master montage are an
    error.
    """
    wanted = set()
    for ds_name, names in datasets.items():
        for nm in names:
            master.index(nm)  # raises on unknown electrodes
            wanted.add(nm)
    union_names = [nm for nm in master.names if nm in wanted]
    montage = master.subset(union_names)
    presence = {
        ds_name: np.isin(union_names, list(names))
        for ds_name, names in datasets.items()
    }
    return UnionMontage(montage, presence)


def map_to_union(epochs, union, graph, target_names):
    """Map a dataset onto the union montage and select target channels.

    Present channels are reordered into union positions and pass through
    bit-identical; every union electrode the dataset lacks is reconstructed
    per time sample with the closed-form graph interpolation; finally the
    ``target_names`` rows are returned in the given order. When the dataset
    already contains every target channel, no interpolation runs at all.
    """
    montage = union.montage
    if graph.montage != montage:
        raise ValueError("graph montage does not match the union montage")
    unknown = [nm for nm in epochs.channel_names if nm not in set(montage.names)]
    if unknown:
        raise ValueError("channels not in the union montage: " + ", ".join(unknown))
    target_names = tuple(target_names)
    unknown = [nm for nm in target_names if nm not in set(montage.names)]
    if unknown:
        raise ValueError("target channels not in the union montage: " + ", ".join(unknown))

    have = set(epochs.channel_names)
    if all(nm in have for nm in target_names):
        rows = [epochs.channel_names.index(nm) for nm in target_names]
        return epochs.with_data(epochs.data[:, rows, :], channel_names=target_names)

    n_union = len(montage)
    present_union = [montage.index(nm) for nm in epochs.channel_names]
    absent = sorted(set(range(n_union)) - set(present_union))
    mask = MaskSpec.from_missing_indices(montage, absent)

    flat = epochs.data.transpose(1, 0, 2).reshape(epochs.n_channels, -1)
    full = np.empty((n_union, flat.shape[1]))
    full[present_union] = flat
    observed = full[list(mask.observed)]
    full = interpolate(build_laplacian(graph), observed, mask)

    rows = [montage.index(nm) for nm in target_names]
    out = full[rows].reshape(len(rows), epochs.n_trials, epochs.n_samples)
    return epochs.with_data(out.transpose(1, 0, 2), channel_names=target_names)


def save_epochs(epochs, path):
    """Write an EpochSet to an EPB1 file."""
    if epochs.labels is None:
        name_block = json.dumps(list(epochs.channel_names), separators=(",", ":"))
    else:
        name_block = json.dumps(
            [list(epochs.channel_names), list(epochs.labels)], separators=(",", ":")
        )
    block = name_block.encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                EPB1_MAGIC,
                epochs.n_trials,
                epochs.n_channels,
                epochs.n_samples,
                epochs.rate,
                len(block),
            )
        )
        fh.write(block)
        fh.write(epochs.data.astype("<f4").tobytes(order="C"))


def load_epochs(path):
    """Read an EPB1 file; rejects wrong magic, truncation, and trailing bytes."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated EPB1 header")
    magic, n_trials, n_channels, n_samples, rate, block_len = _HEADER.unpack_from(raw)
    if magic != EPB1_MAGIC:
        raise ValueError(f"{path}: not an EPB1 file (magic {magic!r})")
    body_start = _HEADER.size + block_len
    expected = body_start + n_trials * n_channels * n_samples * 4
    if len(raw) < expected:
        raise ValueError(f"{path}: truncated EPB1 payload")
    if len(raw) > expected:
        raise ValueError(f"{path}: trailing bytes after EPB1 payload")
    try:
        names = json.loads(raw[_HEADER.size : body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: bad EPB1 name block ({exc})") from exc
    labels = None
    if (
        isinstance(names, list)
        and len(names) == 2
        and isinstance(names[0], list)
        and isinstance(names[1], list)
    ):
        names, labels = names
    if not isinstance(names, list) or not all(isinstance(nm, str) for nm in names):
        raise ValueError(f"{path}: EPB1 name block must be a JSON array of strings")
    data = (
        np.frombuffer(raw, dtype="<f4", count=n_trials * n_channels * n_samples,
                      offset=body_start)
        .reshape(n_trials, n_channels, n_samples)
        .astype(float)
    )
    return EpochSet(data, float(rate), tuple(names),
                    tuple(labels) if labels is not None else None)
