import numpy as np
import pytest

from eegraph import (
    EpochSet,
    Montage,
    SpectralEstimationConfig,
    default_spectral_config,
    spatial_graph,
    synthetic_montage,
    wpli_matrix,
    wpli_weighted_spatial,
)

RATE = 160.0


def sinusoid_pair(phase_lag, n_trials=8, seconds=2.0, freq=10.0):
    t = np.arange(int(seconds * RATE)) / RATE
    x = np.sin(2 * np.pi * freq * t)
    y = np.sin(2 * np.pi * freq * t - phase_lag)
    data = np.stack([np.stack([x, y])] * n_trials)
    return EpochSet(data, RATE, ("X", "Y"))


class TestSpatialGraph:
    def test_edge_within_radius(self):
        # Two electrodes 0.03 apart on the sphere.
        a = np.array([0.0, 0.0, 1.0])
        b = np.array([0.03, 0.0, np.sqrt(1 - 0.03**2)])
        m = Montage(("A", "B"), np.stack([a, b]))
        assert np.linalg.norm(a - b) < 0.05
        assert spatial_graph(m, 0.05).weights[0, 1] == 1.0
        assert spatial_graph(m, 0.01).weights[0, 1] == 0.0

    def test_zero_diagonal(self):
        g = spatial_graph(synthetic_montage(12), 0.8)
        assert np.all(np.diagonal(g.weights) == 0.0)

    def test_monotone_in_radius(self):
        m = synthetic_montage(16)
        for r1, r2 in [(0.3, 0.6), (0.6, 1.2), (1.2, 2.0)]:
            e1 = spatial_graph(m, r1).weights
            e2 = spatial_graph(m, r2).weights
            assert np.all(e2[e1 == 1.0] == 1.0)

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError, match="radius"):
            spatial_graph(synthetic_montage(3), 0.0)


class TestWpliMatrix:
    def test_quarter_period_lag_saturates(self):
        cfg = default_spectral_config(RATE)
        w = wpli_matrix(sinusoid_pair(np.pi / 2), cfg)
        assert w[0, 1] >= 0.99

    def test_zero_lag_is_zero(self):
        cfg = default_spectral_config(RATE)
        assert wpli_matrix(sinusoid_pair(0.0), cfg)[0, 1] == 0.0

    def test_independent_noise_is_small(self):
        rng = np.random.default_rng(7)
        data = rng.standard_normal((200, 2, int(2 * RATE)))
        w = wpli_matrix(EpochSet(data, RATE, ("X", "Y")), default_spectral_config(RATE))
        assert w[0, 1] <= 0.2

    def test_output_shape_bounds_symmetry(self):
        rng = np.random.default_rng(3)
        names = tuple(f"C{i}" for i in range(5))
        ep = EpochSet(rng.standard_normal((6, 5, 320)), RATE, names)
        w = wpli_matrix(ep, default_spectral_config(RATE))
        assert w.shape == (5, 5)
        assert np.array_equal(w, w.T)
        assert np.all(np.diagonal(w) == 0.0)
        assert w.min() >= 0.0 and w.max() <= 1.0

    def test_scale_invariance(self):
        rng = np.random.default_rng(11)
        base = rng.standard_normal((20, 3, 320))
        names = ("A", "B", "C")
        cfg = default_spectral_config(RATE)
        w1 = wpli_matrix(EpochSet(base, RATE, names), cfg)
        scales = np.array([4.0, 0.25, 11.0])[None, :, None]
        w2 = wpli_matrix(EpochSet(base * scales, RATE, names), cfg)
        assert np.abs(w1 - w2).max() <= 1e-9

    def test_band_above_nyquist_rejected(self):
        ep = sinusoid_pair(0.5)
        cfg = SpectralEstimationConfig(segment_length=160, band=(2.0, 90.0))
        with pytest.raises(ValueError, match="Nyquist"):
            wpli_matrix(ep, cfg)

    def test_too_short_trials_rejected(self):
        rng = np.random.default_rng(1)
        ep = EpochSet(rng.standard_normal((3, 2, 64)), RATE, ("A", "B"))
        with pytest.raises(ValueError, match="segment"):
            wpli_matrix(ep, default_spectral_config(RATE))


class TestWpliWeighting:
    def test_absent_edge_stays_absent(self):
        m = synthetic_montage(4)
        spatial = spatial_graph(m, 1.0)
        wpli = np.ones((4, 4)) - np.eye(4)
        combined = wpli_weighted_spatial(spatial, wpli)
        assert np.all(combined.weights[spatial.weights == 0.0] == 0.0)

    def test_present_edge_with_unit_wpli(self):
        m = synthetic_montage(4)
        spatial = spatial_graph(m, 2.0)  # fully connected at this radius
        wpli = np.ones((4, 4)) - np.eye(4)
        combined = wpli_weighted_spatial(spatial, wpli)
        assert np.all(combined.weights[spatial.weights == 1.0] == 1.0)

    def test_symmetric_product(self):
        rng = np.random.default_rng(2)
        m = synthetic_montage(5)
        spatial = spatial_graph(m, 2.0)
        raw = rng.random((5, 5))
        wpli = np.triu(raw, 1) + np.triu(raw, 1).T
        combined = wpli_weighted_spatial(spatial, wpli)
        assert np.array_equal(combined.weights, combined.weights.T)

    def test_dimension_mismatch(self):
        spatial = spatial_graph(synthetic_montage(4), 1.0)
        with pytest.raises(ValueError, match="shape"):
            wpli_weighted_spatial(spatial, np.zeros((3, 3)))
