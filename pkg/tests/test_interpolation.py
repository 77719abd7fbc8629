import numpy as np
import pytest

from eegraph import (
    Graph,
    MaskSpec,
    SingularMaskError,
    build_laplacian,
    interpolate,
    partition_laplacian,
    spherical_spline_interpolate,
    synthetic_montage,
    total_variation,
)
from conftest import oracle_fill, random_connected_graph


def path3():
    return Graph(synthetic_montage(3), np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], float))


class TestMaskSpec:
    def test_partition_is_complete_and_disjoint(self):
        m = synthetic_montage(5)
        mask = MaskSpec.from_missing_indices(m, [3, 1])
        assert mask.missing == (1, 3)
        assert mask.observed == (0, 2, 4)

    def test_from_names(self):
        m = synthetic_montage(4)
        mask = MaskSpec.from_missing_names(m, [m.names[2]])
        assert mask.missing == (2,)

    def test_rejects_all_missing(self):
        m = synthetic_montage(3)
        with pytest.raises(ValueError, match="observed"):
            MaskSpec.from_missing_indices(m, [0, 1, 2])

    def test_rejects_out_of_range(self):
        m = synthetic_montage(3)
        with pytest.raises(ValueError, match="range"):
            MaskSpec.from_missing_indices(m, [5])


class TestPartitionLaplacian:
    def test_path_middle_vertex(self):
        lap = build_laplacian(path3())
        part = partition_laplacian(lap, MaskSpec.from_missing_indices(lap.graph.montage, [1]))
        assert np.array_equal(part.l_mm, [[2.0]])
        assert np.array_equal(part.l_mo, [[-1.0, -1.0]])

    def test_empty_missing(self):
        lap = build_laplacian(path3())
        part = partition_laplacian(lap, MaskSpec.from_missing_indices(lap.graph.montage, []))
        assert part.l_mm.shape == (0, 0)
        assert part.l_mo.shape == (0, 3)

    def test_path_end_vertices(self):
        lap = build_laplacian(path3())
        part = partition_laplacian(lap, MaskSpec.from_missing_indices(lap.graph.montage, [0, 2]))
        assert np.array_equal(part.l_mm, [[1.0, 0.0], [0.0, 1.0]])
        assert np.array_equal(part.l_mo, [[-1.0], [-1.0]])

    def test_entries_match_parent(self, rng):
        g = random_connected_graph(9, rng)
        lap = build_laplacian(g)
        mask = MaskSpec.from_missing_indices(g.montage, [0, 4, 7])
        part = partition_laplacian(lap, mask)
        for bi, i in enumerate(mask.missing):
            for bj, j in enumerate(mask.missing):
                assert part.l_mm[bi, bj] == lap.matrix[i, j]
            for bj, j in enumerate(mask.observed):
                assert part.l_mo[bi, bj] == lap.matrix[i, j]

    def test_montage_mismatch(self, rng):
        lap = build_laplacian(random_connected_graph(4, rng))
        other = MaskSpec.from_missing_indices(synthetic_montage(4, prefix="Q"), [1])
        with pytest.raises(ValueError, match="montage"):
            partition_laplacian(lap, other)


class TestInterpolate:
    def test_path_midpoint(self):
        # Minimizing (s1 - 0)^2 + (s1 - 2)^2 by hand gives s1 = 1.
        lap = build_laplacian(path3())
        mask = MaskSpec.from_missing_indices(lap.graph.montage, [1])
        out = interpolate(lap, np.array([0.0, 2.0]), mask)
        assert np.allclose(out, [0.0, 1.0, 2.0])

    def test_empty_mask_is_identity(self, rng):
        lap = build_laplacian(random_connected_graph(5, rng))
        mask = MaskSpec.from_missing_indices(lap.graph.montage, [])
        s = rng.standard_normal(5)
        assert np.array_equal(interpolate(lap, s, mask), s)

    def test_constant_fill_on_connected_graph(self, rng):
        g = random_connected_graph(8, rng)
        lap = build_laplacian(g)
        mask = MaskSpec.from_missing_indices(g.montage, [1, 5, 6])
        out = interpolate(lap, np.full(5, 4.2), mask)
        assert np.allclose(out, 4.2, atol=1e-9)

    def test_matches_oracle_on_random_instances(self, rng):
        for _ in range(30):
            n = int(rng.integers(4, 21))
            g = random_connected_graph(n, rng)
            k = int(rng.integers(1, n // 2 + 1))
            mask = MaskSpec.from_missing_indices(
                g.montage, rng.choice(n, k, replace=False)
            )
            obs = rng.standard_normal(len(mask.observed))
            got = interpolate(build_laplacian(g), obs, mask)[list(mask.missing)]
            want = oracle_fill(g, obs, mask)
            assert np.linalg.norm(got - want) <= 1e-7 * max(
                np.linalg.norm(want), 1e-12
            )

    def test_gradient_condition(self, rng):
        # At the optimum, L_MM s_M + L_MO s_O vanishes.
        g = random_connected_graph(12, rng)
        lap = build_laplacian(g)
        mask = MaskSpec.from_missing_indices(g.montage, [2, 3, 9])
        obs = rng.standard_normal(9)
        s = interpolate(lap, obs, mask)
        part = partition_laplacian(lap, mask)
        grad = 2 * (part.l_mm @ s[list(mask.missing)] + part.l_mo @ obs)
        bound = 1e-8 * np.linalg.norm(lap.matrix) * np.linalg.norm(s)
        assert np.linalg.norm(grad) <= bound

    def test_variation_optimality(self, rng):
        g = random_connected_graph(9, rng)
        lap = build_laplacian(g)
        mask = MaskSpec.from_missing_indices(g.montage, [2, 5, 7])
        s = interpolate(lap, rng.standard_normal(6), mask)
        base = total_variation(lap, s)
        for _ in range(25):
            delta = rng.standard_normal(3)
            delta *= 1e-3 / np.linalg.norm(delta)
            perturbed = s.copy()
            perturbed[list(mask.missing)] += delta
            assert total_variation(lap, perturbed) >= base - 1e-10

    def test_linearity(self, rng):
        g = random_connected_graph(10, rng)
        lap = build_laplacian(g)
        mask = MaskSpec.from_missing_indices(g.montage, [0, 3, 4, 8])
        x = rng.standard_normal(6)
        y = rng.standard_normal(6)
        combo = interpolate(lap, 2.0 * x - 0.5 * y, mask)
        parts = 2.0 * interpolate(lap, x, mask) - 0.5 * interpolate(lap, y, mask)
        assert np.abs(combo - parts).max() <= 1e-9 * max(np.abs(combo).max(), 1.0)

    def test_maximum_principle(self, rng):
        for _ in range(10):
            g = random_connected_graph(11, rng)
            lap = build_laplacian(g)
            mask = MaskSpec.from_missing_indices(
                g.montage, rng.choice(11, 4, replace=False)
            )
            obs = rng.standard_normal(7)
            out = interpolate(lap, obs, mask)
            assert out.min() >= obs.min() - 1e-9
            assert out.max() <= obs.max() + 1e-9

    def test_isolated_missing_vertex_raises(self):
        m = synthetic_montage(4)
        w = np.zeros((4, 4))
        w[0, 1] = w[1, 0] = 1.0
        w[1, 2] = w[2, 1] = 1.0  # vertex 3 has no edges
        lap = build_laplacian(Graph(m, w))
        mask = MaskSpec.from_missing_indices(m, [0, 3])
        with pytest.raises(SingularMaskError) as err:
            interpolate(lap, np.zeros(2), mask)
        assert m.names[3] in str(err.value)
        assert m.names[0] not in str(err.value)

    def test_matrix_valued_signals(self, rng):
        g = random_connected_graph(7, rng)
        lap = build_laplacian(g)
        mask = MaskSpec.from_missing_indices(g.montage, [1, 4])
        block = rng.standard_normal((5, 6))
        out = interpolate(lap, block, mask)
        assert out.shape == (7, 6)
        for col in range(6):
            single = interpolate(lap, block[:, col], mask)
            assert np.allclose(out[:, col], single, atol=1e-12)


class TestSphericalSpline:
    def test_constant_fill(self, rng):
        m = synthetic_montage(40)
        mask = MaskSpec.from_missing_indices(m, rng.choice(40, 8, replace=False))
        out = spherical_spline_interpolate(m, np.full(32, 3.7), mask)
        assert np.abs(out - 3.7).max() <= 1e-6

    def test_empty_mask_is_identity(self, rng):
        m = synthetic_montage(10)
        mask = MaskSpec.from_missing_indices(m, [])
        s = rng.standard_normal(10)
        assert np.array_equal(spherical_spline_interpolate(m, s, mask), s)

    def test_first_order_harmonic_oracle(self):
        # s(p) = p_z evaluated analytically at the held-out positions.
        m = synthetic_montage(40)
        s = m.positions[:, 2]
        held = np.sort(np.random.default_rng(42).choice(40, 8, replace=False))
        mask = MaskSpec.from_missing_indices(m, held)
        out = spherical_spline_interpolate(m, s[list(mask.observed)], mask)
        rel = np.linalg.norm(out[held] - s[held]) / np.linalg.norm(s[held])
        assert rel <= 0.05

    def test_observed_pass_through(self, rng):
        m = synthetic_montage(20)
        mask = MaskSpec.from_missing_indices(m, [3, 8])
        obs = rng.standard_normal(18)
        out = spherical_spline_interpolate(m, obs, mask)
        assert np.array_equal(out[list(mask.observed)], obs)

    def test_too_few_observed(self):
        m = synthetic_montage(4)
        mask = MaskSpec.from_missing_indices(m, [0, 2])
        with pytest.raises(ValueError, match=">= 3 observed"):
            spherical_spline_interpolate(m, np.zeros(2), mask)
