import numpy as np
import pytest
from scipy.linalg import eig
from scipy.stats import spearmanr

from nifa.model import DataMatrix, spline_basis
from nifa.pretrain import (
    AnchorSet,
    DegenerateGeometryError,
    DiffusionConfig,
    anchor_residual_variance,
    anchors_from_external,
    default_epsilon_dm,
    default_epsilon_local,
    diffusion_coordinates,
    diffusion_spectrum,
    estimate_dimension,
    kernel_matrix,
    local_covariance,
    mean_local_eigenvalues,
    normalized_laplacian,
    run_pretraining,
)
from nifa.simulate import gen_swiss_roll


def circle_data(n=60, seed=0):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 2 * np.pi, n))
    return DataMatrix(np.column_stack([np.cos(t), np.sin(t)])), t


class TestKernel:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        dm = DataMatrix(rng.standard_normal((12, 3)))
        eps = 1.3
        kern = kernel_matrix(dm, eps)
        for i in range(12):
            for j in range(12):
                d2 = np.sum((dm.values[i] - dm.values[j]) ** 2)
                assert kern[i, j] == pytest.approx(np.exp(-d2 / eps**2))

    def test_symmetric_unit_diagonal(self):
        rng = np.random.default_rng(2)
        kern = kernel_matrix(DataMatrix(rng.standard_normal((10, 2))), 0.7)
        assert np.allclose(kern, kern.T)
        assert np.allclose(np.diag(kern), 1.0)

    def test_rejects_nonpositive_epsilon(self):
        with pytest.raises(ValueError):
            kernel_matrix(DataMatrix(np.eye(3)), 0.0)


class TestLaplacian:
    def test_rows_sum_to_zero(self):
        rng = np.random.default_rng(3)
        kern = kernel_matrix(DataMatrix(rng.standard_normal((15, 2))), 1.0)
        lap = normalized_laplacian(kern, 1.0)
        assert np.allclose(lap @ np.ones(15), 0.0, atol=1e-12)

    def test_epsilon_scaling(self):
        rng = np.random.default_rng(4)
        kern = kernel_matrix(DataMatrix(rng.standard_normal((8, 2))), 1.0)
        assert np.allclose(normalized_laplacian(kern, 2.0) * 4, normalized_laplacian(kern, 1.0))


class TestSpectrum:
    def test_matches_dense_eig_oracle(self):
        # independent oracle: eigendecompose -L directly (non-symmetric)
        dm, _ = circle_data(40, seed=5)
        eps = default_epsilon_dm(dm)
        cfg = DiffusionConfig(epsilon_dm=eps, Q=4)
        mu, coords = diffusion_spectrum(dm, cfg)
        lap = normalized_laplacian(kernel_matrix(dm, eps), eps)
        vals = np.sort(np.real(eig(-lap)[0]))
        assert vals[0] == pytest.approx(0.0, abs=1e-8)
        assert np.allclose(mu, vals[1:5], rtol=1e-8, atol=1e-10)

    def test_coordinates_are_eigenvectors(self):
        dm, _ = circle_data(35, seed=6)
        eps = default_epsilon_dm(dm)
        cfg = DiffusionConfig(epsilon_dm=eps, Q=3)
        mu, coords = diffusion_spectrum(dm, cfg)
        lap = normalized_laplacian(kernel_matrix(dm, eps), eps)
        for q in range(3):
            v = coords[:, q]
            assert np.linalg.norm(v) == pytest.approx(1.0)
            assert np.allclose(-lap @ v, mu[q] * v, atol=1e-8)

    def test_eigenvalues_ascending_nonnegative(self):
        dm, _ = circle_data(30, seed=7)
        mu, _ = diffusion_spectrum(dm, DiffusionConfig(Q=5))
        assert np.all(np.diff(mu) >= -1e-12)
        assert mu[0] > -1e-10

    def test_sign_convention_deterministic(self):
        dm, _ = circle_data(30, seed=8)
        _, c1 = diffusion_spectrum(dm, DiffusionConfig(Q=3))
        _, c2 = diffusion_spectrum(dm, DiffusionConfig(Q=3))
        assert np.array_equal(c1, c2)
        for q in range(3):
            lead = np.flatnonzero(np.abs(c1[:, q]) > 1e-12)[0]
            assert c1[lead, q] > 0

    def test_circle_first_coordinate_tracks_angle(self):
        # on a circle the leading nontrivial eigenfunctions are sin/cos of angle
        dm, t = circle_data(80, seed=9)
        coords = diffusion_coordinates(dm, DiffusionConfig(Q=2))
        phase = np.arctan2(coords[:, 1], coords[:, 0])
        rho = abs(spearmanr(np.unwrap(phase), t).statistic)
        assert rho > 0.95

    def test_q_bounds(self):
        dm, _ = circle_data(10)
        with pytest.raises(ValueError):
            diffusion_spectrum(dm, DiffusionConfig(Q=10))

    def test_degenerate_duplicate_rows(self):
        dm = DataMatrix(np.zeros((6, 2)) + np.array([[0, 0]] * 6))
        with pytest.raises(DegenerateGeometryError):
            default_epsilon_dm(dm)


class TestLocalGeometry:
    def test_local_covariance_brute_force(self):
        rng = np.random.default_rng(10)
        coords = rng.standard_normal((20, 3))
        eps = 1.5
        got = local_covariance(coords, 4, eps)
        acc = np.zeros((3, 3))
        for j in range(20):
            d = coords[4] - coords[j]
            if np.linalg.norm(d) <= eps:
                acc += np.outer(d, d)
        assert np.allclose(got, acc / 20)

    def test_mean_eigenvalues_descending(self):
        rng = np.random.default_rng(11)
        coords = rng.standard_normal((30, 4)) * np.array([3.0, 2.0, 1.0, 0.1])
        lam = mean_local_eigenvalues(coords, 3.0)
        assert lam.shape == (4,)
        assert np.all(np.diff(lam) <= 1e-12)

    def test_dimension_literal_rule(self):
        # isotropic 2-plane inside 4 dims: ratio rule fires at k=1 only
        rng = np.random.default_rng(12)
        coords = np.column_stack(
            [
                rng.uniform(-1, 1, 300),
                rng.uniform(-1, 1, 300),
                1e-4 * rng.standard_normal(300),
                1e-4 * rng.standard_normal(300),
            ]
        )
        assert estimate_dimension(coords, 0.3, 0.5) == 1

    def test_dimension_fallback_is_one(self):
        rng = np.random.default_rng(13)
        coords = np.column_stack(
            [rng.uniform(-1, 1, 200), 1e-5 * rng.standard_normal(200)]
        )
        assert estimate_dimension(coords, 0.2, 0.5) == 1

    def test_dimension_requires_two_columns(self):
        with pytest.raises(ValueError):
            estimate_dimension(np.ones((10, 1)), 0.5, 0.5)


class TestAnchorVariance:
    def test_ranks_map_to_grid(self):
        rng = np.random.default_rng(14)
        col = rng.standard_normal(50)
        _, u_star = anchor_residual_variance(col, 5)
        assert sorted(u_star) == pytest.approx(list(np.arange(1, 51) / 50))
        # ordering of u_star follows ordering of the column
        assert np.array_equal(np.argsort(u_star), np.argsort(col, kind="stable"))

    def test_matches_lstsq_oracle(self):
        rng = np.random.default_rng(15)
        col = rng.standard_normal(40)
        L = 4
        var, u_star = anchor_residual_variance(col, L)
        design = np.column_stack([np.ones(40), spline_basis(u_star, L)])
        beta = np.linalg.solve(design.T @ design, design.T @ col)
        rss = np.sum((col - design @ beta) ** 2)
        assert var == pytest.approx(rss / (40 - L - 2), rel=1e-10)

    def test_near_zero_for_monotone_column(self):
        # a column that is already a piecewise-linear function of its ranks
        n, L = 60, 6
        u = (np.arange(1, n + 1)) / n
        rng = np.random.default_rng(16)
        perm = rng.permutation(n)
        col = (2 * u + 0.5)[perm]
        var, _ = anchor_residual_variance(col, L)
        assert var < 1e-20

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            anchor_residual_variance(np.arange(10.0), 10)


class TestPipeline:
    def test_external_anchor_set(self):
        rng = np.random.default_rng(17)
        coords = rng.uniform(size=(40, 2))
        a = anchors_from_external(coords, 5)
        assert a.source == "external"
        assert a.n_anchors == 2
        assert np.all(a.residual_variances > 0)

    def test_anchor_set_validation(self):
        with pytest.raises(ValueError):
            AnchorSet(np.ones((5, 1)), np.array([-1.0]))
        with pytest.raises(ValueError):
            AnchorSet(np.ones((5, 1)), np.array([1.0]), source="other")

    def test_swiss_roll_recovers_generator(self):
        # the roll is a long thin strip; the kernel bandwidth must stay below
        # the gap between windings (2*pi) or the embedding short-circuits them
        dm, u, v = gen_swiss_roll(300, seed=18)
        anchor = run_pretraining(dm, DiffusionConfig(epsilon_dm=1.5), 20)
        assert anchor.n_anchors == 1
        rho = abs(spearmanr(anchor.coordinates[:, 0], u).statistic)
        assert rho > 0.9

    def test_offset_clipped_to_q(self):
        dm, _, _ = gen_swiss_roll(120, seed=19)
        a = run_pretraining(dm, DiffusionConfig(Q=2, dimension_offset=10), 10)
        assert a.n_anchors == 2

    def test_default_epsilon_local_positive(self):
        rng = np.random.default_rng(20)
        assert default_epsilon_local(rng.standard_normal((30, 2))) > 0
