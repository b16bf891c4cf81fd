import numpy as np
import pytest

from hk_chaos.noise import NoiseBundle, Rho0Spec, generate, replica_seed, sample_initial

GAUSS = Rho0Spec(family="gaussian", mu=0.0, std=0.5)


class TestGenerate:
    def test_deterministic(self):
        a = generate(42, 8, 100, 0.01, GAUSS)
        b = generate(42, 8, 100, 0.01, GAUSS)
        np.testing.assert_array_equal(a.W_increments, b.W_increments)
        np.testing.assert_array_equal(a.B_increments, b.B_increments)
        np.testing.assert_array_equal(a.initial_opinions, b.initial_opinions)

    def test_gaussian_moments(self):
        dt = 0.01
        bundle = generate(7, 1, 10**6, dt, GAUSS)
        dw = bundle.W_increments
        assert abs(dw.mean()) <= 4 * np.sqrt(dt / 10**6)
        assert abs(dw.var() - dt) / dt <= 0.01

    def test_w_b_independence(self):
        bundle = generate(3, 1, 10**6, 0.01, GAUSS)
        corr = np.corrcoef(bundle.W_increments, bundle.B_increments[0])[0, 1]
        assert abs(corr) <= 0.005

    def test_changing_n_preserves_w_and_b_prefix(self):
        small = generate(42, 4, 50, 0.01, GAUSS)
        big = generate(42, 16, 50, 0.01, GAUSS)
        np.testing.assert_array_equal(small.W_increments, big.W_increments)
        np.testing.assert_array_equal(small.B_increments, big.B_increments[:4])
        np.testing.assert_array_equal(small.initial_opinions, big.initial_opinions[:4])

    def test_extending_steps_preserves_prefix(self):
        short = generate(42, 4, 50, 0.01, GAUSS)
        long = generate(42, 4, 200, 0.01, GAUSS)
        np.testing.assert_array_equal(short.W_increments, long.W_increments[:50])
        np.testing.assert_array_equal(short.B_increments, long.B_increments[:, :50])

    def test_invalid_sizes(self):
        with pytest.raises(ValueError):
            generate(1, -1, 10, 0.01, GAUSS)
        with pytest.raises(ValueError):
            generate(1, 2, 0, 0.01, GAUSS)
        with pytest.raises(ValueError):
            generate(1, 2, 10, 0.0, GAUSS)

    def test_coarsen_sums_increments(self):
        fine = generate(5, 2, 100, 0.001, GAUSS)
        coarse = fine.coarsen(10)
        assert coarse.n_steps == 10
        assert coarse.dt == pytest.approx(0.01)
        np.testing.assert_allclose(
            coarse.W_increments, fine.W_increments.reshape(10, 10).sum(axis=1)
        )
        assert coarse.W_path[-1] == pytest.approx(fine.W_path[-1])

    def test_w_path_starts_at_zero(self):
        bundle = generate(5, 1, 10, 0.01, GAUSS)
        assert bundle.W_path[0] == 0.0
        assert bundle.W_path.size == 11


class TestSampleInitial:
    def test_gaussian_clt_bound(self):
        draws = sample_initial(GAUSS, 10**6, 11)
        assert abs(draws.mean()) <= 4 * (0.5 / 10**3)

    def test_two_cluster_mass_split(self):
        spec = Rho0Spec(family="two_cluster", centers=(-1.0, 1.0), cluster_std=0.1)
        draws = sample_initial(spec, 10**6, 13)
        frac_neg = np.mean(draws < 0)
        assert abs(frac_neg - 0.5) <= 4 * (0.5 / 10**3)

    def test_empty(self):
        assert sample_initial(GAUSS, 0, 1).size == 0

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            Rho0Spec(family="cauchy")

    def test_bump_support(self):
        spec = Rho0Spec(family="bump", a=1.5)
        draws = sample_initial(spec, 10**4, 17)
        assert np.all(np.abs(draws) <= 1.5)

    @pytest.mark.parametrize(
        "spec",
        [
            GAUSS,
            Rho0Spec(family="two_cluster"),
            Rho0Spec(family="bump", a=1.0),
        ],
    )
    def test_density_has_unit_mass(self, spec):
        lo, hi = spec.support()
        x = np.linspace(lo, hi, 200_001)
        assert np.trapezoid(spec.density(x), x) == pytest.approx(1.0, abs=1e-6)


class TestReplicaSeeds:
    def test_distinct_and_deterministic(self):
        seeds = [replica_seed(42, m) for m in range(100)]
        assert len(set(seeds)) == 100
        assert seeds == [replica_seed(42, m) for m in range(100)]

    def test_replica_streams_uncorrelated(self):
        a = generate(replica_seed(42, 0), 1, 10**5, 0.01, GAUSS)
        b = generate(replica_seed(42, 1), 1, 10**5, 0.01, GAUSS)
        corr = np.corrcoef(a.W_increments, b.W_increments)[0, 1]
        assert abs(corr) <= 0.02
