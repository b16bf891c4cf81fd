import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hk_chaos.kernel import KernelSpec, build_regularized_kernel
from hk_chaos.noise import NoiseBundle, Rho0Spec, generate
from hk_chaos.particles import (
    NumericalBlowup,
    ParticleEnsemble,
    SimConfig,
    drift_brute,
    drift_fast,
    drift_tabulated,
    simulate,
)

GAUSS = Rho0Spec(family="gaussian", std=0.5)
SHARP = KernelSpec(1.0)


def const_sigma(t, x):
    return 1.0


def zero_sigma(t, x):
    return 0.0


class TestDriftBrute:
    def test_two_particles_hand_value(self):
        # drift_0 = -(1/1) * k(0 - 0.5) = 0.5, drift_1 symmetric
        np.testing.assert_allclose(drift_brute(np.array([0.0, 0.5]), SHARP), [0.5, -0.5])

    def test_three_particles_hand_value(self):
        # x = (-1, 0, 1); outer pair separated by exactly 2R: no interaction
        # between them, each attracted to the center with force 1/2.
        np.testing.assert_allclose(
            drift_brute(np.array([-1.0, 0.0, 1.0]), SHARP), [0.5, 0.0, -0.5]
        )

    def test_window_boundary_inclusive(self):
        # separation exactly R participates
        np.testing.assert_allclose(drift_brute(np.array([0.0, 1.0]), SHARP), [1.0, -1.0])

    def test_far_apart_no_interaction(self):
        np.testing.assert_allclose(drift_brute(np.array([0.0, 5.0]), SHARP), [0.0, 0.0])

    def test_single_particle_zero(self):
        np.testing.assert_array_equal(drift_brute(np.array([3.0]), SHARP), [0.0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            drift_brute(np.array([]), SHARP)

    def test_regularized_matches_sharp_when_separations_small(self):
        kern = build_regularized_kernel(1.0, 0.3)
        x = np.random.default_rng(0).uniform(-0.45, 0.45, 50)  # all gaps within R
        np.testing.assert_allclose(drift_brute(x, kern), drift_brute(x, SHARP), atol=1e-14)


class TestDriftFast:
    @pytest.mark.parametrize("n", [10, 100, 1000])
    def test_matches_brute_random(self, n):
        rng = np.random.default_rng(n)
        for trial in range(100):
            x = rng.uniform(-3.0, 3.0, n)
            np.testing.assert_allclose(
                drift_fast(x, 1.0), drift_brute(x, SHARP), atol=1e-12
            )

    def test_matches_brute_exact_ties(self):
        # separations exactly R on representable values: the inclusive
        # window boundary must agree between both evaluations
        x = np.array([-1.5, -0.5, -0.5, 0.5, 0.5, 1.5, 2.5])
        np.testing.assert_allclose(drift_fast(x, 1.0), drift_brute(x, SHARP), atol=1e-12)

    def test_matches_brute_all_coincident(self):
        x = np.full(17, 0.25)
        np.testing.assert_allclose(drift_fast(x, 1.0), drift_brute(x, SHARP), atol=1e-12)

    def test_unsorted_input(self):
        rng = np.random.default_rng(5)
        x = rng.permutation(np.linspace(-2, 2, 31))
        np.testing.assert_allclose(drift_fast(x, 1.0), drift_brute(x, SHARP), atol=1e-12)

    @given(st.integers(min_value=2, max_value=64), st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=50, deadline=None)
    def test_property_matches_brute(self, n, seed):
        rng = np.random.default_rng(seed)
        # quantized positions generate many exact-R ties
        x = np.round(rng.uniform(-2.0, 2.0, n) * 4.0) / 4.0
        np.testing.assert_allclose(drift_fast(x, 1.0), drift_brute(x, SHARP), atol=1e-12)

    def test_mean_force_is_zero(self):
        # pairwise antisymmetry: the drift sums to zero
        x = np.random.default_rng(9).uniform(-2, 2, 500)
        assert abs(drift_fast(x, 1.0).sum()) <= 1e-10


class TestDriftTabulated:
    def test_exact_inside_confidence_window(self):
        # the tabulation is linear interpolation of a linear function there
        kern = build_regularized_kernel(1.0, 0.3)
        x = np.random.default_rng(2).uniform(-0.45, 0.45, 60)
        np.testing.assert_allclose(
            drift_tabulated(x, kern), drift_brute(x, kern), atol=1e-14
        )

    def test_close_to_quadrature_in_layer(self):
        kern = build_regularized_kernel(1.0, 0.3)
        x = np.random.default_rng(4).uniform(-2.0, 2.0, 200)
        assert np.max(np.abs(drift_tabulated(x, kern) - drift_brute(x, kern))) <= 2e-4


def _bundle(seed, N, n_steps, dt, rho0=GAUSS):
    return generate(seed, N, n_steps, dt, rho0)


class TestSimulate:
    def test_deterministic(self):
        cfg = SimConfig(N=16, T=0.1, dt=0.01)
        bundle = _bundle(42, 16, 10, 0.01)
        a = simulate(cfg, bundle, const_sigma)
        b = simulate(cfg, bundle, const_sigma)
        np.testing.assert_array_equal(a[0.1].positions, b[0.1].positions)

    def test_pure_common_noise_is_rigid_shift(self):
        # kernel off, sigma = 0: every particle moves by nu * W_T exactly
        cfg = SimConfig(N=8, T=0.5, dt=0.01, nu=0.7, kernel_mode="none")
        bundle = _bundle(3, 8, 50, 0.01)
        out = simulate(cfg, bundle, zero_sigma)
        expected = bundle.initial_opinions + 0.7 * bundle.W_increments[:50].sum()
        np.testing.assert_allclose(out[0.5].positions, expected, atol=1e-12)

    def test_common_noise_translation_invariance(self):
        # the interaction depends only on differences, so adding nu*W to
        # every particle commutes with the dynamics
        n_steps, dt = 50, 0.01
        bundle = _bundle(11, 32, n_steps, dt)
        with_w = simulate(SimConfig(N=32, T=0.5, dt=dt, nu=0.5), bundle, const_sigma)
        no_w = simulate(SimConfig(N=32, T=0.5, dt=dt, nu=0.0), bundle, const_sigma)
        shift = 0.5 * bundle.W_increments[:n_steps].sum()
        np.testing.assert_allclose(
            with_w[0.5].positions, no_w[0.5].positions + shift, atol=1e-9
        )

    def test_brownian_variance_growth(self):
        # kernel off, sigma = 1, nu = 0: positions are Brownian motions
        N, n_steps, dt = 10**4, 20, 0.01
        cfg = SimConfig(N=N, T=0.2, dt=dt, nu=0.0, kernel_mode="none")
        bundle = _bundle(7, N, n_steps, dt)
        out = simulate(cfg, bundle, const_sigma)
        growth = out[0.2].positions.var() - bundle.initial_opinions.var()
        assert abs(growth - 0.2) / 0.2 <= 0.05

    def test_mean_conserved_without_noise(self):
        cfg = SimConfig(N=64, T=0.5, dt=0.01, nu=0.0)
        bundle = _bundle(21, 64, 50, 0.01)
        out = simulate(cfg, bundle, zero_sigma)
        assert abs(out[0.5].positions.mean() - bundle.initial_opinions.mean()) <= 1e-10

    def test_deterministic_cluster_contraction(self):
        # two groups of N/2 coincident particles at +-d/2, d < R: each
        # particle feels force -(N/2)d/(N-1), so the gap satisfies
        # d' = -(N/(N-1)) d and d(t) = d0 exp(-N t/(N-1)).
        dt, n_steps = 1e-4, 5000
        x0 = np.concatenate([np.full(5, -0.25), np.full(5, 0.25)])
        bundle = NoiseBundle(
            seed=0,
            dt=dt,
            n_steps=n_steps,
            N=10,
            W_increments=np.zeros(n_steps),
            B_increments=np.zeros((10, n_steps)),
            initial_opinions=x0,
        )
        cfg = SimConfig(N=10, T=0.5, dt=dt, nu=0.0)
        out = simulate(cfg, bundle, zero_sigma)
        gap = out[0.5].positions.max() - out[0.5].positions.min()
        assert gap == pytest.approx(0.5 * np.exp(-0.5 * 10.0 / 9.0), rel=1e-3)

    def test_exchangeability(self):
        # permuting (initial opinions, idiosyncratic paths) together
        # permutes the trajectories
        n_steps, dt = 30, 0.01
        bundle = _bundle(13, 16, n_steps, dt)
        perm = np.random.default_rng(1).permutation(16)
        permuted = NoiseBundle(
            seed=bundle.seed,
            dt=dt,
            n_steps=n_steps,
            N=16,
            W_increments=bundle.W_increments,
            B_increments=bundle.B_increments[perm],
            initial_opinions=bundle.initial_opinions[perm],
        )
        cfg = SimConfig(N=16, T=0.3, dt=dt)
        base = simulate(cfg, bundle, const_sigma)
        swapped = simulate(cfg, permuted, const_sigma)
        np.testing.assert_allclose(
            swapped[0.3].positions, base[0.3].positions[perm], atol=1e-12
        )

    def test_checkpoints_include_requested_times(self):
        cfg = SimConfig(N=4, T=0.1, dt=0.01, checkpoint_times=(0.0, 0.05))
        out = simulate(cfg, _bundle(2, 4, 10, 0.01), const_sigma)
        assert set(out) == {0.0, 0.05, 0.1}
        np.testing.assert_array_equal(out[0.0].positions, _bundle(2, 4, 10, 0.01).initial_opinions)

    def test_regularized_mode_runs(self):
        cfg = SimConfig(N=32, T=0.05, dt=0.01, kernel_mode="regularized", tau=0.5)
        out = simulate(cfg, _bundle(4, 32, 5, 0.01), const_sigma)
        assert out[0.05].positions.shape == (32,)


class TestValidation:
    @pytest.mark.filterwarnings("ignore:overflow")
    def test_blowup_detected(self):
        def exploding(t, x):
            return 1e160 * x  # multiplicative growth overflows to inf

        cfg = SimConfig(N=4, T=0.1, dt=0.01, kernel_mode="none")
        with pytest.raises(NumericalBlowup):
            simulate(cfg, _bundle(1, 4, 10, 0.01), exploding)

    def test_non_finite_positions_rejected(self):
        with pytest.raises(NumericalBlowup):
            ParticleEnsemble(positions=np.array([0.0, np.nan]), time=0.0)

    def test_t_not_multiple_of_dt(self):
        with pytest.raises(ValueError):
            SimConfig(N=4, T=0.105, dt=0.01)

    def test_checkpoint_off_grid(self):
        cfg = SimConfig(N=4, T=0.1, dt=0.01, checkpoint_times=(0.055,))
        with pytest.raises(ValueError):
            simulate(cfg, _bundle(1, 4, 10, 0.01), const_sigma)

    def test_bundle_too_small(self):
        cfg = SimConfig(N=8, T=0.1, dt=0.01)
        with pytest.raises(ValueError):
            simulate(cfg, _bundle(1, 4, 10, 0.01), const_sigma)

    def test_bundle_dt_mismatch(self):
        cfg = SimConfig(N=4, T=0.1, dt=0.01)
        with pytest.raises(ValueError):
            simulate(cfg, _bundle(1, 4, 10, 0.02), const_sigma)
