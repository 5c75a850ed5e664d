import numpy as np
import pytest

from rsma_rl.channel import (
    advance_true_channel,
    apply_estimation_error,
    dbm_to_linear,
    estimation_error_variance,
    make_rng,
    sample_true_channel,
)


class TestDbmToLinear:
    def test_reference_points(self):
        assert dbm_to_linear(0.0) == 1.0
        assert dbm_to_linear(30.0) == 1000.0
        assert dbm_to_linear(40.0) == 10000.0

    def test_ten_db_is_a_decade(self):
        for a in np.linspace(-40, 70, 23):
            assert dbm_to_linear(a + 10.0) == pytest.approx(
                10.0 * dbm_to_linear(a), rel=1e-14
            )

    def test_monotone(self):
        grid = np.linspace(-30, 60, 50)
        vals = [dbm_to_linear(a) for a in grid]
        assert np.all(np.diff(vals) > 0)
        assert np.all(np.asarray(vals) > 0)

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError):
            dbm_to_linear(bad)


class TestTrueChannel:
    def test_deterministic_given_seed(self):
        a = sample_true_channel(make_rng(7), 4, 4)
        b = sample_true_channel(make_rng(7), 4, 4)
        np.testing.assert_array_equal(a, b)

    def test_rejects_fewer_antennas_than_users(self):
        with pytest.raises(ValueError):
            sample_true_channel(make_rng(0), 2, 4)

    def test_unit_entry_power(self):
        # Monte-Carlo oracle: |entry|^2 is Exp(1), so the sample mean of
        # n = 1e5 draws should sit within 1.96 / sqrt(n) of 1.
        n = 100_000
        h = sample_true_channel(make_rng(123), n, 1)  # n x 1 matrix of iid entries
        power = np.abs(h) ** 2
        assert abs(power.mean() - 1.0) < 1.96 / np.sqrt(n)

    def test_real_imag_balance(self):
        h = sample_true_channel(make_rng(5), 100, 100)
        assert h.real.var() == pytest.approx(0.5, rel=0.05)
        assert h.imag.var() == pytest.approx(0.5, rel=0.05)


class TestEstimationError:
    def test_variance_formula(self):
        assert estimation_error_variance(1.0) == 1.0
        assert estimation_error_variance(1e4) == pytest.approx(10 ** (-2.4), rel=1e-12)

    def test_perfect_csit_is_exact(self):
        true = sample_true_channel(make_rng(1), 4, 4)
        real = apply_estimation_error(true, 1e4, make_rng(2), perfect_csit=True)
        np.testing.assert_array_equal(real.true_channel, real.estimated_channel)

    def test_rejects_non_positive_power(self):
        true = sample_true_channel(make_rng(1), 2, 2)
        for bad in (0.0, -1.0, np.nan):
            with pytest.raises(ValueError):
                apply_estimation_error(true, bad, make_rng(0))

    @pytest.mark.parametrize("p_lin", [1.0, 1e2, 1e4])
    def test_error_energy_scaling(self, p_lin):
        # empirical mean of ||e_k||^2 vs p^-0.6 within 3 standard errors
        m, k, n = 4, 4, 4000  # n draws x k columns > 1e4 samples
        rng = make_rng(99)
        true = sample_true_channel(make_rng(0), m, k)
        energies = np.empty((n, k))
        for i in range(n):
            real = apply_estimation_error(true, p_lin, rng)
            err = real.estimated_channel - real.true_channel
            energies[i] = np.sum(np.abs(err) ** 2, axis=0)
        samples = energies.ravel()
        expected = p_lin**-0.6
        sem = samples.std(ddof=1) / np.sqrt(samples.size)
        assert abs(samples.mean() - expected) < 3 * sem

    def test_deterministic(self):
        true = sample_true_channel(make_rng(3), 4, 2)
        a = apply_estimation_error(true, 100.0, make_rng(11))
        b = apply_estimation_error(true, 100.0, make_rng(11))
        np.testing.assert_array_equal(a.estimated_channel, b.estimated_channel)


class TestGaussMarkov:
    def test_rho_zero_is_fresh_draw(self):
        prev = sample_true_channel(make_rng(0), 2, 2)
        nxt = advance_true_channel(prev, 0.0, make_rng(1))
        np.testing.assert_array_equal(nxt, sample_true_channel(make_rng(1), 2, 2))

    def test_correlation_and_marginal(self):
        rng = make_rng(42)
        h = sample_true_channel(rng, 50, 50)
        nxt = advance_true_channel(h, 0.9, rng)
        corr = np.mean(np.real(nxt * np.conj(h)))
        assert corr == pytest.approx(0.9, abs=0.03)
        assert np.mean(np.abs(nxt) ** 2) == pytest.approx(1.0, abs=0.05)

    def test_rejects_bad_rho(self):
        prev = sample_true_channel(make_rng(0), 2, 2)
        with pytest.raises(ValueError):
            advance_true_channel(prev, 1.5, make_rng(1))
