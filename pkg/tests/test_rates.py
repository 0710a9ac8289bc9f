import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqkd import (
    Covariance2,
    DomainError,
    HeterodyneTransform,
    InconsistentStatisticsError,
    ProtocolKind,
    apply_sifting,
    coherent_rate_bound,
    conditional_squeezing_check,
    conditional_variance,
    effective_rate,
    gaussian_conditional_entropy,
    gaussian_entropy,
    gaussian_mutual_information,
    heterodyne_covariance_transform,
    squeezed_rate_bound,
    vacuum_entropy,
)

H0 = 0.5 * math.log2(2 * math.pi * math.e)

# the reference channel: source variance 20, half transmission, no excess noise
K_WORKED = Covariance2(20.0, 10.5, math.sqrt(0.5) * math.sqrt(399.0))


def covariances(min_var=0.05, max_var=50.0, max_rho=0.99):
    return st.tuples(
        st.floats(min_var, max_var), st.floats(min_var, max_var),
        st.floats(-max_rho, max_rho),
    ).map(lambda t: Covariance2(t[0], t[1], t[2] * math.sqrt(t[0] * t[1])))


class TestGaussianEntropy:
    def test_vacuum_value(self):
        assert gaussian_entropy(1.0) == pytest.approx(2.0470956, abs=1e-6)

    def test_quadrupling_variance_adds_one_bit(self):
        assert gaussian_entropy(4.0) == pytest.approx(gaussian_entropy(1.0) + 1.0)

    def test_zero_crossing(self):
        assert gaussian_entropy(1.0 / (2 * math.pi * math.e)) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_rejects_non_positive(self, bad):
        with pytest.raises(DomainError):
            gaussian_entropy(bad)


class TestVacuumEntropy:
    def test_default_unit(self):
        assert vacuum_entropy() == pytest.approx(2.0470956, abs=1e-6)

    def test_rescaled_unit(self):
        assert vacuum_entropy(0.25) == pytest.approx(vacuum_entropy() - 1.0)

    @given(st.floats(1e-6, 1e6))
    def test_matches_gaussian_entropy(self, n0):
        assert vacuum_entropy(n0) == gaussian_entropy(n0)


class TestConditionalVariance:
    def test_uncorrelated_no_reduction(self):
        assert conditional_variance(Covariance2(1, 1, 0)) == 1.0

    def test_partial_reduction(self):
        assert conditional_variance(Covariance2(2, 2, 1)) == 1.5

    def test_perfect_correlation_vanishes(self):
        assert conditional_variance(Covariance2(4, 9, 6)) == 0.0

    def test_degenerate_alice(self):
        with pytest.raises(DomainError):
            conditional_variance(Covariance2(0.0, 1.0, 0.0))

    @given(covariances())
    def test_never_negative(self, k):
        assert conditional_variance(k) >= 0.0


class TestGaussianConditionalEntropy:
    def test_uncorrelated_equals_vacuum(self):
        assert gaussian_conditional_entropy(Covariance2(1, 1, 0)) == vacuum_entropy()

    def test_partial_correlation(self):
        assert gaussian_conditional_entropy(Covariance2(2, 2, 1)) == pytest.approx(
            2.3395768, abs=1e-6)

    def test_estimated_covariance_close_to_truth(self):
        # plug-in value from 1e6 samples lands within ~3 standard errors
        rng = np.random.default_rng(11)
        z = rng.multivariate_normal([0, 0], [[2, 1], [1, 2]], 1_000_000)
        za, zb = z[:, 0] - z[:, 0].mean(), z[:, 1] - z[:, 1].mean()
        n = len(za)
        k_hat = Covariance2(za @ za / n, zb @ zb / n, za @ zb / n)
        assert gaussian_conditional_entropy(k_hat) == pytest.approx(
            2.3395768, abs=0.005)

    def test_degenerate_conditional_variance(self):
        with pytest.raises(DomainError):
            gaussian_conditional_entropy(Covariance2(4, 9, 6))


class TestSqueezedRateBound:
    def test_security_boundary(self):
        assert squeezed_rate_bound(Covariance2(1, 1, 0), 1).delta_i_min_per_pulse == 0.0

    def test_half_vacuum_conditional_variance(self):
        k = Covariance2(1.0, 0.5, 0.0)
        report = squeezed_rate_bound(k, 10)
        assert report.delta_i_min_per_pulse == pytest.approx(1.0)
        assert report.delta_i_min_block == pytest.approx(10.0)

    def test_worked_example(self):
        report = squeezed_rate_bound(K_WORKED, 1)
        assert report.cond_var_b_given_a == pytest.approx(0.525, rel=1e-12)
        assert report.delta_i_min_per_pulse == pytest.approx(
            math.log2(1 / 0.525), rel=1e-12)
        assert report.i_ab == pytest.approx(0.5 * math.log2(20), rel=1e-12)
        assert report.i_be_bound == pytest.approx(report.i_ab - report.delta_i_min_per_pulse)

    def test_negative_rates_returned_as_is(self):
        report = squeezed_rate_bound(Covariance2(1.0, 4.0, 0.0), 1)
        assert report.delta_i_min_per_pulse == pytest.approx(-2.0)

    def test_rejects_bad_block_size(self):
        with pytest.raises(DomainError):
            squeezed_rate_bound(K_WORKED, 0)

    @given(covariances(max_rho=0.995), st.integers(1, 1000))
    def test_block_value_is_n_times_per_pulse(self, k, n):
        report = squeezed_rate_bound(k, n)
        assert report.delta_i_min_block == pytest.approx(
            n * report.delta_i_min_per_pulse)

    @given(covariances())
    @settings(max_examples=200)
    def test_chain_consistency(self, k):
        # direct form agrees with 2*(H0 - H_G(B|A)) to floating-point accuracy
        report = squeezed_rate_bound(k, 1)
        chain = 2.0 * (vacuum_entropy() - gaussian_conditional_entropy(k))
        assert report.delta_i_min_per_pulse == pytest.approx(
            chain, rel=1e-12, abs=1e-12)

    def test_monotone_in_correlation(self):
        rates = [
            squeezed_rate_bound(Covariance2(3.0, 5.0, c), 1).delta_i_min_per_pulse
            for c in (0.0, 1.0, 2.0, 3.0, 3.8)
        ]
        assert all(lo < hi for lo, hi in zip(rates, rates[1:]))

    @given(covariances(), st.floats(0.01, 100.0))
    @settings(max_examples=200)
    def test_scale_covariance(self, k, scale):
        base = squeezed_rate_bound(k, 1, 1.0)
        scaled = squeezed_rate_bound(
            Covariance2(scale * k.var_a, scale * k.var_b, scale * k.cov_ab),
            1, n0=scale)
        assert scaled.delta_i_min_per_pulse == pytest.approx(
            base.delta_i_min_per_pulse, rel=1e-9, abs=1e-9)
        assert scaled.i_ab == pytest.approx(base.i_ab, rel=1e-9, abs=1e-9)


class TestHeterodyneTransform:
    def test_shot_noise_limited_alice(self):
        k = heterodyne_covariance_transform(Covariance2(1.0 + 1e-9, 1.0, 0.0))
        assert k.var_a == pytest.approx(0.0, abs=1e-8)
        assert k.var_b == 1.0
        assert k.cov_ab == 0.0

    def test_printed_form(self):
        k = heterodyne_covariance_transform(Covariance2(3.0, 5.0, 2.0))
        assert (k.var_a, k.var_b) == (4.0, 5.0)
        assert k.cov_ab == pytest.approx(2.0 * math.sqrt(2.0))

    def test_beamsplitter_form(self):
        k = heterodyne_covariance_transform(
            Covariance2(3.0, 5.0, 2.0), transform=HeterodyneTransform.BEAMSPLITTER)
        assert k.var_a == pytest.approx(5.0)

    def test_rejects_subvacuum_alice(self):
        with pytest.raises(DomainError):
            heterodyne_covariance_transform(Covariance2(0.9, 5.0, 0.1))

    def test_inconsistent_statistics_detected(self):
        # lossless entangled-source statistics break the printed transform
        v = 20.0
        measured = Covariance2((v + 1) / 2, v, math.sqrt(v * v - 1) / math.sqrt(2))
        with pytest.raises(InconsistentStatisticsError):
            heterodyne_covariance_transform(measured)
        physical = heterodyne_covariance_transform(
            measured, transform=HeterodyneTransform.BEAMSPLITTER)
        assert physical.var_a == pytest.approx(v, rel=1e-12)


class TestCoherentRateBound:
    def test_boundary(self):
        # var_a = 1.5 puts both conditional variances exactly at the vacuum
        k = Covariance2(1.5, 1.0, 0.0)
        assert coherent_rate_bound(k, 1).delta_i_min_per_pulse == pytest.approx(0.0)

    def test_symmetric_half_vacuum(self):
        # zero correlation makes both conditional variances equal var_b
        k = Covariance2(2.0, 0.5, 0.0)
        report = coherent_rate_bound(k, 1)
        assert report.cond_var_b_given_a == pytest.approx(0.5)
        assert report.cond_var_b_given_a_prime == pytest.approx(0.5)
        assert report.delta_i_min_per_pulse == pytest.approx(1.0)

    def test_block_scaling(self):
        k = Covariance2(3.0, 1.0, 1.0)
        per = coherent_rate_bound(k, 1).delta_i_min_per_pulse
        assert coherent_rate_bound(k, 7).delta_i_min_block == pytest.approx(7 * per)

    def test_chain_equals_closed_form(self):
        rng = np.random.default_rng(5)
        checked = 0
        while checked < 500:
            var_a = rng.uniform(1.05, 30.0)
            var_b = rng.uniform(0.05, 30.0)
            rho = rng.uniform(-0.99, 0.99)
            k = Covariance2(var_a, var_b, rho * math.sqrt(var_a * var_b))
            try:
                report = coherent_rate_bound(k, 1)
            except DomainError:
                continue
            chain = (2.0 * vacuum_entropy()
                     - gaussian_conditional_entropy(k)
                     - gaussian_conditional_entropy(heterodyne_covariance_transform(k)))
            assert report.delta_i_min_per_pulse == pytest.approx(
                chain, rel=1e-12, abs=1e-12)
            checked += 1

    def test_heterodyne_penalty_same_channel(self):
        # on one channel, heterodyning Alice's mode can only cost rate
        # relative to homodyning it (squeezed-protocol statistics)
        rng = np.random.default_rng(6)
        for _ in range(300):
            v = rng.uniform(1.5, 40.0)
            t = rng.uniform(0.05, 1.0)
            eps = rng.uniform(0.0, 0.3)
            var_b = t * v + (1 - t) + t * eps
            c = math.sqrt(t * (v * v - 1))
            k_hom = Covariance2(v, var_b, c)
            k_het = Covariance2((v + 1) / 2, var_b, c / math.sqrt(2))
            squeezed = squeezed_rate_bound(k_hom, 1)
            coherent = coherent_rate_bound(
                k_het, 1, transform=HeterodyneTransform.BEAMSPLITTER)
            assert (coherent.delta_i_min_per_pulse
                    <= squeezed.delta_i_min_per_pulse + 1e-12)

    def test_heterodyne_penalty_against_presplit_mode(self):
        # the coherent bound never beats the squeezed bound evaluated on
        # the reconstructed pre-beam-splitter covariance
        rng = np.random.default_rng(16)
        checked = 0
        while checked < 300:
            var_a = rng.uniform(1.05, 30.0)
            var_b = rng.uniform(0.05, 30.0)
            rho = rng.uniform(-0.99, 0.99)
            k = Covariance2(var_a, var_b, rho * math.sqrt(var_a * var_b))
            try:
                coherent = coherent_rate_bound(k, 1)
                squeezed_prime = squeezed_rate_bound(
                    heterodyne_covariance_transform(k), 1)
            except DomainError:
                continue
            assert (coherent.delta_i_min_per_pulse
                    <= squeezed_prime.delta_i_min_per_pulse + 1e-12)
            checked += 1


class TestEffectiveRate:
    def test_perfect_reconciliation_recovers_bound(self):
        report = squeezed_rate_bound(K_WORKED, 1)
        assert effective_rate(report.i_ab, K_WORKED,
                              ProtocolKind.SQUEEZED_HOMODYNE) == pytest.approx(
            report.delta_i_min_per_pulse)

    def test_no_reconciled_bits_no_key(self):
        report = squeezed_rate_bound(K_WORKED, 1)
        value = effective_rate(0.0, K_WORKED, ProtocolKind.SQUEEZED_HOMODYNE)
        assert value == pytest.approx(-report.i_be_bound)
        assert value <= 0.0

    def test_ninety_percent_reconciliation(self):
        report = squeezed_rate_bound(K_WORKED, 1)
        i_eff = 0.9 * report.i_ab
        expected = i_eff - (report.i_ab - math.log2(1 / 0.525))
        assert effective_rate(i_eff, K_WORKED,
                              ProtocolKind.SQUEEZED_HOMODYNE) == pytest.approx(expected)

    def test_rejects_super_shannon_efficiency(self):
        report = squeezed_rate_bound(K_WORKED, 1)
        with pytest.raises(DomainError):
            effective_rate(report.i_ab * 1.01, K_WORKED,
                           ProtocolKind.SQUEEZED_HOMODYNE)

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            effective_rate(-0.1, K_WORKED, ProtocolKind.SQUEEZED_HOMODYNE)


class TestApplySifting:
    def test_halves(self):
        assert apply_sifting(1.0) == 0.5

    def test_zero(self):
        assert apply_sifting(0.0) == 0.0

    @given(st.floats(-100, 100))
    def test_composition_quarters(self, r):
        assert apply_sifting(apply_sifting(r)) == pytest.approx(r / 4)


class TestConditionalSqueezingCheck:
    def test_boundary_is_insecure(self):
        assert conditional_squeezing_check(Covariance2(1, 1, 0)) == "insecure"

    def test_squeezed_is_secure(self):
        assert conditional_squeezing_check(Covariance2(2, 2, 1.5)) == "secure"

    def test_matches_rate_sign(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            var_a = rng.uniform(0.1, 10)
            var_b = rng.uniform(0.1, 10)
            rho = rng.uniform(-0.99, 0.99)
            k = Covariance2(var_a, var_b, rho * math.sqrt(var_a * var_b))
            verdict = conditional_squeezing_check(k)
            rate = squeezed_rate_bound(k, 1).delta_i_min_per_pulse
            assert (verdict == "secure") == (rate > 0)


class TestMutualInformation:
    @given(covariances(max_rho=0.999))
    def test_non_negative(self, k):
        try:
            mi = gaussian_mutual_information(k)
        except DomainError:
            return
        assert mi >= 0.0
