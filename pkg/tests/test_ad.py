import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adqkd.ad import (
    REQUIRED,
    AdEstimates,
    AdValidityError,
    C_APPENDIX,
    C_DOMAIN,
    C_MONOTONE,
    C_PHI_Z_HALF,
    C_S_K_MONOTONE,
    acceptance_test,
    accepted_single_blocks_lower,
    accepted_single_blocks_lower_raw,
    ad_success_and_error,
    appendix_condition,
    delta_prime,
    distilled_key_stats,
    estimate_ad,
    expected_single_blocks_exact,
    logical_x_conditions,
    logical_x_error_upper,
    logical_x_error_upper_raw,
)
from adqkd.bounds import hoeffding_delta
from adqkd.channel import expected_counts
from adqkd.decoy import estimate_decoy
from adqkd.params import ChannelParams, ProtocolParams


class TestAlgebra:
    def test_no_errors(self):
        for b in (1, 2, 7):
            assert ad_success_and_error(0.0, b) == (1.0, 0.0)

    def test_half(self):
        p, e = ad_success_and_error(0.5, 2)
        assert p == pytest.approx(0.5) and e == pytest.approx(0.5)

    def test_reference(self):
        p, e = ad_success_and_error(0.1, 3)
        assert p == pytest.approx(0.73, abs=1e-15)
        assert e == pytest.approx(0.001369863013698630, rel=1e-13)

    @given(st.floats(0, 1))
    def test_b_one(self, phi):
        assert ad_success_and_error(phi, 1) == pytest.approx((1.0, phi))

    @given(st.floats(1e-6, 0.2), st.integers(1, 9))
    def test_suppression(self, phi, b):
        assert ad_success_and_error(phi, b + 1)[1] < ad_success_and_error(phi, b)[1]

    def test_domain(self):
        with pytest.raises(ValueError):
            ad_success_and_error(1.5, 2)
        with pytest.raises(ValueError):
            ad_success_and_error(0.1, 0)


class TestDistilled:
    def test_error_free(self):
        assert distilled_key_stats(100, 0.0, 4) == (25.0, 0.0)

    def test_floor_then_symmetry(self):
        assert distilled_key_stats(7, 0.5, 2) == pytest.approx((1.5, 0.5))

    def test_reference(self):
        N, phi = distilled_key_stats(1e6, 0.1, 3)
        assert N == pytest.approx(243333.09, rel=1e-13)
        assert phi == pytest.approx(0.001369863013698630, rel=1e-13)

    @given(st.floats(1, 1e12), st.floats(0, 1))
    def test_b_one(self, n, phi):
        assert distilled_key_stats(n, phi, 1) == (n, phi)

    def test_degenerate(self):
        with pytest.raises(ValueError):
            distilled_key_stats(2, 0.1, 3)


class TestExactBlocks:
    def test_reference(self):
        assert expected_single_blocks_exact(4, 4, 1, 2) == Fraction(1)

    @pytest.mark.parametrize("n,b", [(10, 2), (9, 3), (17, 5)])
    def test_all_single_error_free(self, n, b):
        assert expected_single_blocks_exact(n, n, 0, b) == n // b

    def test_no_single_photons(self):
        assert expected_single_blocks_exact(10, 0, 0, 2) == 0

    def test_negative_factor_zeroes_product(self):
        # only one error among the singles: a block with two errors is impossible
        assert expected_single_blocks_exact(6, 6, 1, 2) == 3 * (Fraction(5, 6) * Fraction(4, 5))

    def test_real_inputs(self):
        assert float(expected_single_blocks_exact(4.0, 4.0, 1.0, 2)) == pytest.approx(1.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            expected_single_blocks_exact(4, 5, 1, 2)


class TestBlockLower:
    def test_limit_case(self):
        n = 10**6
        assert accepted_single_blocks_lower(n, n, 0.0, 2, 1.0) == pytest.approx(n // 2, rel=1e-5)

    def test_reference(self):
        value = accepted_single_blocks_lower(1e6, 5e5, 0.1, 3, 1e-10)
        assert value == pytest.approx(20236.92561387733, rel=1e-11)

    def test_conditions(self):
        with pytest.raises(AdValidityError) as exc:
            accepted_single_blocks_lower(1e6, 5e5, 0.5, 3, 1e-10)
        assert exc.value.condition == C_PHI_Z_HALF
        with pytest.raises(AdValidityError) as exc:
            accepted_single_blocks_lower(100, 5, 0.1, 3, 1.0)
        assert exc.value.condition == C_S_K_MONOTONE

    def test_clamped(self):
        assert accepted_single_blocks_lower_raw(1e4, 1e3, 0.1, 3, 1e-10) < 0
        assert accepted_single_blocks_lower(1e4, 1e3, 0.1, 3, 1e-10) == 0.0

    @settings(max_examples=300)
    @given(st.integers(2, 200), st.data())
    def test_below_exact_expectation(self, n_K, data):
        b = data.draw(st.integers(1, min(n_K, 9)))
        s_K = data.draw(st.integers(1, n_K))
        r_Z = data.draw(st.integers(0, s_K // 2))
        # any upper bound on the true error rate will do; use the truth itself and a looser one
        for phi in (r_Z / s_K, min(r_Z / s_K + 0.05, 0.499)):
            try:
                bound = accepted_single_blocks_lower_raw(n_K, s_K, phi, b, 1.0)
            except AdValidityError:
                continue
            assert bound <= float(expected_single_blocks_exact(n_K, s_K, r_Z, b)) + 1e-9


class TestLogicalError:
    def test_zero(self):
        assert logical_x_error_upper(1e6, 1e6, 0.05, 0.0, 2, 1.0) == 0.0

    def test_reference(self):
        value = logical_x_error_upper(2e6, 1e6, 0.05, 0.05, 2, 1.0)
        assert value == pytest.approx(0.09944773358615157, rel=1e-12)

    def test_monotone_in_phi_x(self):
        a = logical_x_error_upper(2e6, 1e6, 0.05, 0.05, 2, 1.0)
        b = logical_x_error_upper(2e6, 1e6, 0.05, 0.06, 2, 1.0)
        assert b > a

    def test_delta_prime_identity(self):
        # the correction equals the block-sampling deviation divided by s_K**b,
        # rescaled to the per-block normalisation
        n_K, s_K, b, eps = 1e7, 6e6, 3, 1e-12
        dp = delta_prime(n_K, s_K, b, eps)
        delta = 3 * hoeffding_delta(n_K, eps) * n_K**b / (n_K // b)
        assert dp == pytest.approx(delta / s_K**b, rel=1e-13)

    def test_domain_failure(self):
        with pytest.raises(AdValidityError) as exc:
            logical_x_error_upper(1e6, 1e6, 0.3, 0.3, 2, 1.0)
        assert exc.value.condition == C_DOMAIN

    def test_appendix_policy(self):
        # outside the analytic region, but the grid still certifies monotonicity
        args = (1e8, 5e7, 0.10, 0.20, 3, 1e-12)
        assert not appendix_condition(0.10, 0.20)
        assert logical_x_conditions(*args, monotonicity="grid")[C_MONOTONE]
        with pytest.raises(AdValidityError) as exc:
            logical_x_error_upper(*args, monotonicity="appendix")
        assert exc.value.condition == C_MONOTONE

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            logical_x_conditions(1e6, 1e6, 0.1, 0.1, 2, 1.0, monotonicity="hope")

    def test_grid_monotone_on_samples(self):
        # inside the analytic region the bound is non-decreasing in both rates
        for pz in np.linspace(0.0, 0.08, 9):
            for px in np.linspace(0.0, 0.08, 9):
                if not appendix_condition(pz + 0.005, px + 0.005):
                    continue
                for b in (2, 3, 5):
                    base = logical_x_error_upper_raw(1e9, 5e8, pz, px, b, 1e-12)
                    assert logical_x_error_upper_raw(1e9, 5e8, pz + 0.005, px, b, 1e-12) >= base - 1e-15
                    assert logical_x_error_upper_raw(1e9, 5e8, pz, px + 0.005, b, 1e-12) >= base - 1e-15


def _estimates(deg=10.0, b=3, N=1e8):
    pp = ProtocolParams(N=N, b=b)
    ct = expected_counts(pp, ChannelParams.from_degrees(1.0, 0.0, deg))
    de = estimate_decoy(ct, pp)
    return pp, ct, de, estimate_ad(ct.n_K, ct.phi_K, de, pp)


class TestEstimateAndAcceptance:
    def test_valid_point(self):
        pp, ct, de, ad = _estimates()
        assert ad.valid and not ad.failed
        assert ad.S_K_bar_minus > 0
        assert 0 <= ad.Phi_X_bar_plus <= 1
        assert C_APPENDIX in ad.validity

    def test_invalid_point_is_flagged(self):
        pp, ct, de, ad = _estimates(deg=40.0)
        assert not ad.valid
        assert acceptance_test(ad, pp) == "abort"

    def test_b_one(self):
        pp, ct, de, ad = _estimates(b=1)
        assert ad.N_K_bar == ct.n_K
        assert ad.Phi_K_bar == ct.phi_K

    def test_acceptance_boundaries(self):
        pp, ct, de, ad = _estimates()
        at = ProtocolParams(N=pp.N, b=pp.b, s_tol=ad.S_K_bar_minus, phi_tol=ad.Phi_X_bar_plus)
        assert acceptance_test(ad, at) == "accept"
        above = ProtocolParams(N=pp.N, b=pp.b, s_tol=ad.S_K_bar_minus + 1, phi_tol=ad.Phi_X_bar_plus)
        assert acceptance_test(ad, above) == "abort"
        assert acceptance_test(ad, pp) == "accept"

    def test_any_false_flag_aborts(self):
        pp, ct, de, ad = _estimates()
        for name in REQUIRED:
            flags = dict(ad.validity)
            flags[name] = False
            broken = AdEstimates(**{**ad.__dict__, "validity": flags})
            assert acceptance_test(broken, pp) == "abort"
