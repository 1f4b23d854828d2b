import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adqkd.bounds import (
    binary_entropy,
    chernoff_delta,
    combined_delta,
    combined_delta_row,
    hoeffding_delta,
    mcdiarmid_block_delta,
    serfling_nu,
    truncated_binary_entropy,
)

# Reference values below were computed with mpmath at 40 digits.


class TestEntropy:
    def test_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == 1.0

    def test_reference_value(self):
        assert binary_entropy(0.11) == pytest.approx(0.4999159581645280, abs=1e-12)

    def test_truncated(self):
        assert truncated_binary_entropy(0.5) == 1.0
        assert truncated_binary_entropy(0.9) == 1.0
        assert truncated_binary_entropy(0.25) == pytest.approx(0.8112781244591329, abs=1e-12)

    @pytest.mark.parametrize("x", [-0.1, 1.1, float("nan")])
    def test_domain(self, x):
        with pytest.raises(ValueError):
            binary_entropy(x)
        with pytest.raises(ValueError):
            truncated_binary_entropy(x)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_concave(self, x, y):
        assert binary_entropy((x + y) / 2) >= (binary_entropy(x) + binary_entropy(y)) / 2 - 1e-12

    @given(st.floats(0, 1))
    def test_symmetric(self, x):
        assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), abs=1e-12)


class TestDeltas:
    def test_hoeffding(self):
        assert hoeffding_delta(12345, 1.0) == 0.0
        assert hoeffding_delta(0, 0.01) == 0.0
        assert hoeffding_delta(1e8, 1e-10) == pytest.approx(33930.70212207556, rel=1e-12)

    def test_chernoff(self):
        assert chernoff_delta(77, 1.0, "upper") == 0.0
        assert chernoff_delta(0, math.exp(-1), "upper") == pytest.approx(2.0, abs=1e-12)
        assert chernoff_delta(0, math.exp(-1), "lower") == pytest.approx(1.0, abs=1e-12)
        with pytest.raises(ValueError):
            chernoff_delta(1, 0.1, "sideways")

    def test_combined(self):
        assert combined_delta(100, 50, 1.0, "upper") == 0.0
        assert combined_delta(100, 50, 1.0, "lower") == 0.0
        # small n: the Chernoff branch wins
        assert combined_delta(1e6, 10, 1e-6, "upper") == pytest.approx(35.42982394369337, rel=1e-12)
        # n close to N: the Hoeffding branch wins
        assert combined_delta(100, 90, 1e-6, "upper") == pytest.approx(26.28260884878466, rel=1e-12)
        with pytest.raises(ValueError):
            combined_delta(10, 11, 0.1)

    def test_serfling(self):
        assert serfling_nu(10, 3, 1.0) == 0.0
        assert serfling_nu(1e6, 1e4, 1e-10) == pytest.approx(0.03410163856047374, rel=1e-12)
        assert serfling_nu(2000, 100, 0.01) < serfling_nu(1000, 100, 0.01)
        for n, k in ((0, 1), (1, 0)):
            with pytest.raises(ValueError):
                serfling_nu(n, k, 0.1)

    def test_mcdiarmid(self):
        assert mcdiarmid_block_delta(500, 1.0) == 0.0
        assert mcdiarmid_block_delta(1e4, 0.01) == pytest.approx(455.2281388155439, rel=1e-12)
        assert mcdiarmid_block_delta(9, math.exp(-2)) == pytest.approx(9.0, rel=1e-12)

    @pytest.mark.parametrize("eps", [0.0, 1.5, -1])
    def test_confidence_domain(self, eps):
        with pytest.raises(ValueError):
            hoeffding_delta(10, eps)

    def test_crossover_regions(self):
        eps, N = 1e-10, 1e6
        for n in np.linspace(0, N / 8, 50):
            assert chernoff_delta(n, eps, "upper") < hoeffding_delta(N, eps)
        for n in np.linspace(N / 2, N, 50):
            assert chernoff_delta(n, eps, "upper") > hoeffding_delta(N, eps)

    @given(st.floats(0, 1e12), st.floats(1e-30, 1))
    def test_nonnegative_and_ordered(self, n, eps):
        up, lo = chernoff_delta(n, eps, "upper"), chernoff_delta(n, eps, "lower")
        assert up >= lo >= 0
        assert hoeffding_delta(n, eps) >= 0

    @given(st.floats(1, 1e9), st.floats(1, 1e9), st.floats(1e-20, 0.5))
    def test_serfling_monotone(self, n, k, eps):
        assert serfling_nu(2 * n, k, eps) <= serfling_nu(n, k, eps) * (1 + 1e-12)
        assert serfling_nu(n, 2 * k, eps) <= serfling_nu(n, k, eps) * (1 + 1e-12)

    @settings(max_examples=50)
    @given(st.lists(st.floats(0, 1e9), min_size=3, max_size=3), st.floats(1e-20, 1),
           st.sampled_from(["upper", "lower"]))
    def test_row_matches_scalar(self, row, eps, direction):
        vec = combined_delta_row(row, eps, direction)
        total = sum(row)
        for c, v in zip(row, vec):
            assert v == pytest.approx(combined_delta(total, c, eps, direction), rel=1e-12, abs=1e-12)
