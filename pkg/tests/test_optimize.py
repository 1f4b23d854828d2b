import math

import numpy as np
import pytest

from adqkd.optimize import (
    COORDS,
    OptimizationProblem,
    decode,
    encode,
    optimize_key_rate,
    threshold_scan,
)
from adqkd.params import ChannelParams, ParameterError, ProtocolParams

CH = ChannelParams.from_degrees(1.0, 0.0, 8.0)


def _coords(pp):
    mu1, mu2, mu3 = pp.mu
    return np.array([mu3, mu2 - mu3, mu1 - mu2 - mu3, pp.p_mu[0], pp.p_mu[1], pp.p_z, pp.q_t])


class TestReparameterisation:
    def test_round_trip(self):
        pp = ProtocolParams(N=1e8, mu=(0.6, 0.2, 0.01), p_mu=(0.5, 0.3, 0.2), p_z=0.8, q_t=0.2)
        back = decode(encode(pp), pp)
        assert np.allclose(back.mu, pp.mu, rtol=1e-12)
        assert np.allclose(back.p_mu, pp.p_mu, rtol=1e-12)
        assert back.p_z == pytest.approx(pp.p_z) and back.q_t == pytest.approx(pp.q_t)

    def test_any_point_is_feasible(self):
        rng = np.random.default_rng(3)
        template = ProtocolParams(N=1e8)
        for _ in range(500):
            pp = decode(rng.normal(0, 2, 7), template)
            mu1, mu2, mu3 = pp.mu
            assert mu1 > mu2 + mu3 - 1e-15 and mu2 >= mu3 >= 0
            assert sum(pp.p_mu) == pytest.approx(1.0)

    def test_bb84_drops_test_set(self):
        assert decode(np.array([0.1, 0.5, 0.5, 0, 0, 0, 0]), ProtocolParams(N=1e8), with_test_set=False).q_t == 0.0


class TestQuadratic:
    def test_converges_to_known_optimum(self):
        prob = OptimizationProblem(
            CH, ProtocolParams(N=1e8), restarts=3, budget=4000,
            objective=lambda pp: -float(np.sum((_coords(pp) - 0.3) ** 2)),
        )
        res = optimize_key_rate(prob)
        assert np.all(np.abs(_coords(res.params) - 0.3) < 1e-4)


class TestProblem:
    def test_bb84_rejects_test_set(self):
        with pytest.raises(ParameterError) as exc:
            OptimizationProblem(CH, ProtocolParams(N=1e8), "bb84", free_params=("q_t",))
        assert exc.value.field == "free_params"

    def test_bb84_template_has_no_test_set(self):
        assert OptimizationProblem(CH, ProtocolParams(N=1e8), "bb84").template.q_t == 0.0

    def test_unknown_variant(self):
        with pytest.raises(ParameterError):
            OptimizationProblem(CH, ProtocolParams(N=1e8), "cascade")

    def test_fixed_parameters_stay_fixed(self):
        template = ProtocolParams(N=1e8, b=2)
        prob = OptimizationProblem(CH, template, free_params=("p_z", "q_t"), restarts=1, budget=150)
        res = optimize_key_rate(prob)
        assert res.params.mu == pytest.approx(template.mu)
        assert res.params.p_mu == pytest.approx(template.p_mu)


def _small(seed=7, restarts=3, variant="ad"):
    return OptimizationProblem(CH, ProtocolParams(N=1e8, b=2), variant, restarts=restarts,
                               budget=150, seed=seed)


class TestRuns:
    def test_reproducible(self):
        a = optimize_key_rate(_small())
        b = optimize_key_rate(_small())
        assert a.params == b.params
        assert a.value == b.value and a.restart_values == b.restart_values

    def test_restart_dominance(self):
        res = optimize_key_rate(_small(restarts=4))
        assert res.value >= max(res.restart_values)
        fewer = optimize_key_rate(_small(restarts=2))
        assert res.value >= fewer.value

    def test_not_worse_than_start(self):
        prob = _small(restarts=0)
        start = prob.value(prob.template)
        res = optimize_key_rate(prob)
        assert res.value >= start
        assert res.rate > 0 and res.result.ell > 0

    def test_everywhere_infeasible(self):
        ch = ChannelParams.from_degrees(1.0, 0.0, 45.0)
        res = optimize_key_rate(OptimizationProblem(ch, ProtocolParams(N=1e8), restarts=1, budget=60))
        assert res.rate == 0.0


def _step_problem(threshold):
    def make(v, warm):
        val = 1e-3 if v < threshold else -1.0
        return OptimizationProblem(CH, ProtocolParams(N=1e8), restarts=0, budget=5,
                                   objective=lambda pp: val)
    return make


class TestThresholdScan:
    def test_all_zero(self):
        res = threshold_scan(_step_problem(-1.0), [0.0, 0.1, 0.2])
        assert res.bracket is None and res.crossing is None
        assert all(p.rate == 0 for p in res.points)

    def test_never_crosses(self):
        assert threshold_scan(_step_problem(9.0), [0.0, 0.1, 0.2]).bracket is None

    def test_bracket(self):
        res = threshold_scan(_step_problem(0.25), [0.0, 0.1, 0.2, 0.3, 0.4])
        assert res.bracket == (0.2, 0.3)
        assert res.crossing.value == 0.2

    def test_bisection(self):
        res = threshold_scan(_step_problem(0.25), [0.0, 0.1, 0.2, 0.3, 0.4], tol=1e-4)
        lo, hi = res.bracket
        assert hi - lo <= 1e-4 and lo < 0.25 <= hi

    def test_log_bisection(self):
        # the sweep must run from key towards no key
        assert threshold_scan(_step_problem(0.02), [0.1, 0.01, 0.001], tol=1e-3).bracket is None
        res = threshold_scan(_step_problem(0.02), [0.001, 0.01, 0.1], tol=1e-3, log=True)
        lo, hi = res.bracket
        assert abs(math.log10(hi / lo)) <= 1e-3 and lo < 0.02 <= hi

    def test_real_sweep_warm_start(self):
        pp = ProtocolParams(N=1e8, b=1)

        def make(deg, warm):
            return OptimizationProblem(ChannelParams.from_degrees(1.0, 0.0, deg), warm or pp,
                                       "bb84", restarts=0, budget=300)

        res = threshold_scan(make, [8.0, 16.0, 24.0])
        assert res.bracket == (16.0, 24.0)
        assert res.points[0].rate > res.points[1].rate > 0
