"""Frequency checks of the concentration bounds and of the AD algebra."""

from __future__ import annotations

import math

import numpy as np

from ..bounds import chernoff_delta, combined_delta, hoeffding_delta, serfling_nu
from .rng import OracleStats, frequency_se, shards, stream

SHARD = 100_000


def serfling_experiment(population, k: int, eps: float, trials: int, seed: int,
                        nu_scale: float = 1.0) -> OracleStats:
    """How often the unsampled rate exceeds the sampled rate plus ``nu``.

    ``population`` is a 0/1 sequence of length ``n + k``; each trial draws a
    uniformly random ``k``-subset without replacement. Only the number of
    ones in the subset matters, so it is drawn from the hypergeometric law.
    ``nu_scale`` deliberately weakens the bound for sensitivity checks.
    """
    pop = np.asarray(population)
    total = pop.size
    n = total - k
    if k < 1 or n < 1:
        raise ValueError("need 1 <= k < len(population)")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ones = int(np.count_nonzero(pop))
    nu = nu_scale * serfling_nu(n, k, eps)
    viol = 0
    sampled_sum = 0.0
    for i, size in shards(trials, SHARD):
        y_s = stream(seed, i).hypergeometric(ones, total - ones, k, size=size)
        sampled_sum += float(y_s.sum())
        viol += int(np.count_nonzero((ones - y_s) / n > y_s / k + nu))
    freq = viol / trials
    return OracleStats(trials, sampled_sum / trials / k, freq, frequency_se(freq, trials), seed,
                       {"nu": nu, "n": n, "k": k})


def sum_bound_experiment(N: int, p: float, eps: float, trials: int, seed: int,
                         kind: str = "combined", direction: str = "upper",
                         scale: float = 1.0) -> OracleStats:
    """How often the expectation of a Binomial(N, p) count escapes its bound.

    ``kind`` picks the deviation: ``"hoeffding"``, ``"chernoff"`` or
    ``"combined"``. For ``direction="upper"`` a violation is
    ``N p > n + delta``; for ``"lower"`` it is ``N p < n - delta``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if direction not in ("upper", "lower"):
        raise ValueError("direction must be 'upper' or 'lower'")
    mean = N * p
    viol = 0
    total = 0.0
    for i, size in shards(trials, SHARD):
        counts = stream(seed, i).binomial(N, p, size=size)
        total += float(counts.sum())
        # deviations depend only on the observed count; tabulate them once
        uniq, inv = np.unique(counts, return_inverse=True)
        if kind == "hoeffding":
            d = np.full(uniq.shape, hoeffding_delta(N, eps))
        elif kind == "chernoff":
            d = np.array([chernoff_delta(c, eps, direction) for c in uniq])
        elif kind == "combined":
            d = np.array([combined_delta(N, c, eps, direction) for c in uniq])
        else:
            raise ValueError(f"unknown kind {kind!r}")
        d = scale * d[inv]
        if direction == "upper":
            viol += int(np.count_nonzero(mean > counts + d))
        else:
            viol += int(np.count_nonzero(mean < counts - d))
    freq = viol / trials
    return OracleStats(trials, total / trials, freq, frequency_se(freq, trials), seed,
                       {"kind": kind, "direction": direction, "N": N, "p": p})


def ad_iid_experiment(phi: float, b: int, trials: int, seed: int) -> OracleStats:
    """Parity-check AD on i.i.d. bit errors with rate ``phi``.

    ``empirical_mean`` is the acceptance frequency and
    ``empirical_freq_violation`` the error rate among accepted blocks; their
    standard errors are in ``extra``.
    """
    if not 0.0 <= phi <= 1.0:
        raise ValueError("phi must lie in [0, 1]")
    if b < 1 or trials < 1:
        raise ValueError("need b >= 1 and trials >= 1")
    accepted = wrong = 0
    for i, size in shards(trials, SHARD):
        errors = stream(seed, i).random((size, b)) < phi
        flips = errors.sum(axis=1)
        ok = (flips == 0) | (flips == b)
        accepted += int(np.count_nonzero(ok))
        wrong += int(np.count_nonzero(flips == b))
    acc = accepted / trials
    err = wrong / accepted if accepted else 0.0
    se_acc = frequency_se(acc, trials)
    se_err = frequency_se(err, accepted) if accepted else 0.0
    return OracleStats(trials, acc, err, se_err, seed,
                       {"se_acceptance": se_acc, "accepted": accepted})


def within_sigma(observed: float, expected: float, se: float, k: float = 3.0) -> bool:
    """``|observed - expected| <= k se``, allowing exact agreement when ``se`` is 0."""
    return abs(observed - expected) <= k * se + 1e-15 * max(1.0, abs(expected))
