"""Lossy, noisy, misaligned channel feeding a two-detector receiver.

There is no eavesdropper here; the model produces the expected detection
and error counts of an honest run.
"""

from __future__ import annotations

import math

import numpy as np

from .params import SETS, ChannelParams, CountTable, ProtocolParams


def click_probabilities(mu: float, ch: ChannelParams) -> tuple[float, float]:
    """Click probabilities of the correct and the incorrect detector.

    >>> ch = ChannelParams(eta=1.0, p_noise=0.0, delta_mis=0.0)
    >>> click_probabilities(0.0, ch)
    (0.0, 0.0)
    """
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu!r}")
    # 1 - (1 - p_noise) exp(-x), written to keep precision when both are tiny
    log_keep = math.log1p(-ch.p_noise)
    x = ch.eta * mu
    p_correct = -math.expm1(log_keep - x * math.cos(ch.delta_mis) ** 2)
    p_incorrect = -math.expm1(log_keep - x * math.sin(ch.delta_mis) ** 2)
    return p_correct, p_incorrect


def outcome_probabilities(mu: float, ch: ChannelParams) -> tuple[float, float]:
    """Probability of any click and of an erroneous bit.

    Double clicks are resolved by a fair coin, so they count half as errors.
    """
    pc, pw = click_probabilities(mu, ch)
    p_out = pc * (1.0 - pw) + pw * (1.0 - pc) + pc * pw
    p_err = pw * (1.0 - pc) + 0.5 * pc * pw
    return p_out, p_err


def expected_counts(pp: ProtocolParams, ch: ChannelParams) -> CountTable:
    """Expected detection and error counts per set and intensity (not rounded)."""
    probs = [outcome_probabilities(mu, ch) for mu in pp.mu]
    p_out = np.array([p[0] for p in probs])
    p_err = np.array([p[1] for p in probs])
    weights = pp.N * np.asarray(pp.p_mu)
    n = {}
    m = {}
    for f in SETS:
        sift = pp.sifting_factor(f)
        n[f] = weights * p_out * sift
        m[f] = weights * p_err * sift
    return CountTable(n=n, m=m)


def qber(pp: ProtocolParams, ch: ChannelParams) -> float:
    """Key-set error rate phi_K implied by the channel."""
    return expected_counts(pp, ch).phi_K
