"""Counter-based random streams and frequency statistics.

Every stream is a Philox-4x64-10 generator keyed by ``seed`` (low 64 bits)
and a stream index (high 64 bits), so any trial or shard can be replayed in
isolation and results do not depend on how work is split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

MASK64 = 2**64 - 1


def stream(seed: int, index: int) -> np.random.Generator:
    """Generator for stream ``index`` under ``seed``."""
    if index < 0:
        raise ValueError("stream index must be non-negative")
    key = (int(seed) & MASK64) | ((int(index) & MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def shards(trials: int, shard_size: int):
    """Yield ``(index, size)`` for fixed-size shards covering ``trials``."""
    for i, start in enumerate(range(0, trials, shard_size)):
        yield i, min(shard_size, trials - start)


@dataclass
class OracleStats:
    """Outcome of one Monte Carlo experiment.

    ``standard_error`` belongs to ``empirical_freq_violation`` when a
    violation frequency is measured, otherwise to ``empirical_mean``.
    """

    trials: int
    empirical_mean: float
    empirical_freq_violation: float
    standard_error: float
    seed: int
    extra: dict[str, Any] = field(default_factory=dict)


def frequency_se(p_hat: float, trials: int) -> float:
    return math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / trials)


def within_budget(freq: float, budget: float, trials: int) -> bool:
    """True if ``freq`` does not exceed ``budget`` by more than three standard errors."""
    return freq <= budget + 3.0 * frequency_se(freq, trials)
