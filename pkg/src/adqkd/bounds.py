"""Entropy functions and concentration-bound primitives.

Every function here is a pure scalar function. Counts may be real valued,
since simulated runs use expected counts rather than integers.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "binary_entropy",
    "truncated_binary_entropy",
    "hoeffding_delta",
    "chernoff_delta",
    "combined_delta",
    "serfling_nu",
    "mcdiarmid_block_delta",
    "check_confidence",
    "combined_delta_row",
]


def check_confidence(eps: float, name: str = "eps") -> float:
    """Return ``eps`` as a float after checking ``0 < eps <= 1``."""
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"{name} must lie in (0, 1], got {eps!r}")
    return eps


def _check_probability(x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {x!r}")
    return x


def _check_count(n: float, name: str) -> float:
    n = float(n)
    if n < 0:
        raise ValueError(f"{name} must be non-negative, got {n!r}")
    return n


def binary_entropy(x: float) -> float:
    """Binary entropy in bits, with ``0 log 0 = 0``."""
    x = _check_probability(x)
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def truncated_binary_entropy(x: float) -> float:
    """Binary entropy for ``x < 1/2`` and 1 otherwise."""
    x = _check_probability(x)
    if x >= 0.5:
        return 1.0
    return binary_entropy(x)


def hoeffding_delta(N: float, eps: float) -> float:
    """Hoeffding deviation ``sqrt(N/2 * ln(1/eps))``."""
    N = _check_count(N, "N")
    eps = check_confidence(eps)
    return math.sqrt(0.5 * N * math.log(1.0 / eps))


def chernoff_delta(n: float, eps: float, direction: str = "upper") -> float:
    """Multiplicative Chernoff deviation for an observed count ``n``.

    ``direction="upper"`` bounds the expectation from above, ``"lower"``
    from below. The upper deviation is never smaller than the lower one.
    """
    n = _check_count(n, "n")
    eps = check_confidence(eps)
    L = math.log(1.0 / eps)
    if direction == "upper":
        return L + math.sqrt(2.0 * n * L + L * L)
    if direction == "lower":
        return L / 2.0 + math.sqrt(2.0 * n * L + L * L / 4.0)
    raise ValueError(f"direction must be 'upper' or 'lower', got {direction!r}")


def combined_delta(N: float, n: float, eps: float, direction: str = "upper") -> float:
    """Smaller of the Hoeffding deviation on the set total ``N`` and the
    Chernoff deviation on the subset count ``n``."""
    if n > N * (1 + 1e-12) + 1e-9:
        raise ValueError(f"subset count n={n!r} exceeds set total N={N!r}")
    return min(hoeffding_delta(N, eps), chernoff_delta(n, eps, direction))


def serfling_nu(n: float, k: float, eps: float) -> float:
    """Rate deviation when extrapolating from a random ``k``-sample to the
    ``n`` unsampled items (sampling without replacement)."""
    n = float(n)
    k = float(k)
    if n <= 0 or k <= 0:
        raise ValueError(f"serfling_nu needs n > 0 and k > 0, got n={n!r}, k={k!r}")
    eps = check_confidence(eps)
    return math.sqrt((n + k) * (k + 1.0) / (2.0 * n * k * k) * math.log(1.0 / eps))


def mcdiarmid_block_delta(N: float, eps: float) -> float:
    """Deviation of a block-pattern count over a random partition of ``N``
    items: three times the Hoeffding deviation."""
    return 3.0 * hoeffding_delta(N, eps)


def combined_delta_row(counts, eps: float, direction: str = "upper"):
    """``combined_delta`` for every cell, with the sum along the last axis as
    the set total.

    Vectorised equivalent of calling ``combined_delta(row.sum(), c, eps,
    direction)`` per cell; used on the hot path of the optimiser.
    """
    c = np.asarray(counts, dtype=float)
    if c.min(initial=0.0) < 0:
        raise ValueError("counts must be non-negative")
    L = math.log(1.0 / check_confidence(eps))
    h = np.sqrt(0.5 * L * c.sum(axis=-1, keepdims=True))
    if direction == "upper":
        ch = L + np.sqrt(2.0 * L * c + L * L)
    elif direction == "lower":
        ch = L / 2.0 + np.sqrt(2.0 * L * c + L * L / 4.0)
    else:
        raise ValueError(f"direction must be 'upper' or 'lower', got {direction!r}")
    return np.minimum(h, ch)
