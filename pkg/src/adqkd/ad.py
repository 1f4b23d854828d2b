"""Advantage-distillation algebra and block-wise finite-size estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Integral

import numpy as np

from .bounds import check_confidence, mcdiarmid_block_delta
from .decoy import DecoyEstimates
from .params import ProtocolParams

MONOTONICITY_POLICIES = ("grid", "appendix")
GRID_POINTS = 33

# Names of the conditions under which the block estimators are valid.
C_PHI_Z_HALF = "phi_z_below_half"
C_S_K_MONOTONE = "s_k_monotone"
C_DOMAIN = "phase_domain"
C_MONOTONE = "phi_monotone"
C_DENOMINATOR = "denominator_positive"
C_APPENDIX = "c4_appendix"


class AdValidityError(ValueError):
    """A validity condition of the block estimators failed."""

    def __init__(self, condition: str, message: str = ""):
        super().__init__(f"{condition} violated" + (f": {message}" if message else ""))
        self.condition = condition


def _check_block(b: int) -> None:
    if int(b) != b or b < 1:
        raise ValueError(f"block size must be an integer >= 1, got {b!r}")


def ad_success_and_error(phi: float, b: int) -> tuple[float, float]:
    """Acceptance probability and residual error of one parity-checked block.

    >>> ad_success_and_error(0.0, 5)
    (1.0, 0.0)
    """
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must lie in [0, 1], got {phi!r}")
    _check_block(b)
    good, bad = (1.0 - phi) ** b, phi**b
    p_succ = good + bad
    return p_succ, bad / p_succ


def block_count(n_K: float, b: int) -> int:
    """Number of complete blocks; real counts are rounded before flooring."""
    return int(round(n_K)) // int(b)


def distilled_key_stats(n_K: float, phi_K: float, b: int) -> tuple[float, float]:
    """Expected length and error rate of the distilled key."""
    _check_block(b)
    if n_K < b:
        raise ValueError(f"need n_K >= b, got n_K={n_K!r}, b={b!r}")
    if b == 1:
        return float(n_K), float(phi_K)
    p_succ, phi_bar = ad_success_and_error(phi_K, b)
    return float(block_count(n_K, b) * p_succ), float(phi_bar)


def _falling_ratio(num: int, den: int, b: int) -> Fraction:
    prod = Fraction(1)
    for j in range(b):
        if num - j < 0:
            return Fraction(0)
        prod *= Fraction(num - j, den - j)
    return prod


def expected_single_blocks_exact(n_K, s_K, r_Z, b: int):
    """Exact expected number of accepted all-single-photon blocks.

    Integer inputs give an exact ``Fraction``; real inputs fall back to floats.

    >>> expected_single_blocks_exact(4, 4, 1, 2)
    Fraction(1, 1)
    """
    _check_block(b)
    if not 0 <= r_Z <= s_K <= n_K:
        raise ValueError("need 0 <= r_Z <= s_K <= n_K")
    if n_K < b:
        return Fraction(0)
    blocks = block_count(n_K, b)
    if all(isinstance(v, Integral) for v in (n_K, s_K, r_Z)):
        n_K, s_K, r_Z = int(n_K), int(s_K), int(r_Z)
        return blocks * (_falling_ratio(s_K - r_Z, n_K, b) + _falling_ratio(r_Z, n_K, b))
    return blocks * (float(_falling_float(s_K - r_Z, n_K, b)) + float(_falling_float(r_Z, n_K, b)))


def _falling_float(num: float, den: float, b: int) -> float:
    prod = 1.0
    for j in range(b):
        if num - j < 0:
            return 0.0
        prod *= (num - j) / (den - j)
    return prod


def _accepted_factor(s_K_minus: float, phi_Z: float, b: int) -> float:
    return (1.0 - phi_Z) ** b + phi_Z**b - b * (b - 1) / s_K_minus


def accepted_single_blocks_lower_raw(
    n_K: float, s_K_minus: float, phi_Z_plus: float, b: int, eps_bar: float
) -> float:
    """Unclamped lower bound on accepted all-single-photon blocks."""
    _check_block(b)
    check_confidence(eps_bar, "eps_bar")
    if s_K_minus <= 0:
        raise AdValidityError(C_S_K_MONOTONE, "s_K_minus must be positive")
    if phi_Z_plus >= 0.5:
        raise AdValidityError(C_PHI_Z_HALF, f"phi_Z_plus = {phi_Z_plus!r}")
    if s_K_minus * ((1.0 - phi_Z_plus) ** b + phi_Z_plus**b) <= b * (b - 1):
        raise AdValidityError(C_S_K_MONOTONE)
    return float(
        block_count(n_K, b) * (s_K_minus / n_K) ** b * _accepted_factor(s_K_minus, phi_Z_plus, b)
        - mcdiarmid_block_delta(n_K, eps_bar)
    )


def accepted_single_blocks_lower(
    n_K: float, s_K_minus: float, phi_Z_plus: float, b: int, eps_bar: float
) -> float:
    """Lower bound on accepted all-single-photon blocks, clamped at zero."""
    return max(accepted_single_blocks_lower_raw(n_K, s_K_minus, phi_Z_plus, b, eps_bar), 0.0)


def delta_prime(n_K: float, s_K_minus: float, b: int, eps_bar: float) -> float:
    """Block-sampling correction entering the logical error-rate bound."""
    blocks = block_count(n_K, b)
    if blocks <= 0:
        raise ValueError(f"need n_K >= b, got n_K={n_K!r}, b={b!r}")
    return (n_K / s_K_minus) ** b * mcdiarmid_block_delta(n_K, eps_bar) / blocks


def _phi_ratio(phi_X, phi_Z, b, d_num, d_den):
    num = 0.5 * ((1.0 - phi_Z) ** b - (1.0 - phi_Z - 2.0 * phi_X) ** b) + d_num
    den = (1.0 - phi_Z) ** b + phi_Z**b - d_den
    return num, den


def appendix_condition(phi_Z: float, phi_X: float) -> bool:
    """Sufficient analytic condition for monotonicity of the logical error bound."""
    if phi_X >= 0.5 or phi_Z >= 0.5:
        return False
    return phi_Z < 1.0 - phi_X - math.sqrt(phi_X * (1.0 - phi_X) + 0.5)


@lru_cache(maxsize=4)
def _unit_grid(points: int):
    g = np.linspace(0.0, 1.0, points)
    return np.meshgrid(g, g, indexing="ij")


def grid_monotone(phi_Z: float, phi_X: float, b: int, d_num: float, d_den: float,
                  points: int = GRID_POINTS) -> bool:
    """True if the ratio over the box below ``(phi_X, phi_Z)`` peaks at its top corner.

    The estimator is only sound if replacing the true rates by their upper
    bounds cannot decrease it; this checks that on a tensor grid.
    """
    U, V = _unit_grid(points)
    X, Z = phi_X * U, phi_Z * V
    num, den = _phi_ratio(X, Z, b, d_num, d_den)
    if np.any(den <= 0):
        return False
    corner_num, corner_den = _phi_ratio(phi_X, phi_Z, b, d_num, d_den)
    corner = corner_num / corner_den
    return bool(np.max(num / den) <= corner * (1.0 + 1e-12) + 1e-300)


def logical_x_conditions(n_K, s_K_minus, phi_Z_plus, phi_X_plus, b, eps_bar,
                         monotonicity: str = "grid") -> dict[str, bool]:
    """Evaluate every validity condition of the logical error-rate bound."""
    if monotonicity not in MONOTONICITY_POLICIES:
        raise ValueError(f"monotonicity must be one of {MONOTONICITY_POLICIES}, got {monotonicity!r}")
    flags = {
        C_PHI_Z_HALF: bool(phi_Z_plus < 0.5),
        C_S_K_MONOTONE: bool(s_K_minus > 0
                             and s_K_minus * ((1.0 - phi_Z_plus) ** b + phi_Z_plus**b) > b * (b - 1)),
        C_DOMAIN: bool(phi_Z_plus + 2.0 * phi_X_plus < 1.0 - phi_Z_plus),
        C_APPENDIX: appendix_condition(phi_Z_plus, phi_X_plus),
    }
    if s_K_minus > 0 and block_count(n_K, b) > 0:
        dp = delta_prime(n_K, s_K_minus, b, eps_bar)
        _, den = _phi_ratio(phi_X_plus, phi_Z_plus, b, dp, b * (b - 1) / s_K_minus + dp)
        flags[C_DENOMINATOR] = bool(den > 0)
    else:
        dp = math.inf
        flags[C_DENOMINATOR] = False
    if monotonicity == "appendix":
        flags[C_MONOTONE] = flags[C_APPENDIX]
    elif flags[C_APPENDIX] and flags[C_DENOMINATOR]:
        # the analytic condition is sufficient, so the grid is not needed
        flags[C_MONOTONE] = True
    elif flags[C_DOMAIN] and flags[C_DENOMINATOR] and flags[C_PHI_Z_HALF]:
        flags[C_MONOTONE] = grid_monotone(phi_Z_plus, phi_X_plus, b, dp, b * (b - 1) / s_K_minus + dp)
    else:
        flags[C_MONOTONE] = False
    return flags


REQUIRED = (C_PHI_Z_HALF, C_S_K_MONOTONE, C_DOMAIN, C_MONOTONE, C_DENOMINATOR)


def logical_x_error_upper_raw(n_K, s_K_minus, phi_Z_plus, phi_X_plus, b, eps_bar) -> float:
    """Unchecked, unclamped value of the logical X error-rate bound."""
    check_confidence(eps_bar, "eps_bar")
    dp = delta_prime(n_K, s_K_minus, b, eps_bar)
    num, den = _phi_ratio(phi_X_plus, phi_Z_plus, b, dp, b * (b - 1) / s_K_minus + dp)
    return num / den


def logical_x_error_upper(n_K, s_K_minus, phi_Z_plus, phi_X_plus, b, eps_bar,
                          monotonicity: str = "grid") -> float:
    """Upper bound on the logical X error rate of accepted single-photon blocks.

    Raises ``AdValidityError`` naming the first failed condition.
    """
    _check_block(b)
    flags = logical_x_conditions(n_K, s_K_minus, phi_Z_plus, phi_X_plus, b, eps_bar, monotonicity)
    for name in REQUIRED:
        if not flags[name]:
            raise AdValidityError(name)
    raw = logical_x_error_upper_raw(n_K, s_K_minus, phi_Z_plus, phi_X_plus, b, eps_bar)
    return min(max(raw, 0.0), 1.0)


@dataclass
class AdEstimates:
    """Block-wise bounds and expected distilled-key statistics of one run."""

    b: int
    S_K_bar_minus: float
    S_K_bar_minus_raw: float
    Phi_X_bar_plus: float
    Phi_X_bar_plus_raw: float
    Delta_prime: float
    N_K_bar: float
    Phi_K_bar: float
    validity: dict[str, bool] = field(default_factory=dict)
    monotonicity: str = "grid"
    clamped: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return all(self.validity.get(name, False) for name in REQUIRED)

    @property
    def failed(self) -> list[str]:
        return [name for name in REQUIRED if not self.validity.get(name, False)]


def estimate_ad(n_K: float, phi_K: float, de: DecoyEstimates, pp: ProtocolParams,
                monotonicity: str = "grid") -> AdEstimates:
    """Compute every block-wise estimate; failed conditions become flags, not errors."""
    b = int(pp.b)
    eps = pp.eps_bar
    s_K = de.s_K_minus
    phi_Z = de.phi_Z_plus_raw
    phi_X = de.phi_X_plus_raw
    nan = float("nan")
    if n_K >= b:
        N_K_bar, Phi_K_bar = distilled_key_stats(n_K, phi_K, b)
    else:
        N_K_bar, Phi_K_bar = 0.0, nan
    if phi_Z is None or phi_X is None or not de.valid or n_K < b or s_K <= 0:
        flags = {name: False for name in REQUIRED}
        flags[C_APPENDIX] = False
        return AdEstimates(b, 0.0, nan, 1.0, nan, nan, N_K_bar, Phi_K_bar, flags, monotonicity)

    flags = logical_x_conditions(n_K, s_K, phi_Z, phi_X, b, eps, monotonicity)
    dp = delta_prime(n_K, s_K, b, eps)
    S_raw = float(block_count(n_K, b) * (s_K / n_K) ** b * _accepted_factor(s_K, phi_Z, b)
                  - mcdiarmid_block_delta(n_K, eps))
    Phi_raw = float(logical_x_error_upper_raw(n_K, s_K, phi_Z, phi_X, b, eps)) if flags[C_DENOMINATOR] else nan
    clamped = []
    if S_raw < 0:
        clamped.append("S_K_bar_minus")
    if flags[C_DENOMINATOR] and not 0.0 <= Phi_raw <= 1.0:
        clamped.append("Phi_X_bar_plus")
    Phi = min(max(Phi_raw, 0.0), 1.0) if flags[C_DENOMINATOR] else 1.0
    return AdEstimates(b, max(S_raw, 0.0), S_raw, Phi, Phi_raw, dp, N_K_bar, Phi_K_bar,
                       flags, monotonicity, clamped)


def acceptance_test(ad: AdEstimates, pp: ProtocolParams) -> str:
    """Return ``"accept"`` or ``"abort"`` for the parameter-estimation outcome.

    Missing tolerances default to the estimates themselves, which is how a
    simulation matches the acceptance conditions exactly.
    """
    if not ad.valid:
        return "abort"
    s_tol = ad.S_K_bar_minus if pp.s_tol is None else pp.s_tol
    phi_tol = ad.Phi_X_bar_plus if pp.phi_tol is None else pp.phi_tol
    if ad.S_K_bar_minus >= s_tol and ad.Phi_X_bar_plus <= phi_tol:
        return "accept"
    return "abort"
