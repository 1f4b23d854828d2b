"""Decoy-state bounds on vacuum, single-photon and error counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bounds import check_confidence, combined_delta_row, serfling_nu
from .params import SETS, CountTable, ProtocolParams

TEST_SETS = ("T", "X")


class InvalidEstimateError(ValueError):
    """A bound needed as a denominator is not positive; the run must abort."""


def tau(k: int, mu: Sequence[float], p_mu: Sequence[float], restricted: bool = False) -> float:
    """Probability that a pulse carries ``k`` photons under the intensity mixture.

    With ``restricted`` only the two signal intensities are summed.

    >>> tau(0, (0.0, 0.0, 0.0), (0.5, 0.3, 0.2))
    1.0
    """
    if k < 0:
        raise ValueError(f"photon number must be >= 0, got {k!r}")
    idx = range(2) if restricted else range(3)
    total = 0.0
    for i in idx:
        # 0**0 == 1 in Python, which is what the vacuum term needs
        total += p_mu[i] * math.exp(-mu[i]) * mu[i] ** k / math.factorial(k)
    return total


@dataclass
class BoundedCounts:
    """Upper and lower bounds on the expectations of every count cell."""

    n_plus: dict[str, np.ndarray]
    n_minus: dict[str, np.ndarray]
    m_plus: dict[str, np.ndarray]
    m_minus: dict[str, np.ndarray]
    clamped: list[str] = field(default_factory=list)


def bounded_expectations(ct: CountTable, eps_bar: float) -> BoundedCounts:
    """Bound every cell of ``ct`` using the set total for the Hoeffding branch."""
    check_confidence(eps_bar, "eps_bar")
    out = BoundedCounts({}, {}, {}, {})
    for label, table, up_tab, lo_tab in (
        ("n", ct.n, out.n_plus, out.n_minus),
        ("m", ct.m, out.m_plus, out.m_minus),
    ):
        rows = np.stack([table[f] for f in SETS])
        up = rows + combined_delta_row(rows, eps_bar, "upper")
        lo = rows - combined_delta_row(rows, eps_bar, "lower")
        for i, f in enumerate(SETS):
            up_tab[f] = up[i]
            lo_tab[f] = np.maximum(lo[i], 0.0)
            if lo[i].min() < 0:
                out.clamped.append(f"{label}_minus[{f}]")
    return out


def _require_probs(p_mu: Sequence[float], *idx: int) -> None:
    for i in idx:
        if p_mu[i] <= 0:
            raise ZeroDivisionError(f"p_mu{i + 1} must be positive")


def vacuum_lower_raw(n_minus: np.ndarray, n_plus: np.ndarray, mu, p_mu) -> float:
    """Unclamped vacuum lower bound for one set."""
    mu1, mu2, mu3 = mu
    _require_probs(p_mu, 1, 2)
    t0 = tau(0, mu, p_mu)
    return float(t0 / (mu2 - mu3) * (
        mu2 * math.exp(mu3) * n_minus[2] / p_mu[2] - mu3 * math.exp(mu2) * n_plus[1] / p_mu[1]
    ))


def single_photon_lower_raw(n_minus: np.ndarray, n_plus: np.ndarray, o_minus: float, mu, p_mu) -> float:
    """Unclamped single-photon lower bound for one set, given its clamped vacuum bound."""
    mu1, mu2, mu3 = mu
    _require_probs(p_mu, 0, 1, 2)
    t0 = tau(0, mu, p_mu)
    t1 = tau(1, mu, p_mu)
    d2 = mu2**2 - mu3**2
    bracket = (
        math.exp(mu2) * n_minus[1] / p_mu[1]
        - math.exp(mu3) * n_plus[2] / p_mu[2]
        + d2 / mu1**2 * (o_minus / t0 - math.exp(mu1) * n_plus[0] / p_mu[0])
    )
    return float(t1 * mu1 / (mu1 * (mu2 - mu3) - d2) * bracket)


def single_photon_error_upper_raw(m_minus: np.ndarray, m_plus: np.ndarray, mu, p_mu) -> float:
    """Unclamped upper bound on single-photon errors in a test set."""
    mu1, mu2, mu3 = mu
    _require_probs(p_mu, 1, 2)
    t1 = tau(1, mu, p_mu)
    return float(t1 / (mu2 - mu3) * (
        math.exp(mu2) * m_plus[1] / p_mu[1] - math.exp(mu3) * m_minus[2] / p_mu[2]
    ))


def vacuum_lower(f: str, bc: BoundedCounts, pp: ProtocolParams) -> float:
    """Clamped lower bound on vacuum detections in set ``f``."""
    return max(vacuum_lower_raw(bc.n_minus[f], bc.n_plus[f], pp.mu, pp.p_mu), 0.0)


def single_photon_lower(f: str, bc: BoundedCounts, o_minus: float, pp: ProtocolParams) -> float:
    """Clamped lower bound on single-photon detections in set ``f``."""
    return max(single_photon_lower_raw(bc.n_minus[f], bc.n_plus[f], o_minus, pp.mu, pp.p_mu), 0.0)


def single_photon_error_upper(f: str, bc: BoundedCounts, pp: ProtocolParams) -> float:
    """Clamped upper bound on single-photon errors in test set ``f``."""
    if f not in TEST_SETS:
        raise ValueError(f"errors are only disclosed for the test sets, got {f!r}")
    return max(single_photon_error_upper_raw(bc.m_minus[f], bc.m_plus[f], pp.mu, pp.p_mu), 0.0)


def key_set_bounds(o_Z_minus: float, s_Z_minus: float, mu, p_mu) -> tuple[float, float]:
    """Scale the Z-set bounds to the key set, which drops the vacuum intensity."""
    t0, t1 = tau(0, mu, p_mu), tau(1, mu, p_mu)
    t0p, t1p = tau(0, mu, p_mu, restricted=True), tau(1, mu, p_mu, restricted=True)
    if t0 <= 0 or t1 <= 0:
        raise ValueError("tau0 and tau1 must be positive")
    return t0p / t0 * o_Z_minus, t1p / t1 * s_Z_minus


def extrapolated_error_rate(e_plus: float, s_test_minus: float, s_K_minus: float, eps_bar: float) -> float:
    """Upper bound on the single-photon error rate of the key set from one test set."""
    if s_test_minus <= 0 or s_K_minus <= 0:
        raise InvalidEstimateError("single-photon bounds must be positive to extrapolate an error rate")
    return e_plus / s_test_minus + serfling_nu(s_K_minus, s_test_minus, eps_bar)


def error_rate_uppers(
    e_plus: dict[str, float], s_minus: dict[str, float], s_K_minus: float, eps_bar: float
) -> tuple[float, float]:
    """Raw (unclamped) phase and bit error-rate bounds from the T and X sets."""
    phi_Z = extrapolated_error_rate(e_plus["T"], s_minus["T"], s_K_minus, eps_bar)
    phi_X = extrapolated_error_rate(e_plus["X"], s_minus["X"], s_K_minus, eps_bar)
    return phi_Z, phi_X


@dataclass
class DecoyEstimates:
    """Every intermediate decoy-state bound of one parameter-estimation run.

    ``phi_Z_plus`` is ``None`` when the T set is empty (plain BB84 needs no
    Z-basis error estimate). Raw values keep what clamping discarded.
    """

    tau0: float
    tau1: float
    tau0_prime: float
    tau1_prime: float
    bounded: BoundedCounts
    o_minus: dict[str, float]
    s_minus: dict[str, float]
    e_plus: dict[str, float]
    o_K_minus: float
    s_K_minus: float
    phi_Z_plus: float | None
    phi_X_plus: float | None
    phi_Z_plus_raw: float | None
    phi_X_plus_raw: float | None
    clamped: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def valid(self) -> bool:
        return self.error is None


def _clamp01(x: float | None) -> float | None:
    return None if x is None else min(max(x, 0.0), 1.0)


def estimate_decoy(ct: CountTable, pp: ProtocolParams, need_phi_Z: bool = True) -> DecoyEstimates:
    """Run every decoy estimator on ``ct``.

    A non-positive single-photon bound in a set that feeds an error-rate
    extrapolation does not raise; the estimate comes back with ``error`` set.
    """
    eps = pp.eps_bar
    mu, p_mu = pp.mu, pp.p_mu
    bc = bounded_expectations(ct, eps)
    clamped = list(bc.clamped)
    o_minus, s_minus, e_plus = {}, {}, {}
    for f in SETS:
        o_raw = vacuum_lower_raw(bc.n_minus[f], bc.n_plus[f], mu, p_mu)
        o_minus[f] = max(o_raw, 0.0)
        s_raw = single_photon_lower_raw(bc.n_minus[f], bc.n_plus[f], o_minus[f], mu, p_mu)
        s_minus[f] = max(s_raw, 0.0)
        if o_raw < 0:
            clamped.append(f"o_minus[{f}]")
        if s_raw < 0:
            clamped.append(f"s_minus[{f}]")
    for f in TEST_SETS:
        e_raw = single_photon_error_upper_raw(bc.m_minus[f], bc.m_plus[f], mu, p_mu)
        e_plus[f] = max(e_raw, 0.0)
        if e_raw < 0:
            clamped.append(f"e_plus[{f}]")
    o_K, s_K = key_set_bounds(o_minus["Z"], s_minus["Z"], mu, p_mu)

    error = None
    phi_Z = phi_X = None
    try:
        phi_X = extrapolated_error_rate(e_plus["X"], s_minus["X"], s_K, eps)
        if need_phi_Z:
            phi_Z = extrapolated_error_rate(e_plus["T"], s_minus["T"], s_K, eps)
    except InvalidEstimateError as exc:
        error = str(exc)
    for name, val in (("phi_Z_plus", phi_Z), ("phi_X_plus", phi_X)):
        if val is not None and val > 1.0:
            clamped.append(name)

    return DecoyEstimates(
        tau0=tau(0, mu, p_mu),
        tau1=tau(1, mu, p_mu),
        tau0_prime=tau(0, mu, p_mu, restricted=True),
        tau1_prime=tau(1, mu, p_mu, restricted=True),
        bounded=bc,
        o_minus=o_minus,
        s_minus=s_minus,
        e_plus=e_plus,
        o_K_minus=o_K,
        s_K_minus=s_K,
        phi_Z_plus=_clamp01(phi_Z),
        phi_X_plus=_clamp01(phi_X),
        phi_Z_plus_raw=phi_Z,
        phi_X_plus_raw=phi_X,
        clamped=clamped,
        error=error,
    )
