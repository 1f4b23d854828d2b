"""Secure key length for decoy-state BB84, with and without advantage distillation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from .ad import AdEstimates, estimate_ad
from .bounds import binary_entropy, check_confidence, truncated_binary_entropy
from .channel import expected_counts
from .decoy import DecoyEstimates, estimate_decoy
from .params import ChannelParams, CountTable, ProtocolParams

SKL_CONSTANTS = ("derivation", "practical")
VARIANTS = ("AD_proof", "AD_simulation", "BB84")


@dataclass
class SklResult:
    """Key length in bits, the rate per sent pulse and every intermediate value."""

    ell: int
    N: float | None
    variant: str
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def rate(self) -> float:
        if self.N is None:
            return math.nan
        return self.ell / self.N

    @property
    def ell_raw(self) -> float:
        """Key length before flooring and clamping (negative when no key)."""
        return self.diagnostics.get("ell_raw", float(self.ell))

    @property
    def valid(self) -> bool:
        return bool(self.diagnostics.get("valid", True))


def lambda_ir(N_K_bar: float, Phi_K_bar: float, f_ir: float) -> float:
    """Bits leaked by information reconciliation at inefficiency ``f_ir``."""
    if f_ir < 1.0:
        raise ValueError(f"f_ir must be >= 1, got {f_ir!r}")
    return f_ir * N_K_bar * binary_entropy(Phi_K_bar)


def correctness_overhead(eps_cor: float) -> float:
    return math.log2(2.0 / eps_cor)


def pa_overhead(eps_sec: float, constant: str = "derivation") -> float:
    """Privacy-amplification cost in bits of the AD key length.

    ``"derivation"`` is the constant the security argument ends with;
    ``"practical"`` is the slightly looser form quoted for practical use.
    """
    check_confidence(eps_sec, "eps_sec")
    if constant == "derivation":
        return 4.0 * math.log2(2.0**1.75 / (eps_sec - eps_sec**2 / 8.0))
    if constant == "practical":
        return 4.0 * math.log2(4.0 / (eps_sec - eps_sec**2 / 4.0))
    raise ValueError(f"constant must be one of {SKL_CONSTANTS}, got {constant!r}")


def bb84_pa_overhead(eps_sec: float) -> float:
    check_confidence(eps_sec, "eps_sec")
    return 4.0 * math.log2(17.0 / (eps_sec * 2.0**0.25))


def _floor_clamp(x: float) -> int:
    if not math.isfinite(x):
        return 0
    return max(math.floor(x), 0)


def skl_ad_proof(S_tol: float, Phi_tol: float, lam: float, eps_cor: float, eps_sec: float,
                 constant: str = "derivation", N: float | None = None) -> SklResult:
    """Key length guaranteed once the acceptance test passed at the given tolerances."""
    if not 0.0 <= Phi_tol <= 1.0:
        raise ValueError(f"Phi_tol must lie in [0, 1], got {Phi_tol!r}")
    check_confidence(eps_cor, "eps_cor")
    raw = (S_tol * (1.0 - truncated_binary_entropy(Phi_tol)) - lam
           - correctness_overhead(eps_cor) - pa_overhead(eps_sec, constant))
    return SklResult(_floor_clamp(raw), N, "AD_proof",
                     {"ell_raw": raw, "lambda_ir": lam, "skl_constant": constant})


def skl_ad_simulation(de: DecoyEstimates, ad: AdEstimates, pp: ProtocolParams,
                      constant: str = "derivation") -> SklResult:
    """AD key length with tolerances set to the estimates and expected leakage."""
    lam = lambda_ir(ad.N_K_bar, ad.Phi_K_bar, pp.f_ir) if ad.N_K_bar > 0 else 0.0
    diag = {"decoy": de, "ad": ad, "lambda_ir": lam, "skl_constant": constant,
            "valid": ad.valid, "failed": ad.failed}
    if not ad.valid:
        diag["ell_raw"] = -math.inf
        return SklResult(0, pp.N, "AD_simulation", diag)
    proof = skl_ad_proof(ad.S_K_bar_minus, ad.Phi_X_bar_plus, lam, pp.eps_cor, pp.eps_sec, constant, pp.N)
    diag["ell_raw"] = proof.diagnostics["ell_raw"]
    return SklResult(proof.ell, pp.N, "AD_simulation", diag)


def skl_bb84(de: DecoyEstimates, ct: CountTable, pp: ProtocolParams) -> SklResult:
    """Key length of decoy-state BB84 with one-way post-processing."""
    n_K = ct.n_K
    diag: dict[str, Any] = {"decoy": de, "valid": de.valid and n_K > 0}
    if not diag["valid"] or de.phi_X_plus is None:
        diag["valid"] = False
        diag["ell_raw"] = -math.inf
        return SklResult(0, pp.N, "BB84", diag)
    phi_K = ct.phi_K
    lam = pp.f_ir * n_K * binary_entropy(phi_K)
    raw = (de.o_K_minus + de.s_K_minus * (1.0 - truncated_binary_entropy(de.phi_X_plus)) - lam
           - correctness_overhead(pp.eps_cor) - bb84_pa_overhead(pp.eps_sec))
    diag.update(lambda_ir=lam, ell_raw=raw)
    return SklResult(_floor_clamp(raw), pp.N, "BB84", diag)


def evaluate_counts(ct: CountTable, pp: ProtocolParams, variant: str = "ad",
                    constant: str = "derivation", monotonicity: str = "grid") -> SklResult:
    """Key length of a run whose counts are already known."""
    if variant == "bb84":
        de = estimate_decoy(ct, pp, need_phi_Z=False)
        res = skl_bb84(de, ct, pp)
    elif variant == "ad":
        de = estimate_decoy(ct, pp, need_phi_Z=True)
        ad = estimate_ad(ct.n_K, ct.phi_K, de, pp, monotonicity)
        res = skl_ad_simulation(de, ad, pp, constant)
    else:
        raise ValueError(f"variant must be 'ad' or 'bb84', got {variant!r}")
    res.diagnostics["phi_K"] = ct.phi_K
    res.diagnostics["counts"] = ct
    return res


def secure_key_length(pp: ProtocolParams, ch: ChannelParams, variant: str = "ad",
                      constant: str = "derivation", monotonicity: str = "grid") -> SklResult:
    """Expected-count key length of a simulated run over channel ``ch``."""
    return evaluate_counts(expected_counts(pp, ch), pp, variant, constant, monotonicity)
