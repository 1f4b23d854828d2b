"""End-to-end conservativeness of the estimators on simulated protocol runs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..ad import estimate_ad
from ..decoy import estimate_decoy
from ..params import SETS, ChannelParams, ProtocolParams
from .blocks import block_counts
from .pulses import simulate_pulses
from .rng import stream

# Stated failure budgets, in units of eps_bar, of each estimated quantity.
BUDGETS = {
    "o": 2,
    "s": 5,
    "e": 2,
    "s_K": 5,
    "phi_Z": 13,
    "phi_X": 13,
    "S_Kbar": 1,
    "Phi_Xbar": 1,
    "combined": 23,
}

COMBINED = ("s_K", "phi_Z", "phi_X", "S_Kbar", "Phi_Xbar")

# Partitions of the key set use a separate family of streams.
PARTITION_STREAM_OFFSET = 1 << 40


@dataclass
class PipelineReport:
    """Violation counts per bound over the runs where every estimate was valid."""

    trials: int
    valid_runs: int
    violations: dict[str, int] = field(default_factory=dict)
    eps_bar: float = 0.0

    def frequency(self, name: str) -> float:
        return self.violations.get(name, 0) / self.valid_runs if self.valid_runs else 0.0

    def budget(self, name: str) -> float:
        base = name.split("[")[0]
        return BUDGETS[base] * self.eps_bar


def pipeline_experiment(pp: ProtocolParams, ch: ChannelParams, trials: int, seed: int,
                        m_Y: float = 0.0, monotonicity: str = "grid") -> PipelineReport:
    """Simulate ``trials`` runs and count every bound that fails its hidden truth.

    S_K̄ and Φ_X̄ come from a uniformly random partition of the run's key
    set into blocks of ``pp.b``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    b = int(pp.b)
    rep = PipelineReport(trials, 0, {}, pp.eps_bar)

    def hit(name: str, cond: bool):
        if cond:
            rep.violations[name] = rep.violations.get(name, 0) + 1

    for t in range(trials):
        ct, truth = simulate_pulses(pp, ch, seed, index=t, m_Y=m_Y)
        de = estimate_decoy(ct, pp)
        if not de.valid or ct.n_K < b:
            continue
        ad = estimate_ad(ct.n_K, ct.phi_K, de, pp, monotonicity)
        if not ad.valid:
            continue
        rep.valid_runs += 1
        for f in SETS:
            hit(f"o[{f}]", truth.o[f] < de.o_minus[f])
            hit(f"s[{f}]", truth.s[f] < de.s_minus[f])
        for f in ("T", "X"):
            hit(f"e[{f}]", truth.e[f] > de.e_plus[f])
        rng = stream(seed, PARTITION_STREAM_OFFSET + t)
        arranged = rng.permutation(truth.key_labels)[None, :]
        S, R = block_counts(arranged, b)
        S, R = int(S[0]), int(R[0])
        Phi = R / S if S else 0.0
        events = {
            "s_K": truth.s_K < de.s_K_minus,
            "phi_Z": truth.phi_Z > de.phi_Z_plus_raw,
            "phi_X": truth.phi_X > de.phi_X_plus_raw,
            "S_Kbar": S < ad.S_K_bar_minus,
            "Phi_Xbar": Phi > ad.Phi_X_bar_plus,
        }
        for name, cond in events.items():
            hit(name, cond)
        hit("combined", any(events[name] for name in COMBINED))
    return rep


def checked_names() -> list[str]:
    names = [f"o[{f}]" for f in SETS] + [f"s[{f}]" for f in SETS] + ["e[T]", "e[X]"]
    return names + list(COMBINED) + ["combined"]


def desk_point(N: float = 2e5, b: int = 2, eps_bar: float = 0.005) -> tuple[ProtocolParams, ChannelParams]:
    """A desk-scale parameter point where every estimate is valid with high probability."""
    pp = ProtocolParams(N=N, b=b, mu=(0.6, 0.2, 0.0), p_mu=(0.5, 0.35, 0.15), p_z=0.7,
                        q_t=0.3, eps_bar=eps_bar)
    ch = ChannelParams.from_degrees(eta=1.0, p_noise=0.0, delta_mis_deg=8.0)
    return pp, ch


__all__ = ["BUDGETS", "PipelineReport", "pipeline_experiment", "desk_point", "checked_names"]
