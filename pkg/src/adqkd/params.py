"""Protocol, channel and count-table value types."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any

import numpy as np

SETS = ("Z", "T", "X")
N_INTENSITIES = 3


class ParameterError(ValueError):
    """Invalid parameter value. ``field`` names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ParameterError(name, message)


@dataclass(frozen=True)
class ChannelParams:
    """Lossy, noisy, misaligned channel with a two-detector receiver.

    ``delta_mis`` is in radians.
    """

    eta: float
    p_noise: float = 0.0
    delta_mis: float = 0.0

    def __post_init__(self):
        _require(0.0 < self.eta <= 1.0, "eta", f"must lie in (0, 1], got {self.eta!r}")
        _require(0.0 <= self.p_noise < 1.0, "p_noise", f"must lie in [0, 1), got {self.p_noise!r}")
        _require(
            0.0 <= self.delta_mis <= math.pi / 4 + 1e-15,
            "delta_mis",
            f"must lie in [0, pi/4] radians, got {self.delta_mis!r}",
        )

    @classmethod
    def from_degrees(cls, eta: float, p_noise: float, delta_mis_deg: float) -> "ChannelParams":
        return cls(eta=eta, p_noise=p_noise, delta_mis=math.radians(delta_mis_deg))

    @property
    def loss_db(self) -> float:
        return -10.0 * math.log10(self.eta)


@dataclass(frozen=True)
class ProtocolParams:
    """Tunable inputs of a decoy-state BB84 run with advantage distillation.

    ``b = 1`` runs the block machinery without post-selection. ``eps_bar``
    defaults to ``eps_sec**2 / 368``. ``s_tol`` and ``phi_tol`` are only
    consulted by the acceptance test; simulations set them to the estimates.
    """

    N: float
    b: int = 2
    mu: tuple[float, float, float] = (0.5, 0.1, 0.0)
    p_mu: tuple[float, float, float] = (0.7, 0.2, 0.1)
    p_z: float = 0.9
    q_t: float = 0.1
    eps_cor: float = 1e-15
    eps_sec: float = 1e-9
    eps_bar: float | None = None
    f_ir: float = 1.2
    s_tol: float | None = None
    phi_tol: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        object.__setattr__(self, "p_mu", tuple(float(p) for p in self.p_mu))
        _require(self.N > 0, "N", f"must be positive, got {self.N!r}")
        _require(int(self.b) == self.b and self.b >= 1, "b", f"must be an integer >= 1, got {self.b!r}")
        _require(len(self.mu) == 3, "mu", "needs exactly three intensities")
        _require(len(self.p_mu) == 3, "p_mu", "needs exactly three probabilities")
        mu1, mu2, mu3 = self.mu
        _require(mu3 >= 0, "mu", f"mu3 must be >= 0, got {mu3!r}")
        _require(mu2 > mu3, "mu", f"need mu2 > mu3, got {self.mu!r}")
        _require(mu1 > mu2 + mu3, "mu", f"need mu1 > mu2 + mu3, got {self.mu!r}")
        _require(all(p > 0 for p in self.p_mu), "p_mu", f"entries must be positive, got {self.p_mu!r}")
        _require(abs(sum(self.p_mu) - 1.0) <= 1e-12, "p_mu", f"must sum to 1, got {sum(self.p_mu)!r}")
        _require(0.0 < self.p_z < 1.0, "p_z", f"must lie in (0, 1), got {self.p_z!r}")
        _require(0.0 <= self.q_t < 1.0, "q_t", f"must lie in [0, 1), got {self.q_t!r}")
        _require(0.0 < self.eps_cor < 1.0, "eps_cor", f"must lie in (0, 1), got {self.eps_cor!r}")
        _require(0.0 < self.eps_sec < 1.0, "eps_sec", f"must lie in (0, 1), got {self.eps_sec!r}")
        if self.eps_bar is None:
            object.__setattr__(self, "eps_bar", self.eps_sec**2 / 368.0)
        _require(0.0 < self.eps_bar <= 1.0, "eps_bar", f"must lie in (0, 1], got {self.eps_bar!r}")
        _require(self.f_ir >= 1.0, "f_ir", f"must be >= 1, got {self.f_ir!r}")
        if self.phi_tol is not None:
            _require(0.0 <= self.phi_tol <= 1.0, "phi_tol", f"must lie in [0, 1], got {self.phi_tol!r}")

    @property
    def p_x(self) -> float:
        return 1.0 - self.p_z

    def sifting_factor(self, f: str) -> float:
        """Probability that a pulse lands in set ``f`` given a detection."""
        if f == "Z":
            return self.p_z**2 * (1.0 - self.q_t)
        if f == "T":
            return self.p_z**2 * self.q_t
        if f == "X":
            return self.p_x**2
        raise KeyError(f)

    def with_(self, **changes: Any) -> "ProtocolParams":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class CountTable:
    """Detections ``n[f][i]`` and errors ``m[f][i]`` per set and intensity.

    Counts are real valued so that expectations can be used directly.
    """

    n: dict[str, np.ndarray] = field(default_factory=dict)
    m: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for table_name, table in (("n", self.n), ("m", self.m)):
            for f in SETS:
                row = np.asarray(table.get(f, np.zeros(N_INTENSITIES)), dtype=float)
                if row.shape != (N_INTENSITIES,):
                    raise ParameterError(table_name, f"row {f} must have {N_INTENSITIES} entries")
                table[f] = row
        for f in SETS:
            if np.any(self.n[f] < 0) or np.any(self.m[f] < 0):
                raise ParameterError("counts", f"negative count in set {f}")
            if np.any(self.m[f] > self.n[f] * (1 + 1e-12) + 1e-9):
                raise ParameterError("counts", f"errors exceed detections in set {f}")

    def n_f(self, f: str) -> float:
        return float(self.n[f].sum())

    def m_f(self, f: str) -> float:
        return float(self.m[f].sum())

    @property
    def n_K(self) -> float:
        return float(self.n["Z"][0] + self.n["Z"][1])

    @property
    def m_K(self) -> float:
        return float(self.m["Z"][0] + self.m["Z"][1])

    @property
    def phi_K(self) -> float:
        n_K = self.n_K
        if n_K <= 0:
            raise ValueError("phi_K undefined: empty key set")
        return self.m_K / n_K

    def scaled(self, factor: float) -> "CountTable":
        return CountTable(
            n={f: self.n[f] * factor for f in SETS},
            m={f: self.m[f] * factor for f in SETS},
        )
