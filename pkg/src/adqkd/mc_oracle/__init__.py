"""Monte Carlo and exact-enumeration oracles for the analytic estimators."""

from .rng import OracleStats, stream

__all__ = ["OracleStats", "stream"]
