"""Finite-size key rates for decoy-state BB84 with advantage distillation."""

from .params import ChannelParams, CountTable, ParameterError, ProtocolParams
from .skl import SklResult, evaluate_counts, secure_key_length

__all__ = [
    "ChannelParams",
    "CountTable",
    "ParameterError",
    "ProtocolParams",
    "SklResult",
    "evaluate_counts",
    "secure_key_length",
]

__version__ = "0.1.0"
