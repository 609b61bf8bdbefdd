"""Massive-MIMO OFDM downlink simulator with two-dimensional orthogonal precoding."""

from .config import CodeSpec, CsiModel, Modulation, PrecoderKind, SystemConfig, validate
from .kernels import BACKEND

__all__ = ["BACKEND", "CodeSpec", "CsiModel", "Modulation", "PrecoderKind", "SystemConfig", "validate"]
__version__ = "0.1.0"
