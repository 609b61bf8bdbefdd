"""Doubly selective tapped-delay-line channel with Clarke Doppler fading.

Each of the ``A`` base-station antennas sees an independent tapped delay
line on the integer sample grid.  Tap mean powers follow a sampled
exponential power-delay profile; every tap is a sum of ``K`` cisoids with
uniform arrival angles, which approaches the Clarke spectrum as K grows.
The channel is sampled once per OFDM symbol at the symbol midpoint, for
``m = -1 .. M-1``; slot ``m = -1`` is the last uplink state.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ValidatedConfig, validate

DUMP_MAGIC = b"OPMCHTNS"
_HEADER = struct.Struct("<8sIIII8x")  # magic, A, N, M+1, version, pad -> 32 bytes
DUMP_VERSION = 1


class DelayExceedsCPError(ConfigError):
    pass


@dataclass(frozen=True, eq=False)
class TapSet:
    """Sum-of-cisoids parameters, arrays shaped ``(A, L, K)``."""

    delays: np.ndarray  # (L,) integer sample delays
    powers: np.ndarray  # (L,) mean tap powers, sum = 1/A
    amplitudes: np.ndarray
    dopplers: np.ndarray  # Hz, f_d * cos(theta)
    phases: np.ndarray

    @property
    def num_antennas(self) -> int:
        return self.dopplers.shape[0]

    @property
    def num_taps(self) -> int:
        return self.delays.size

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        """Tap gains ``h_l^a(t)``, shape ``(A, L, len(times))``."""
        arg = 2 * np.pi * self.dopplers[..., None] * np.asarray(times) + self.phases[..., None]
        return np.einsum("alk,alkt->alt", self.amplitudes, np.exp(1j * arg))


@dataclass(frozen=True, eq=False)
class ChannelTensor:
    """Frequency response ``g[a, q, m+1]`` for ``m = -1 .. M-1``."""

    g: np.ndarray

    @property
    def uplink_snapshot(self) -> np.ndarray:
        return self.g[:, :, 0]

    @property
    def downlink(self) -> np.ndarray:
        return self.g[:, :, 1:]

    @property
    def shape(self) -> tuple[int, int, int]:
        """``(A, N, M)`` of the downlink block."""
        A, N, T = self.g.shape
        return A, N, T - 1


def exponential_pdp(config: ValidatedConfig) -> tuple[np.ndarray, np.ndarray]:
    """Integer tap delays and mean powers (normalised to ``1/A``)."""
    c = config.config
    delays = np.arange(config.num_taps)
    decay = c.rms_delay_spread * c.bandwidth
    if decay > 0:
        powers = np.exp(-delays / decay)
    else:
        powers = np.ones(1)
    powers = powers / (powers.sum() * c.num_antennas)
    return delays, powers


def generate_taps(config: ValidatedConfig, rng: np.random.Generator) -> TapSet:
    config = validate(config)
    c = config.config
    delays, powers = exponential_pdp(config)
    shape = (c.num_antennas, delays.size, c.num_cisoids)
    theta = rng.uniform(0.0, 2 * np.pi, shape)
    phases = rng.uniform(0.0, 2 * np.pi, shape)
    amplitudes = np.broadcast_to(np.sqrt(powers / c.num_cisoids)[None, :, None], shape)
    return TapSet(delays, powers, amplitudes, config.max_doppler * np.cos(theta), phases)


def symbol_times(config: ValidatedConfig) -> np.ndarray:
    """Midpoint times of OFDM symbols ``-1 .. M-1`` in seconds."""
    return (np.arange(-1, config.M) + 0.5) * config.symbol_duration


def taps_to_frequency_response(taps: TapSet, config: ValidatedConfig) -> ChannelTensor:
    """``g_{q,m}^a = sum_l h_l^a(t_m) exp(-j 2 pi q l / N)``."""
    config = validate(config)
    N, G = config.N, config.config.cp_length
    if taps.delays.max(initial=0) >= max(G, 1):
        raise DelayExceedsCPError(f"tap delay {taps.delays.max()} not shorter than CP length {G}")
    h = taps.evaluate(symbol_times(config))
    phase = np.exp(-2j * np.pi * np.outer(np.arange(N), taps.delays) / N)  # (N, L)
    return ChannelTensor(np.einsum("ql,alt->aqt", phase, h))


def generate_channel(config: ValidatedConfig, rng: np.random.Generator) -> ChannelTensor:
    return taps_to_frequency_response(generate_taps(config, rng), config)


def save_channel(channel: ChannelTensor, path: str | Path) -> None:
    """Little-endian complex64 dump in ``[a][q][m]`` order behind a 32-byte header."""
    A, N, T = channel.g.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DUMP_MAGIC, A, N, T, DUMP_VERSION))
        fh.write(np.ascontiguousarray(channel.g, dtype="<c8").tobytes())


def load_channel(path: str | Path) -> ChannelTensor:
    raw = Path(path).read_bytes()
    magic, A, N, T, _version = _HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC:
        raise ValueError(f"{path}: not a channel dump")
    g = np.frombuffer(raw, dtype="<c8", offset=_HEADER.size).reshape(A, N, T)
    return ChannelTensor(g.astype(complex))
