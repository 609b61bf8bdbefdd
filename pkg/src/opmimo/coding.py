"""Transmit-side bit chain and the BCJR decoder.

LLR convention throughout: ``L = log P(bit=0) / P(bit=1)``, positive means
0 is more likely.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .config import CodeSpec, Modulation


class LengthError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Trellis:
    """Shift-register trellis: state holds the previous ``K-1`` inputs, newest in the MSB."""

    spec: CodeSpec
    next_state: np.ndarray  # (S, 2) int32
    outputs: np.ndarray  # (S, 2) int32, bit j = generator j

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_out(self) -> int:
        return len(self.spec.generators)


@lru_cache(maxsize=None)
def trellis(spec: CodeSpec) -> Trellis:
    K = spec.constraint_length
    S = 1 << (K - 1)
    next_state = np.empty((S, 2), dtype=np.int32)
    outputs = np.zeros((S, 2), dtype=np.int32)
    for s in range(S):
        for u in range(2):
            reg = (u << (K - 1)) | s
            next_state[s, u] = reg >> 1
            for j, g in enumerate(spec.generators):
                outputs[s, u] |= (bin(reg & g).count("1") & 1) << j
    next_state.setflags(write=False)
    outputs.setflags(write=False)
    return Trellis(spec, next_state, outputs)


def encode(info_bits: np.ndarray, spec: CodeSpec, info_length: int | None = None) -> np.ndarray:
    """Zero-tail terminated convolutional encoding.

    Output is interleaved per trellis step: ``c[n*t + j]`` is generator ``j``
    at step ``t``; length ``n * (len(info) + K - 1)``.
    """
    u = np.asarray(info_bits, dtype=np.int64).ravel()
    if info_length is not None and u.size != info_length:
        raise LengthError(f"expected {info_length} info bits, got {u.size}")
    K = spec.constraint_length
    padded = np.concatenate([np.zeros(K - 1, dtype=np.int64), u, np.zeros(K - 1, dtype=np.int64)])
    T = u.size + K - 1
    out = np.empty((T, len(spec.generators)), dtype=np.int8)
    for j, g in enumerate(spec.generators):
        taps = np.array([(g >> (K - 1 - i)) & 1 for i in range(K)], dtype=np.int64)
        # taps[i] multiplies u_{t-i}
        out[:, j] = np.convolve(padded, taps)[K - 1:K - 1 + T] & 1
    return out.ravel()


def bcjr_decode(llrs: np.ndarray, spec: CodeSpec, terminated: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Log-MAP decoding with the exact Jacobian correction.

    Returns ``(info_decisions, info_llrs, coded_posterior_llrs)``; tail bits
    are stripped from the info outputs.
    """
    tr = trellis(spec)
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.size % tr.n_out or llrs.size // tr.n_out <= (spec.memory if terminated else 0):
        raise LengthError(f"{llrs.size} LLRs do not form a codeword of a rate-1/{tr.n_out} code")
    T = llrs.size // tr.n_out
    info, coded = kernels.bcjr_logmap(
        np.ascontiguousarray(llrs.reshape(T, tr.n_out)), tr.next_state, tr.outputs, int(terminated)
    )
    if terminated:
        info = info[: T - spec.memory]
    return (info < 0).astype(np.int8), info, coded.ravel()


# --- interleaver -------------------------------------------------------------

@lru_cache(maxsize=None)
def interleaver(N: int, M: int, bits_per_symbol: int) -> np.ndarray:
    """Position permutation ``pos[k]``: coded bit ``k`` goes to interleaved slot ``pos[k]``.

    Coded bit ``k`` uses bit plane ``k // MN`` of symbol ``j = k mod MN``;
    symbol ``j`` sits at grid element ``p = j mod N``,
    ``n = (j // N + p) mod M``, so consecutive coded bits walk the grid
    diagonally.  Planes are offset by ``MN / planes`` symbols so the bits
    of one symbol come from distant code positions.
    """
    MN = N * M
    k = np.arange(MN * bits_per_symbol)
    plane = k // MN
    j = (k + plane * (MN // bits_per_symbol)) % MN
    p = j % N
    n = (j // N + p) % M
    pos = (p + n * N) * bits_per_symbol + plane
    pos.setflags(write=False)
    return pos


def interleave(coded_bits: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Permute along the last axis: ``out[..., pos[k]] = coded_bits[..., k]``."""
    coded_bits = np.asarray(coded_bits)
    out = np.empty_like(coded_bits)
    out[..., pos] = coded_bits
    return out


def deinterleave(values: np.ndarray, pos: np.ndarray) -> np.ndarray:
    return np.asarray(values)[..., pos]


# --- symbol mapping ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Constellation:
    """Gray-labelled unit-energy alphabet; ``labels[i, k]`` is bit k of ``points[i]``."""

    points: np.ndarray
    labels: np.ndarray

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]


def _gray_pam(bits: int) -> tuple[np.ndarray, np.ndarray]:
    levels = 1 << bits
    amp = np.arange(levels) * 2.0 - (levels - 1)  # -3,-1,1,3 or -1,1
    gray = np.arange(levels) ^ (np.arange(levels) >> 1)
    labels = ((gray[:, None] >> np.arange(bits)[::-1]) & 1).astype(np.int8)
    # all-zero label on the largest positive level
    return amp[::-1], labels


@lru_cache(maxsize=None)
def constellation(modulation: Modulation) -> Constellation:
    modulation = Modulation(modulation)
    half = modulation.bits_per_symbol // 2
    amp, lab = _gray_pam(half)
    pts = (amp[:, None] + 1j * amp[None, :]).ravel()
    labels = np.concatenate(
        [np.repeat(lab, amp.size, axis=0), np.tile(lab, (amp.size, 1))], axis=1
    )
    # Interleave I and Q bits: bits (b0, b1, ...) -> I gets even, Q gets odd.
    order = np.empty(2 * half, dtype=int)
    order[0::2] = np.arange(half)
    order[1::2] = half + np.arange(half)
    labels = labels[:, order]
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    pts.setflags(write=False)
    labels.setflags(write=False)
    return Constellation(pts, labels)


def map_bits(bits: np.ndarray, modulation: Modulation, num_symbols: int | None = None) -> np.ndarray:
    """Map consecutive groups of bits to symbols (symbol ``j`` takes bits ``j*bps ..``)."""
    const = constellation(modulation)
    bps = const.bits_per_symbol
    bits = np.asarray(bits).ravel()
    if bits.size % bps or (num_symbols is not None and bits.size != num_symbols * bps):
        raise LengthError(f"{bits.size} bits do not fill the symbol grid")
    weights = 1 << np.arange(bps)[::-1]
    index_of_label = np.empty(1 << bps, dtype=int)
    index_of_label[const.labels @ weights] = np.arange(const.points.size)
    return const.points[index_of_label[bits.reshape(-1, bps) @ weights]]


def demap_hard(symbols: np.ndarray, modulation: Modulation) -> np.ndarray:
    const = constellation(modulation)
    d = np.abs(np.asarray(symbols)[:, None] - const.points[None, :])
    return const.labels[d.argmin(axis=1)].ravel()
