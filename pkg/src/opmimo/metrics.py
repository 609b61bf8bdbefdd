"""Effective channel coefficients, hardening statistics and BER tallies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beamforming import ZeroChannelError
from .channel import ChannelTensor

HIST_BINS = 60
HIST_HEADROOM = 1.05


def gamma_cm(channel: ChannelTensor | np.ndarray, estimate: np.ndarray) -> float:
    """``gamma = 1/MN sum_{q,m} |sum_a g g~* / ||G~|| |^2`` for constant-modulus precoding."""
    g = channel.downlink if isinstance(channel, ChannelTensor) else np.asarray(channel)
    norm = np.linalg.norm(estimate)
    if norm == 0:
        raise ZeroChannelError("channel estimate is identically zero")
    phi = np.einsum("aqm,aqm->qm", g, estimate.conj()) / norm
    return float(np.mean(np.abs(phi) ** 2))


def gamma_from_phi(phi: np.ndarray) -> float:
    """Same quantity as :func:`gamma_cm`, from the combined channel."""
    return float(np.mean(np.abs(phi) ** 2))


def gamma_no_op(phi: np.ndarray) -> np.ndarray:
    """Per-element coefficients without precoding, ``|phi_{q,m}|^2``."""
    return np.abs(phi) ** 2


@dataclass(frozen=True, eq=False)
class HardeningStats:
    samples: np.ndarray
    mean: float
    std: float
    beta: float
    bin_edges: np.ndarray
    density: np.ndarray

    @property
    def num_samples(self) -> int:
        return self.samples.size


def histogram(samples: np.ndarray, bins: int = HIST_BINS) -> tuple[np.ndarray, np.ndarray]:
    """Uniform bins on ``[0, 1.05 max]``, normalised to unit area."""
    top = float(samples.max()) * HIST_HEADROOM if samples.size else 1.0
    if top <= 0:
        top = 1.0
    density, edges = np.histogram(samples, bins=bins, range=(0.0, top), density=True)
    return edges, density


def hardening_stats(gammas, bins: int = HIST_BINS) -> HardeningStats:
    """Population mean/std (divisor F) and ``beta = sigma / mu``."""
    x = np.asarray(gammas, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no gamma samples")
    mu = float(x.mean())
    sigma = float(np.sqrt(np.mean((x - mu) ** 2)))
    beta = sigma / mu if mu > 0 else float("nan")
    edges, density = histogram(x, bins)
    return HardeningStats(x, mu, sigma, beta, edges, density)


@dataclass
class BerTally:
    bit_errors: int = 0
    bits: int = 0
    frame_errors: int = 0
    frames: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else float("nan")

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else float("nan")

    def merge(self, other: "BerTally") -> "BerTally":
        return BerTally(
            self.bit_errors + other.bit_errors,
            self.bits + other.bits,
            self.frame_errors + other.frame_errors,
            self.frames + other.frames,
        )


def tally_ber(tx_bits: np.ndarray, rx_bits: np.ndarray, tally: BerTally | None = None) -> BerTally:
    tx = np.asarray(tx_bits)
    rx = np.asarray(rx_bits)
    if tx.shape != rx.shape:
        raise ValueError(f"bit vectors differ in length: {tx.shape} vs {rx.shape}")
    errors = int(np.count_nonzero(tx != rx))
    return (tally or BerTally()).merge(BerTally(errors, tx.size, int(errors > 0), 1))


@dataclass
class GammaCollector:
    """Accumulates per-frame gamma samples for several named table rows."""

    rows: dict[str, list[np.ndarray]] = field(default_factory=dict)

    def add(self, label: str, values) -> None:
        self.rows.setdefault(label, []).append(np.atleast_1d(np.asarray(values, dtype=float)))

    def stats(self, label: str) -> HardeningStats:
        return hardening_stats(np.concatenate(self.rows[label]))


def format_beta_table(stats: dict[str, HardeningStats]) -> str:
    """Aligned text table with one row per beam-forming/precoding combination."""
    width = max(len("Type"), *(len(k) for k in stats))
    lines = [f"{'Type':<{width}}  {'beta':>8}  {'mu_gamma':>12}  {'sigma_gamma':>12}"]
    lines.append("-" * len(lines[0]))
    for label, st in stats.items():
        lines.append(f"{label:<{width}}  {st.beta:8.4f}  {st.mean:12.6g}  {st.std:12.6g}")
    return "\n".join(lines) + "\n"
