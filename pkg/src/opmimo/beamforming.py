"""CSI error models, maximum-ratio transmission and the combined channel."""

from __future__ import annotations

import numpy as np

from .channel import ChannelTensor
from .config import CsiModel


class MissingSnapshotError(ValueError):
    pass


class ZeroChannelError(ValueError):
    pass


def apply_csi_model(channel: ChannelTensor, model: CsiModel | str) -> np.ndarray:
    """Base-station channel estimate ``g~`` for the downlink block, shape ``(A, N, M)``.

    PERBF knows the downlink channel exactly; BFBF holds the last uplink
    state (slot ``m = -1``) for the whole frame.
    """
    model = CsiModel(model)
    if channel.g.ndim != 3 or channel.g.shape[2] < 2:
        raise MissingSnapshotError("channel tensor lacks the m = -1 uplink snapshot")
    if model is CsiModel.PERBF:
        return channel.downlink
    A, N, M = channel.shape
    return np.broadcast_to(channel.uplink_snapshot[:, :, None], (A, N, M))


def csi_error(channel: ChannelTensor, estimate: np.ndarray) -> np.ndarray:
    """``e = g~ - g`` on the downlink block."""
    return estimate - channel.downlink


def mrt_weights(estimate: np.ndarray) -> np.ndarray:
    """``omega = conj(g~) / ||G~||_F`` with the norm over the whole (a, q, m) block."""
    norm = np.linalg.norm(estimate)
    if norm == 0:
        raise ZeroChannelError("channel estimate is identically zero")
    return estimate.conj() / norm


def combined_channel(channel: ChannelTensor | np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``phi[q, m] = sum_a g[a, q, m] * omega[a, q, m]``."""
    g = channel.downlink if isinstance(channel, ChannelTensor) else np.asarray(channel)
    if g.shape != weights.shape:
        raise ValueError(f"channel {g.shape} and weights {weights.shape} differ in shape")
    return np.einsum("aqm,aqm->qm", g, weights)


def beamformed_channel(channel: ChannelTensor, model: CsiModel | str) -> np.ndarray:
    """Combined channel for MRT under ``model``: ``sum_a g conj(g~) / ||G~||``.

    Real and imaginary parts are accumulated separately so that
    ``g~ = g`` yields an imaginary part of exactly zero.
    """
    est = apply_csi_model(channel, model)
    norm = np.linalg.norm(est)
    if norm == 0:
        raise ZeroChannelError("channel estimate is identically zero")
    g = channel.downlink
    re = (g.real * est.real + g.imag * est.imag).sum(axis=0)
    im = (g.imag * est.real - g.real * est.imag).sum(axis=0)
    return (re + 1j * im) / norm


def transmit_downlink(
    d: np.ndarray, phi: np.ndarray, rho: float, rng: np.random.Generator | None = None
) -> np.ndarray:
    """``psi = diag(vec(phi)) d + n / sqrt(rho)``; ``rho = inf`` disables noise."""
    psi = np.ravel(phi, order="F") * d
    if np.isfinite(rho):
        if rng is None:
            raise ValueError("a random generator is required for finite SNR")
        n = (rng.standard_normal(psi.size) + 1j * rng.standard_normal(psi.size)) / np.sqrt(2)
        psi = psi + n / np.sqrt(rho)
    return psi
