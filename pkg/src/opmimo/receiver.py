"""Iterative receiver: MMSE-windowed matched filter, then soft parallel
interference cancellation with decoder feedback.

All per-symbol quantities are column-major ``vec`` vectors of length MN,
matching :mod:`opmimo.precoding`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .coding import bcjr_decode, constellation, deinterleave, interleave, interleaver
from .config import Modulation, ValidatedConfig, validate
from .precoding import PrecoderSet, despread_matched, spread

LLR_CLIP = 50.0


@dataclass(frozen=True, eq=False)
class DetectionState:
    """Detector output of one iteration.

    ``alphas`` are the per-symbol observations (``b_hat`` in iteration 1,
    PIC outputs afterwards) obeying ``alpha ~ gains * b + noise`` with
    variance ``noise_var``.  ``gammas`` are the squared norms of the
    effective spreading sequences.
    """

    iteration: int
    alphas: np.ndarray
    gammas: np.ndarray
    gains: np.ndarray
    noise_var: np.ndarray
    llrs: np.ndarray
    soft_symbols: np.ndarray
    decisions: np.ndarray | None = None


def _vec(grid: np.ndarray) -> np.ndarray:
    return np.ravel(grid, order="F")


def mmse_window(phi: np.ndarray, rho: float) -> np.ndarray:
    """``w = conj(phi) / (|phi|^2 + 1/rho)``; elements with ``phi = 0`` get ``w = 0``."""
    phi = np.asarray(phi, dtype=complex)
    denom = np.abs(phi) ** 2 + 1.0 / rho
    out = np.zeros_like(phi)
    np.divide(phi.conj(), denom, out=out, where=denom > 0)
    return out


def weighted_power(S: PrecoderSet, grid: np.ndarray) -> np.ndarray:
    """``sum_{q,m} grid[q,m] |s^{p,n}_{q,m}|^2`` for every (p, n), as a vec."""
    F2, T2 = S.power_pattern()
    return _vec(F2.T @ grid @ T2)


def effective_gammas(S: PrecoderSet, phi: np.ndarray) -> np.ndarray:
    """``gamma_{p,n} = ||diag(phi) s_{p,n}||^2``."""
    return weighted_power(S, np.abs(phi) ** 2)


def symbol_llrs(alpha: np.ndarray, gain: np.ndarray, noise_var: np.ndarray,
                modulation: Modulation) -> np.ndarray:
    """Max-log bit LLRs for the scalar model ``alpha = gain * b + CN(0, noise_var)``.

    ``L_k = (min_{b: bit k = 1} |alpha - gain b|^2 - min_{b: bit k = 0} |alpha - gain b|^2) / noise_var``,
    clipped to +-``LLR_CLIP``.  Bits are returned symbol by symbol.
    """
    const = constellation(modulation)
    alpha = np.atleast_1d(alpha)
    gain = np.broadcast_to(gain, alpha.shape)
    noise_var = np.broadcast_to(noise_var, alpha.shape)
    dist = np.abs(alpha[:, None] - gain[:, None] * const.points[None, :]) ** 2
    llr = np.empty((alpha.size, const.bits_per_symbol))
    for k in range(const.bits_per_symbol):
        one = const.labels[:, k] == 1
        diff = dist[:, one].min(axis=1) - dist[:, ~one].min(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = diff / noise_var
        llr[:, k] = np.where(diff == 0, 0.0, v)
    return np.clip(llr, -LLR_CLIP, LLR_CLIP).ravel()


def soft_symbols(llrs: np.ndarray, modulation: Modulation) -> np.ndarray:
    """Symbol means ``E{b}`` under independent bit probabilities."""
    const = constellation(modulation)
    L = np.asarray(llrs, dtype=float).reshape(-1, const.bits_per_symbol)
    if const.bits_per_symbol == 2:
        # Gray QPSK: bit 0 -> real axis, bit 1 -> imaginary axis.
        return (np.tanh(L[:, 0] / 2) + 1j * np.tanh(L[:, 1] / 2)) / np.sqrt(2)
    # log P(bit = label)
    logp = -np.logaddexp(0.0, np.where(const.labels[None, :, :] == 0, -1.0, 1.0) * L[:, None, :])
    prob = np.exp(logp.sum(axis=2))
    return prob @ const.points


def first_iteration(psi: np.ndarray, phi: np.ndarray, S: PrecoderSet, rho: float,
                    modulation: Modulation = Modulation.QPSK) -> DetectionState:
    """``b_hat = S^H W psi``.

    The LLRs treat each ``b_hat`` as ``mu b + e`` with ``mu`` the diagonal of
    ``S^H W diag(phi) S`` and ``e`` collecting residual cross-talk and
    windowed noise.
    """
    w = mmse_window(phi, rho)
    wphi = w * phi
    b_hat = despread_matched(S, _vec(w) * psi)
    mu = weighted_power(S, wphi)
    crosstalk = np.maximum(weighted_power(S, np.abs(wphi) ** 2).real - np.abs(mu) ** 2, 0.0)
    noise = weighted_power(S, np.abs(w) ** 2).real / rho
    var = crosstalk + noise
    llrs = symbol_llrs(b_hat, mu, var, modulation)
    return DetectionState(
        iteration=1,
        alphas=b_hat,
        gammas=effective_gammas(S, phi).real,
        gains=mu,
        noise_var=var,
        llrs=llrs,
        soft_symbols=soft_symbols(llrs, modulation),
    )


def pic_iteration(state: DetectionState, psi: np.ndarray, phi: np.ndarray, S: PrecoderSet,
                  rho: float, modulation: Modulation = Modulation.QPSK) -> DetectionState:
    """``alpha_{p,n} = s~^H (psi - S~ b~ + s~_{p,n} b~_{p,n})`` for all (p, n) at once."""
    phi_v = _vec(phi)
    fb = state.soft_symbols
    residual = psi - phi_v * spread(S, fb)
    gamma = state.gammas
    alpha = despread_matched(S, phi_v.conj() * residual) + gamma * fb
    var = gamma / rho
    llrs = symbol_llrs(alpha, gamma, var, modulation)
    return DetectionState(
        iteration=state.iteration + 1,
        alphas=alpha,
        gammas=gamma,
        gains=gamma,
        noise_var=np.broadcast_to(var, alpha.shape),
        llrs=llrs,
        soft_symbols=soft_symbols(llrs, modulation),
    )


def detect_frame(psi: np.ndarray, phi: np.ndarray, S: PrecoderSet,
                 config: ValidatedConfig, trace: list | None = None) -> tuple[np.ndarray, DetectionState]:
    """Run the full iterative receiver and return hard info-bit decisions.

    Every iteration decodes; the decoder's coded-bit posteriors become the
    soft-symbol feedback of the next PIC pass.  If ``trace`` is a list, one
    :class:`DetectionState` per iteration is appended (with ``decisions``
    and post-decoder ``soft_symbols``).
    """
    config = validate(config)
    c = config.config
    pos = interleaver(config.N, config.M, c.modulation.bits_per_symbol)
    state = None
    decisions = None
    for _ in range(c.num_pic_iterations):
        if state is None:
            state = first_iteration(psi, phi, S, c.snr, c.modulation)
        else:
            state = pic_iteration(state, psi, phi, S, c.snr, c.modulation)
        decisions, _, posterior = bcjr_decode(deinterleave(state.llrs, pos), c.code_spec)
        post = np.clip(posterior, -LLR_CLIP, LLR_CLIP)
        state = dataclasses.replace(
            state,
            soft_symbols=soft_symbols(interleave(post, pos), c.modulation),
            decisions=decisions,
        )
        if trace is not None:
            trace.append(state)
    return decisions, state
