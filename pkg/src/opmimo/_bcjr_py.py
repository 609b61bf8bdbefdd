"""Pure-numpy log-MAP forward-backward recursion (fallback for the compiled kernel)."""

from __future__ import annotations

import numpy as np


def bcjr_logmap(llr: np.ndarray, next_state: np.ndarray, outputs: np.ndarray, terminated: int):
    T, n = llr.shape
    S = next_state.shape[0]
    bits = (outputs[..., None] >> np.arange(n)) & 1  # (S, 2, n)
    signs = 1.0 - 2.0 * bits
    gam = 0.5 * np.einsum("tj,suj->tsu", llr, signs)

    # Every state of a feed-forward trellis has exactly two predecessors.
    flat_next = next_state.ravel()
    order = np.argsort(flat_next, kind="stable")
    pred_state = (order // 2).reshape(S, 2)
    pred_input = (order % 2).reshape(S, 2)

    alpha = np.full((T + 1, S), -np.inf)
    alpha[0, 0] = 0.0
    for t in range(T):
        cand = alpha[t, pred_state] + gam[t, pred_state, pred_input]
        a = np.logaddexp(cand[:, 0], cand[:, 1])
        alpha[t + 1] = a - a.max()

    beta = np.full((T + 1, S), -np.inf)
    if terminated:
        beta[T, 0] = 0.0
    else:
        beta[T] = 0.0
    for t in range(T - 1, -1, -1):
        cand = gam[t] + beta[t + 1, next_state]
        b = np.logaddexp(cand[:, 0], cand[:, 1])
        beta[t] = b - b.max()

    with np.errstate(invalid="ignore"):
        metric = alpha[:-1, :, None] + gam + beta[1:][:, next_state]  # (T, S, 2)
    flat = metric.reshape(T, 2 * S)
    info = _lse(metric[:, :, 0]) - _lse(metric[:, :, 1])
    bits_flat = bits.reshape(2 * S, n)
    coded = np.empty((T, n))
    for j in range(n):
        zero = bits_flat[:, j] == 0
        coded[:, j] = _lse(flat[:, zero]) - _lse(flat[:, ~zero])
    return info, coded


def _lse(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=1)
    finite = np.isfinite(m)
    out = np.full(x.shape[0], -np.inf)
    out[finite] = m[finite] + np.log(np.exp(x[finite] - m[finite, None]).sum(axis=1))
    return out
