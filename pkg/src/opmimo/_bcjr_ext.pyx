# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled log-MAP forward-backward recursion over a binary-input trellis."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, exp, log, log1p

cnp.import_array()

# log1p(exp(-37)) < 1e-16; below double resolution of the result.
cdef double MAXSTAR_CUTOFF = 37.0


cdef inline double maxstar(double a, double b) noexcept nogil:
    cdef double d
    if a < b:
        a, b = b, a
    if b == -INFINITY:
        return a
    d = a - b
    if d > MAXSTAR_CUTOFF:
        return a
    return a + log1p(exp(-d))


def bcjr_logmap(const double[:, ::1] llr, const int[:, ::1] next_state,
                const int[:, ::1] outputs, int terminated):
    """Return ``(info_llr, coded_llr)`` for coded-bit LLRs ``llr`` of shape (T, n).

    ``outputs[s, u]`` packs the n output bits of branch (s, u), bit j = output j.
    LLRs are ``log P(0) / P(1)``.  Path metrics are kept in the log domain;
    the per-step a-posteriori sums are formed relative to the step maximum.
    """
    cdef Py_ssize_t T = llr.shape[0]
    cdef Py_ssize_t n = llr.shape[1]
    cdef Py_ssize_t S = next_state.shape[0]
    cdef Py_ssize_t P = 1 << n
    cdef Py_ssize_t t, s, j
    cdef int u, ns, out, pat
    cdef double acc, best, v, p

    alpha_arr = np.full((T + 1, S), -np.inf)
    beta_arr = np.full((T + 1, S), -np.inf)
    branch_arr = np.empty((T, P))
    metric_arr = np.empty((S, 2))
    info_arr = np.empty(T)
    coded_arr = np.empty((T, n))
    sums_arr = np.empty((n, 2))
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, ::1] branch = branch_arr
    cdef double[:, ::1] metric = metric_arr
    cdef double[::1] info = info_arr
    cdef double[:, ::1] coded = coded_arr
    cdef double[:, ::1] sums = sums_arr
    cdef double u0, u1

    with nogil:
        # Branch metric depends only on the output pattern.
        for t in range(T):
            for pat in range(P):
                acc = 0.0
                for j in range(n):
                    if (pat >> j) & 1:
                        acc -= 0.5 * llr[t, j]
                    else:
                        acc += 0.5 * llr[t, j]
                branch[t, pat] = acc

        alpha[0, 0] = 0.0
        for t in range(T):
            for s in range(S):
                if alpha[t, s] == -INFINITY:
                    continue
                for u in range(2):
                    ns = next_state[s, u]
                    alpha[t + 1, ns] = maxstar(alpha[t + 1, ns], alpha[t, s] + branch[t, outputs[s, u]])
            best = -INFINITY
            for s in range(S):
                if alpha[t + 1, s] > best:
                    best = alpha[t + 1, s]
            for s in range(S):
                alpha[t + 1, s] -= best

        if terminated:
            beta[T, 0] = 0.0
        else:
            for s in range(S):
                beta[T, s] = 0.0
        for t in range(T - 1, -1, -1):
            best = -INFINITY
            for s in range(S):
                acc = maxstar(branch[t, outputs[s, 0]] + beta[t + 1, next_state[s, 0]],
                              branch[t, outputs[s, 1]] + beta[t + 1, next_state[s, 1]])
                beta[t, s] = acc
                if acc > best:
                    best = acc
            if best != -INFINITY:
                for s in range(S):
                    beta[t, s] -= best

        for t in range(T):
            best = -INFINITY
            for s in range(S):
                for u in range(2):
                    v = alpha[t, s] + branch[t, outputs[s, u]] + beta[t + 1, next_state[s, u]]
                    metric[s, u] = v
                    if v > best:
                        best = v
            u0 = 0.0
            u1 = 0.0
            for j in range(n):
                sums[j, 0] = 0.0
                sums[j, 1] = 0.0
            for s in range(S):
                for u in range(2):
                    v = metric[s, u]
                    if v == -INFINITY:
                        continue
                    p = exp(v - best)
                    if u:
                        u1 += p
                    else:
                        u0 += p
                    out = outputs[s, u]
                    for j in range(n):
                        sums[j, (out >> j) & 1] += p
            info[t] = _log_ratio(u0, u1)
            for j in range(n):
                coded[t, j] = _log_ratio(sums[j, 0], sums[j, 1])

    return info_arr, coded_arr


cdef inline double _log_ratio(double a, double b) noexcept nogil:
    if b == 0.0:
        return INFINITY
    if a == 0.0:
        return -INFINITY
    return log(a) - log(b)
