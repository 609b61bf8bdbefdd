"""Two-dimensional orthonormal precoder sets and spreading.

A precoder set is stored as two unitary axis transforms: ``freq`` (N x N,
acting on subcarriers) and ``time`` (M x M, acting on OFDM symbols).  The
full ``MN x MN`` matrix is their Kronecker product ``kron(time, freq)`` and
is only materialised on request, for small grids.

Vectors follow column-major ``vec`` stacking: grid element ``(p, n)`` sits
at index ``p + n*N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import DimensionError, PrecoderKind

_MATRIX_LIMIT = 1024


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def hadamard_constructible(n: int) -> bool:
    """Whether :func:`hadamard` can build a matrix of order ``n``."""
    if n in (1, 2):
        return True
    if n % 4:
        return False
    q = n - 1
    if _is_prime(q) and q % 4 == 3:
        return True
    q = n // 2 - 1
    if _is_prime(q) and q % 4 == 1:
        return True
    return hadamard_constructible(n // 2)


def _jacobsthal(q: int) -> np.ndarray:
    residues = np.zeros(q, dtype=np.int8)
    residues[(np.arange(1, q) ** 2) % q] = 1
    chi = np.where(residues == 1, 1, -1).astype(np.int8)
    chi[0] = 0
    idx = (np.arange(q)[None, :] - np.arange(q)[:, None]) % q
    return chi[idx]


def _paley_one(q: int) -> np.ndarray:
    Q = _jacobsthal(q)
    S = np.zeros((q + 1, q + 1), dtype=np.int8)
    S[0, 1:] = 1
    S[1:, 0] = -1
    S[1:, 1:] = Q
    return np.eye(q + 1, dtype=np.int8) + S


def _paley_two(q: int) -> np.ndarray:
    Q = _jacobsthal(q)
    C = np.zeros((q + 1, q + 1), dtype=np.int8)
    C[0, 1:] = 1
    C[1:, 0] = 1
    C[1:, 1:] = Q
    zero_block = np.array([[1, -1], [-1, -1]], dtype=np.int8)
    one_block = np.array([[1, 1], [1, -1]], dtype=np.int8)
    H = np.kron(C, one_block)
    zeros = np.kron(C == 0, np.ones((2, 2), dtype=bool))
    H[zeros] = np.tile(zero_block, (q + 1, q + 1))[zeros]
    return H


@lru_cache(maxsize=None)
def hadamard(n: int) -> np.ndarray:
    """Hadamard matrix of order ``n`` with entries +-1 (float64).

    Uses Sylvester doubling, Paley I (``n-1`` prime, 3 mod 4) and Paley II
    (``n/2-1`` prime, 1 mod 4).  Order 44 comes from Paley I with q = 43.
    """
    if n == 1:
        H = np.ones((1, 1))
    elif n == 2:
        H = np.array([[1.0, 1.0], [1.0, -1.0]])
    elif not hadamard_constructible(n):
        raise DimensionError(f"no Hadamard construction available for order {n}")
    elif n & (n - 1) == 0:
        H = np.kron(hadamard(2), hadamard(n // 2))
    elif _is_prime(n - 1) and (n - 1) % 4 == 3:
        H = _paley_one(n - 1).astype(float)
    elif _is_prime(n // 2 - 1) and (n // 2 - 1) % 4 == 1:
        H = _paley_two(n // 2 - 1).astype(float)
    else:
        H = np.kron(hadamard(2), hadamard(n // 2))
    H.setflags(write=False)
    return H


def _unitary_dft(n: int, inverse: bool = False) -> np.ndarray:
    k = np.arange(n)
    sign = 1.0 if inverse else -1.0
    return np.exp(sign * 2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    kind: PrecoderKind
    freq: np.ndarray
    time: np.ndarray

    @property
    def N(self) -> int:
        return self.freq.shape[0]

    @property
    def M(self) -> int:
        return self.time.shape[0]

    @property
    def size(self) -> int:
        return self.N * self.M

    @property
    def is_constant_modulus(self) -> bool:
        return self.kind is not PrecoderKind.IDENTITY

    @property
    def matrix(self) -> np.ndarray:
        """Full ``MN x MN`` matrix; column ``p + nN`` is ``vec`` of sequence (p, n)."""
        if self.size > _MATRIX_LIMIT:
            raise DimensionError(f"refusing to materialise a {self.size}x{self.size} precoder")
        return np.kron(self.time, self.freq)

    def power_pattern(self) -> tuple[np.ndarray, np.ndarray]:
        """Squared magnitudes of the axis transforms, ``|s^{p,n}_{q,m}|^2 = F[q,p]*T[m,n]``."""
        return np.abs(self.freq) ** 2, np.abs(self.time) ** 2

    def to_csv(self, path) -> None:
        """Write the full matrix as ``re+imj`` CSV, for small-grid debugging."""
        S = self.matrix
        with open(path, "w") as fh:
            for row in S:
                fh.write(",".join(f"{float(z.real)!r}{float(z.imag):+.17g}j" for z in row) + "\n")


@lru_cache(maxsize=64)
def build_precoder(kind: PrecoderKind | str, N: int, M: int) -> PrecoderSet:
    """Build a complete orthonormal 2D precoder set for an ``N x M`` grid.

    ``WHT`` uses Hadamard matrices on both axes, ``DSFT`` an inverse DFT
    over subcarriers and a DFT over symbols, ``IDENTITY`` disables
    precoding.
    """
    kind = PrecoderKind(kind)
    if N < 1 or M < 1:
        raise DimensionError(f"grid must be non-empty, got {N}x{M}")
    if kind is PrecoderKind.IDENTITY:
        freq, time = np.eye(N, dtype=complex), np.eye(M, dtype=complex)
    elif kind is PrecoderKind.WHT:
        freq = hadamard(N).astype(complex) / np.sqrt(N)
        time = hadamard(M).astype(complex) / np.sqrt(M)
    else:
        freq, time = _unitary_dft(N, inverse=True), _unitary_dft(M)
    freq.setflags(write=False)
    time.setflags(write=False)
    return PrecoderSet(kind, freq, time)


def _as_grid(x: np.ndarray, S: PrecoderSet) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (S.size,):
        raise DimensionError(f"expected a length-{S.size} vector, got shape {x.shape}")
    return x.reshape((S.N, S.M), order="F")


def spread(S: PrecoderSet, b: np.ndarray) -> np.ndarray:
    """``d = S b`` applied as two axis transforms."""
    B = _as_grid(b, S)
    return (S.freq @ B @ S.time.T).ravel(order="F")


def despread_matched(S: PrecoderSet, x: np.ndarray) -> np.ndarray:
    """``S^H x``."""
    X = _as_grid(x, S)
    return (S.freq.conj().T @ X @ S.time.conj()).ravel(order="F")
