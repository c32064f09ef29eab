"""Period blocking of sampled PC paths into K-vector stationary sequences.

A path sampled ``N`` times per period ``T`` is cut into consecutive periods;
each period is projected onto the first ``K`` functions of the exponential
basis ``e_k(u) = exp(2 pi i m(k) u / T) / sqrt(T)``, where ``m`` enumerates
the integer harmonics ``0, +1, -1, +2, -2, ...``.  Integrals are midpoint
sums on the sample grid ``u_s = (s + 0.5) T / N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EmptyInputError, TruncationError

__all__ = [
    "SampledPath",
    "BlockedSequence",
    "FunctionalWeights",
    "harmonic_map",
    "harmonics",
    "block_path",
    "block_weights",
    "unblock",
]


def harmonic_map(k: int) -> int:
    """Integer harmonic of basis index ``k`` (1-based): (-1)**k * (k // 2)."""
    if k < 1:
        raise ValueError(f"basis index must be >= 1, got {k}")
    return (-1) ** k * (k // 2)


def harmonics(K: int) -> np.ndarray:
    """Array ``[m(1), ..., m(K)]``."""
    k = np.arange(1, K + 1)
    return np.where(k % 2 == 0, 1, -1) * (k // 2)


@dataclass(frozen=True)
class SampledPath:
    """Complex samples of a path, ``samples_per_period`` per period.

    Sample ``s`` is the value at ``(s + 0.5) * period_T / N - origin_offset``.
    """

    period_T: float
    samples_per_period: int
    values: np.ndarray
    origin_offset: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex).ravel()
        object.__setattr__(self, "values", values)
        if not self.period_T > 0:
            raise ValueError(f"period_T must be positive, got {self.period_T}")
        if self.samples_per_period < 1:
            raise ValueError(f"samples_per_period must be >= 1, got {self.samples_per_period}")
        if values.size % self.samples_per_period:
            raise DimensionError(
                f"path length {values.size} is not a multiple of "
                f"samples_per_period={self.samples_per_period}"
            )

    @property
    def n_periods(self) -> int:
        return self.values.size // self.samples_per_period

    def times(self) -> np.ndarray:
        N = self.samples_per_period
        s = np.arange(self.values.size)
        return (s + 0.5) * self.period_T / N - self.origin_offset


@dataclass(frozen=True)
class BlockedSequence:
    """Vector sequence ``blocks[j] = (zeta_1j, ..., zeta_Kj)``, ordered by ``j``."""

    blocks: np.ndarray

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=complex)
        if blocks.ndim == 1:
            blocks = blocks[:, None]
        if blocks.ndim != 2:
            raise DimensionError(f"blocks must be 2-D (n_blocks, K), got shape {blocks.shape}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def K(self) -> int:
        return self.blocks.shape[1]

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    def __len__(self):
        return self.n_blocks

    @staticmethod
    def harmonic_map(k: int) -> int:
        return harmonic_map(k)


@dataclass(frozen=True)
class FunctionalWeights:
    """Vector coefficients ``a_0, ..., a_J`` of the functional ``sum_j a_j^T zeta_{-j}``.

    ``l1_sum`` and ``weighted_sum`` hold ``sum_j ||a_j||`` and
    ``sum_j (j + 1) ||a_j||^2``; both are finite at any truncation.
    """

    coeffs: np.ndarray
    l1_sum: float = field(init=False)
    weighted_sum: float = field(init=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.ndim == 1:
            coeffs = coeffs[:, None]
        if coeffs.ndim != 2 or coeffs.shape[0] == 0:
            raise DimensionError(f"coeffs must have shape (J + 1, K), got {coeffs.shape}")
        object.__setattr__(self, "coeffs", coeffs)
        norms = np.linalg.norm(coeffs, axis=1)
        object.__setattr__(self, "l1_sum", float(norms.sum()))
        j = np.arange(coeffs.shape[0])
        object.__setattr__(self, "weighted_sum", float(((j + 1) * norms**2).sum()))

    @property
    def J(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def K(self) -> int:
        return self.coeffs.shape[1]

    @property
    def norm2(self) -> float:
        """``sum_j ||a_j||^2``."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros((max(length, self.coeffs.shape[0]), self.K), dtype=complex)
        out[: self.coeffs.shape[0]] = self.coeffs
        return out

    def evaluate(self, freqs) -> np.ndarray:
        """``A(e^{i lambda}) = sum_j a_j e^{-i j lambda}`` at each frequency, shape (F, K)."""
        freqs = np.asarray(freqs, dtype=float)
        j = np.arange(self.coeffs.shape[0])
        return np.exp(-1j * np.outer(freqs, j)) @ self.coeffs


def _analysis_matrix(N: int, K: int, T: float) -> np.ndarray:
    # row s, column k: (T/N) * conj(e_k(u_s))
    u = (np.arange(N) + 0.5) * T / N
    m = harmonics(K)
    return np.exp(-2j * np.pi * np.outer(u, m) / T) * (T / N) / np.sqrt(T)


def _check_resolution(K: int, N: int):
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if K > N:
        raise TruncationError(f"truncation K={K} exceeds samples per period N={N}")


def block_path(path: SampledPath, K: int) -> BlockedSequence:
    """Project each period of ``path`` onto the first ``K`` basis functions."""
    N = path.samples_per_period
    _check_resolution(K, N)
    if path.values.size == 0:
        raise EmptyInputError("path has no samples")
    segments = path.values.reshape(-1, N)
    return BlockedSequence(segments @ _analysis_matrix(N, K, path.period_T))


def block_weights(a, period_T: float, N: int, K: int) -> FunctionalWeights:
    """Block a weight function sampled on ``[0, J T)`` into vectors ``a_j``.

    ``a`` holds ``N`` midpoint samples per period (array or
    :class:`SampledPath`); period ``j`` becomes ``a_j``.
    """
    values = a.values if isinstance(a, SampledPath) else np.asarray(a, dtype=complex).ravel()
    seq = block_path(SampledPath(period_T, N, values), K)
    return FunctionalWeights(seq.blocks)


def unblock(seq: BlockedSequence, N: int, period_T: float = 1.0) -> SampledPath:
    """Synthesize the path ``sum_k zeta_kj e_k(u_s)`` from blocked coefficients."""
    K = seq.K
    if N < K:
        raise TruncationError(f"resolution N={N} is below truncation K={K}")
    u = (np.arange(N) + 0.5) * period_T / N
    synth = np.exp(2j * np.pi * np.outer(harmonics(K), u) / period_T) / np.sqrt(period_T)
    return SampledPath(period_T, N, (seq.blocks @ synth).ravel())
