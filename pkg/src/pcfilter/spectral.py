"""Matrix spectral densities on a frequency grid and their canonical factors.

Grid convention: ``F`` points ``lambda_r = -pi + 2 pi r / F``.  A density
``f`` and its covariances are related by
``R(j) = (1 / 2pi) int e^{i j lambda} f(lambda) d lambda``, evaluated with the
rectangle rule on the grid (exact for trigonometric polynomials of degree
below ``F``).  A matrix MA polynomial ``P(lambda) = sum_u c(u) e^{-i u lambda}``
generates the density ``P P^*`` and covariances ``R(j) = sum_u c(u + j) c(u)^*``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    AliasingError,
    ConvergenceError,
    DimensionError,
    FactorizationDomainError,
    InfeasibleCandidateError,
    SingularFactorError,
    TruncationWarning,
)

__all__ = [
    "SpectralDensityGrid",
    "MatrixMAPolynomial",
    "CovarianceSequence",
    "grid_frequencies",
    "density_from_ma",
    "covariances_from_density",
    "factorize",
    "invert_factor",
    "inverse_defect",
    "residual_density_subtract",
    "DEFAULT_GRID_SIZE",
]

DEFAULT_GRID_SIZE = 1024
HERMITIAN_TOL = 1e-12
PSD_TOL = -1e-10
TAIL_WARN = 1e-8


def grid_frequencies(F: int) -> np.ndarray:
    return -np.pi + 2 * np.pi * np.arange(F) / F


def _herm(x):
    return np.conj(np.swapaxes(x, -1, -2))


@dataclass(frozen=True)
class SpectralDensityGrid:
    """``values[r]`` is the K x K density matrix at ``lambda_r``.

    Construction checks Hermitian symmetry and positive semidefiniteness
    unless ``validate=False`` (used for signed residual densities).
    """

    values: np.ndarray
    validate: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None, None]
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise DimensionError(f"density values must have shape (F, K, K), got {v.shape}")
        object.__setattr__(self, "values", v)
        if self.validate:
            scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
            if np.max(np.abs(v - _herm(v)), initial=0.0) > HERMITIAN_TOL * scale:
                raise DimensionError("density values are not Hermitian")
            if self.min_eigenvalue() < PSD_TOL * scale:
                raise InfeasibleCandidateError(
                    f"density is not PSD: min eigenvalue {self.min_eigenvalue():.3e}"
                )

    @property
    def F(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]

    @property
    def freqs(self) -> np.ndarray:
        return grid_frequencies(self.F)

    def eigenvalues(self) -> np.ndarray:
        h = 0.5 * (self.values + _herm(self.values))
        return np.linalg.eigvalsh(h)

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues().min()) if self.F else 0.0

    def moments(self) -> np.ndarray:
        """Diagonal moments ``(1 / 2pi) int f_kk d lambda``."""
        return np.real(np.einsum("rkk->k", self.values)) / self.F

    def __add__(self, other: SpectralDensityGrid) -> SpectralDensityGrid:
        _check_aligned(self, other)
        return SpectralDensityGrid(self.values + other.values, validate=self.validate and other.validate)

    def scaled(self, factor: float) -> SpectralDensityGrid:
        return SpectralDensityGrid(self.values * factor, validate=self.validate)

    @classmethod
    def constant(cls, matrix, F: int = DEFAULT_GRID_SIZE) -> SpectralDensityGrid:
        m = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls(np.broadcast_to(m, (F,) + m.shape).copy())

    @classmethod
    def zeros(cls, K: int, F: int = DEFAULT_GRID_SIZE) -> SpectralDensityGrid:
        return cls(np.zeros((F, K, K), dtype=complex))


def _check_aligned(a: SpectralDensityGrid, b: SpectralDensityGrid):
    if a.values.shape != b.values.shape:
        raise DimensionError(f"grids not aligned: {a.values.shape} vs {b.values.shape}")


@dataclass(frozen=True)
class MatrixMAPolynomial:
    """``sum_{u=0}^{L} c(u) e^{-i u lambda}`` with K x M coefficient matrices."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None, None]
        if c.ndim != 3 or c.shape[0] == 0:
            raise DimensionError(f"coefficients must have shape (L + 1, K, M), got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def L(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def K(self) -> int:
        return self.coeffs.shape[1]

    @property
    def M(self) -> int:
        return self.coeffs.shape[2]

    @property
    def frob_norm2(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    @property
    def tail_norm(self) -> float:
        """Frobenius norm of the last retained coefficient."""
        return float(np.linalg.norm(self.coeffs[-1]))

    def evaluate(self, freqs) -> np.ndarray:
        freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
        u = np.arange(self.coeffs.shape[0])
        E = np.exp(-1j * np.outer(freqs, u))
        return np.einsum("ru,ukm->rkm", E, self.coeffs)

    def on_grid(self, F: int) -> np.ndarray:
        return self.evaluate(grid_frequencies(F))

    def row_moments(self) -> np.ndarray:
        """Diagonal moments of the generated density, ``sum_u sum_m |c_km(u)|^2``."""
        return np.sum(np.abs(self.coeffs) ** 2, axis=(0, 2))

    @classmethod
    def identity(cls, K: int, scale: float = 1.0) -> MatrixMAPolynomial:
        return cls(scale * np.eye(K, dtype=complex)[None])

    @classmethod
    def zeros(cls, K: int, L: int = 0, M: int | None = None) -> MatrixMAPolynomial:
        return cls(np.zeros((L + 1, K, K if M is None else M), dtype=complex))


@dataclass(frozen=True)
class CovarianceSequence:
    """Lags ``R(0), ..., R(Lmax)``; ``R(-j) = R(j)^*``."""

    lags: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.lags, dtype=complex)
        if r.ndim == 1:
            r = r[:, None, None]
        if r.ndim != 3 or r.shape[1] != r.shape[2]:
            raise DimensionError(f"lags must have shape (Lmax + 1, K, K), got {r.shape}")
        object.__setattr__(self, "lags", r)

    @property
    def K(self) -> int:
        return self.lags.shape[1]

    @property
    def Lmax(self) -> int:
        return self.lags.shape[0] - 1

    def lag(self, j: int) -> np.ndarray:
        if abs(j) > self.Lmax:
            return np.zeros((self.K, self.K), dtype=complex)
        return self.lags[j] if j >= 0 else self.lags[-j].conj().T

    def block_toeplitz(self, n: int) -> np.ndarray:
        """``(nK) x (nK)`` matrix whose ``(i, l)`` block is ``R(i - l)``."""
        K = self.K
        out = np.zeros((n * K, n * K), dtype=complex)
        for i in range(n):
            for l in range(n):
                out[i * K:(i + 1) * K, l * K:(l + 1) * K] = self.lag(i - l)
        return out

    def is_psd(self, n: int | None = None, tol: float = 1e-10) -> bool:
        n = self.Lmax + 1 if n is None else n
        if n > self.Lmax + 1:
            raise ValueError(f"n={n} exceeds available lags {self.Lmax + 1}")
        T = self.block_toeplitz(n)
        scale = max(1.0, float(np.abs(self.lags[0]).max()))
        return float(np.linalg.eigvalsh(0.5 * (T + T.conj().T)).min()) >= -tol * scale


def density_from_ma(p: MatrixMAPolynomial, F: int = DEFAULT_GRID_SIZE) -> SpectralDensityGrid:
    """Density ``P(lambda) P(lambda)^*`` sampled on an ``F``-point grid."""
    if F < 2 * p.L + 1:
        raise AliasingError(f"grid size F={F} is below 2L+1={2 * p.L + 1}")
    P = p.on_grid(F)
    vals = P @ _herm(P)
    return SpectralDensityGrid(0.5 * (vals + _herm(vals)))


def covariances_from_density(f: SpectralDensityGrid, Lmax: int) -> CovarianceSequence:
    if not 0 <= Lmax < f.F / 2:
        raise AliasingError(f"Lmax={Lmax} must be below F/2={f.F / 2}")
    j = np.arange(Lmax + 1)
    E = np.exp(1j * np.outer(j, f.freqs)) / f.F
    return CovarianceSequence(np.einsum("jr,rkn->jkn", E, f.values))


def _causal_coefficients(grid_vals: np.ndarray, n: int) -> np.ndarray:
    """Coefficients ``c(0..n-1)`` of ``sum_u c(u) e^{-i u lambda}`` given grid values."""
    coef = np.fft.ifft(grid_vals, axis=0)[:n]
    sign = (-1.0) ** np.arange(coef.shape[0])
    return coef * sign[:, None, None]


def _plus_part(g: np.ndarray) -> np.ndarray:
    """Causal projection on the grid: positive lags kept, lag 0 lower-triangular.

    The zero-lag coefficient ``g0`` (Hermitian) is replaced by
    ``diag(g0) / 2 + strict_lower(g0)``; that keeps the factor's leading
    coefficient lower-triangular with positive diagonal.
    """
    F = g.shape[0]
    beta = np.fft.ifft(g, axis=0)
    g0 = 0.5 * (beta[0] + beta[0].conj().T)
    beta[0] = np.tril(g0, -1) + 0.5 * np.diag(np.diag(g0).real)
    beta[F // 2:] = 0
    return np.fft.fft(beta, axis=0)


def _normalize_leading(coeffs: np.ndarray) -> np.ndarray:
    """Right-multiply by a unitary so ``c(0)`` is lower-triangular, positive diagonal."""
    q, r = np.linalg.qr(coeffs[0].conj().T)
    lower = r.conj().T
    diag = np.diag(lower)
    phase = np.where(np.abs(diag) > 0, diag / np.where(diag == 0, 1, np.abs(diag)), 1.0)
    U = q @ np.diag(phase.conj())
    out = coeffs @ U
    out[0] = np.tril(out[0])
    return out


def _relative_residual(S: np.ndarray, P: np.ndarray) -> float:
    diff = np.linalg.norm(S - P @ _herm(P), axis=(1, 2))
    den = np.linalg.norm(S, axis=(1, 2))
    return float(np.max(diff / den))


def _interpolate(S: np.ndarray, F_new: int) -> np.ndarray:
    """Trigonometric interpolation of grid values onto a finer grid.

    Exact for trigonometric polynomials of degree below ``F / 2``.
    """
    F = S.shape[0]
    # the grid offset -pi contributes (-1)^j to both transforms and cancels
    coef = np.fft.ifft(S, axis=0)
    out = np.zeros((F_new,) + S.shape[1:], dtype=complex)
    half = F // 2
    out[:half] = coef[:half]
    out[F_new - (F - half):] = coef[half:]
    if F % 2 == 0:
        # split the Nyquist term evenly between +F/2 and -F/2
        out[F_new - half] *= 0.5
        out[half] = out[F_new - half]
    vals = np.fft.fft(out, axis=0)
    return 0.5 * (vals + _herm(vals))


def _wilson(S: np.ndarray, psi: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, int]:
    eye = np.eye(S.shape[1])
    best = np.inf
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        inv = np.linalg.inv(psi)
        g = inv @ S @ _herm(inv) + eye
        psi = psi @ _plus_part(g)
        res = _relative_residual(S, psi)
        if res <= min(tol * 1e-2, 1e-13):
            break
        if res < 0.5 * best:
            best, stall = res, 0
        else:
            best = min(best, res)
            stall += 1
            if stall >= 4:
                break
    return psi, it


def factorize(
    f_plus_g: SpectralDensityGrid,
    L: int,
    tol: float = 1e-10,
    max_iter: int = 200,
    eps_pd: float = 1e-10,
    initial: MatrixMAPolynomial | None = None,
    max_grid: int = 16384,
) -> MatrixMAPolynomial:
    """Canonical (minimum-phase) factor ``d(0..L)`` with ``P P^* = f_plus_g``.

    Wilson's Newton iteration on the frequency grid, started from the
    Cholesky factor of ``R(0)``, or from ``initial`` (which must be
    minimum-phase, e.g. the canonical factor of a nearby density).  The
    result is normalized so ``d(0)`` is lower-triangular with positive real
    diagonal.

    Zeros close to the unit circle make the inverse factor decay slowly and
    the grid causal projection aliases.  When the order-``L`` factor misses
    ``tol`` the iteration is repeated on a grid refined by trigonometric
    interpolation, doubling up to ``max_grid`` points.

    Raises
    ------
    FactorizationDomainError
        If the density has an eigenvalue below ``eps_pd`` somewhere on the grid.
    ConvergenceError
        If the order-``L`` truncation does not reproduce the density to ``tol``.
    """
    S = f_plus_g.values
    F, K = S.shape[0], S.shape[1]
    if F < 2 * L + 1:
        raise AliasingError(f"grid size F={F} is below 2L+1={2 * L + 1}")
    lam_min = f_plus_g.min_eigenvalue()
    if lam_min < eps_pd:
        raise FactorizationDomainError(
            f"density not uniformly positive definite: min eigenvalue {lam_min:.3e} < {eps_pd:.1e}"
        )
    S = 0.5 * (S + _herm(S))
    F_work, S_work = F, S
    iterations = 0
    while True:
        if initial is not None and initial.K == K and initial.M == K:
            psi = initial.on_grid(F_work)
        else:
            R0 = np.mean(S_work, axis=0)
            psi = np.broadcast_to(np.linalg.cholesky(0.5 * (R0 + R0.conj().T)), S_work.shape).copy()
        psi, it = _wilson(S_work, psi, tol, max_iter)
        iterations += it
        coeffs = _normalize_leading(_causal_coefficients(psi, L + 1))
        d = MatrixMAPolynomial(coeffs)
        res = _relative_residual(S, d.on_grid(F))
        if res <= tol or 2 * F_work > max_grid:
            break
        F_work *= 2
        S_work = _interpolate(S, F_work)
    if not res <= tol:
        raise ConvergenceError(
            f"order-{L} factor reproduces the density only to {res:.3e} (tol {tol:.1e}, grid {F_work})",
            residual=res,
            iterations=iterations,
        )
    return d


def invert_factor(d: MatrixMAPolynomial, Lb: int | None = None) -> MatrixMAPolynomial:
    """Coefficients ``b(0..Lb)`` of ``b(lambda) = d(lambda)^{-1}``.

    Exact recursion ``b(0) = d(0)^{-1}``,
    ``b(n) = -(sum_{u<n} b(u) d(n-u)) d(0)^{-1}``.  ``Lb`` defaults to ``4 L``.
    A warning is issued when the truncation defect (see :func:`inverse_defect`)
    exceeds ``1e-8``.
    """
    if d.K != d.M:
        raise DimensionError(f"factor must be square, got {d.K}x{d.M}")
    Lb = 4 * d.L if Lb is None else int(Lb)
    if Lb < 0:
        raise ValueError(f"Lb must be nonnegative, got {Lb}")
    d0 = d.coeffs[0]
    try:
        cond = np.linalg.cond(d0)
        if not np.isfinite(cond) or cond > 1e14:
            raise np.linalg.LinAlgError
        b0 = np.linalg.inv(d0)
    except np.linalg.LinAlgError:
        raise SingularFactorError("leading factor coefficient d(0) is singular") from None
    b = MatrixMAPolynomial(kernels.inverse_recursion(d.coeffs, b0, Lb + 1))
    defect = inverse_defect(d, b)
    if defect > TAIL_WARN:
        warnings.warn(
            f"inverse factor truncated at Lb={Lb} with defect {defect:.2e}",
            TruncationWarning,
            stacklevel=2,
        )
    return b


def inverse_defect(d: MatrixMAPolynomial, b: MatrixMAPolynomial) -> float:
    """Largest norm of the coefficients of ``b d`` beyond ``b.L``.

    The truncated product ``b d`` equals the identity up to lag ``b.L``; the
    remaining lags measure what truncation dropped.  Zero for exact inverses.
    """
    Lb, L = b.L, d.L
    worst = 0.0
    for q in range(Lb + 1, Lb + L + 1):
        acc = np.zeros((b.K, d.M), dtype=complex)
        for u in range(max(0, q - L), Lb + 1):
            acc += b.coeffs[u] @ d.coeffs[q - u]
        worst = max(worst, float(np.linalg.norm(acc)))
    return worst


def residual_density_subtract(
    sum_factor: MatrixMAPolynomial,
    known: SpectralDensityGrid,
    strict: bool = False,
) -> tuple[SpectralDensityGrid, np.ndarray]:
    """Return ``P P^* - known`` and a mask of grid points where it is not PSD.

    The residual is never clipped.  With ``strict=True`` any flagged point
    raises :class:`InfeasibleCandidateError`.
    """
    P = sum_factor.on_grid(known.F)
    if P.shape[1] != known.K:
        raise DimensionError(f"factor has {P.shape[1]} rows, density is {known.K}x{known.K}")
    vals = P @ _herm(P) - known.values
    vals = 0.5 * (vals + _herm(vals))
    resid = SpectralDensityGrid(vals, validate=False)
    negative = resid.eigenvalues()[:, 0] < PSD_TOL
    if strict and negative.any():
        raise InfeasibleCandidateError(
            f"residual density negative at {int(negative.sum())} of {known.F} grid points"
        )
    return resid, negative
