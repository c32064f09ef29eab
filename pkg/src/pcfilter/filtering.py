"""Optimal causal filter for a functional of the signal observed in noise.

Given the signal density ``f``, the noise density ``g`` and the functional
``A zeta = sum_{j>=0} a_j^T zeta_{-j}``, the optimal estimate from
``zeta_j + theta_j``, ``j <= 0``, is computed in coefficient space.  The
building blocks are the lower-triangular convolution

    (C a)_q = sum_{l=0}^{q} c(q - l)^T a_l

and its adjoint ``(C^* x)_j = sum_u conj(c(u)) x_{u+j}``.  With ``d`` the
canonical factor of ``f + g`` and ``b = d^{-1}``:

* noise route:  ``S_g = B^* Psi^* Psi a``, ``h = A - b^T S_g``,
  ``Delta = ||Psi a||^2 - ||S_g||^2``;
* signal route: ``S_f = B^* Phi^* Phi a``, ``h = b^T S_f``,
  ``Delta = ||Phi a||^2 - ||S_f||^2``.

Every series is truncated at an explicit order and the tail norms are
reported alongside the result.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .blocking import BlockedSequence, FunctionalWeights
from .errors import (
    ConvergenceError,
    DimensionError,
    FactorizationDomainError,
    HorizonError,
    NumericalInconsistencyError,
    TruncationWarning,
)
from .spectral import (
    DEFAULT_GRID_SIZE,
    MatrixMAPolynomial,
    SpectralDensityGrid,
    factorize,
    grid_frequencies,
    inverse_defect,
    invert_factor,
)

__all__ = [
    "FilterCharacteristic",
    "MseReport",
    "FilterFactors",
    "FilterSolution",
    "apply_factor_transform",
    "apply_adjoint_transform",
    "spectral_characteristic_via_g",
    "spectral_characteristic_via_f",
    "mse",
    "white_noise_mse",
    "single_block_mse",
    "estimate_functional",
    "quadratic_mse",
    "choose_inverse_order",
    "build_factors",
    "solve_filter",
    "ROUTES",
]

ROUTES = ("via_f", "via_g")
NEGATIVE_TOL = -1e-10
TAIL_WARN = 1e-8


@dataclass(frozen=True)
class FilterCharacteristic:
    """One-sided coefficients ``h_j``: ``h(e^{i lambda}) = sum_{j>=0} h_j e^{-i j lambda}``."""

    h_coeffs: np.ndarray
    grid_values: Optional[np.ndarray] = None

    def __post_init__(self):
        h = np.asarray(self.h_coeffs, dtype=complex)
        if h.ndim == 1:
            h = h[:, None]
        object.__setattr__(self, "h_coeffs", h)

    @property
    def Jh(self) -> int:
        return self.h_coeffs.shape[0] - 1

    @property
    def K(self) -> int:
        return self.h_coeffs.shape[1]

    def evaluate(self, freqs) -> np.ndarray:
        j = np.arange(self.h_coeffs.shape[0])
        return np.exp(-1j * np.outer(np.asarray(freqs, dtype=float), j)) @ self.h_coeffs

    def with_grid(self, F: int) -> FilterCharacteristic:
        return FilterCharacteristic(self.h_coeffs, self.evaluate(grid_frequencies(F)))

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros((max(length, self.h_coeffs.shape[0]), self.K), dtype=complex)
        out[: self.h_coeffs.shape[0]] = self.h_coeffs
        return out


@dataclass(frozen=True)
class MseReport:
    delta: float
    term_norms: tuple[float, float]
    route: str
    tail_norms: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "delta": self.delta,
            "term_first": self.term_norms[0],
            "term_second": self.term_norms[1],
            "route": self.route,
        }
        out.update({f"tail_{k}": v for k, v in self.tail_norms.items()})
        return out


@dataclass(frozen=True)
class FilterFactors:
    """Canonical factor ``d`` of ``f + g``, its inverse ``b``, and factors of ``f``, ``g``.

    ``phi`` or ``psi`` is ``None`` when that density could not be factorized;
    the corresponding route is then unavailable.
    """

    d: MatrixMAPolynomial
    b: MatrixMAPolynomial
    phi: Optional[MatrixMAPolynomial] = None
    psi: Optional[MatrixMAPolynomial] = None


@dataclass(frozen=True)
class FilterSolution:
    h: FilterCharacteristic
    report: MseReport
    factors: FilterFactors


def _as_weights(a) -> np.ndarray:
    if isinstance(a, FunctionalWeights):
        return a.coeffs
    arr = np.asarray(a, dtype=complex)
    return arr[:, None] if arr.ndim == 1 else arr


def _coeffs(c) -> np.ndarray:
    return c.coeffs if isinstance(c, MatrixMAPolynomial) else np.asarray(c, dtype=complex)


def apply_factor_transform(c, a) -> np.ndarray:
    """``(C a)_q = sum_{l<=q} c(q-l)^T a_l`` for ``q = 0 .. L + J``."""
    cc, aa = _coeffs(c), _as_weights(a)
    if cc.shape[1] != aa.shape[1]:
        raise DimensionError(f"factor has {cc.shape[1]} rows but weights have length {aa.shape[1]}")
    return kernels.causal_apply(cc, aa)


def apply_adjoint_transform(c, x) -> np.ndarray:
    """``(C^* x)_j = sum_u conj(c(u)) x_{u+j}`` for ``j = 0 .. len(x) - 1``."""
    cc = _coeffs(c)
    xx = np.asarray(x, dtype=complex)
    if xx.ndim == 1:
        xx = xx[:, None]
    if cc.shape[2] != xx.shape[1]:
        raise DimensionError(f"factor has {cc.shape[2]} columns but sequence has length {xx.shape[1]}")
    return kernels.adjoint_apply(cc, xx)


def _cascade(b, c, a):
    """``(C a, B^* C^* C a)`` for the factor ``c`` and inverse factor ``b``."""
    ca = apply_factor_transform(c, a)
    return ca, apply_adjoint_transform(b, apply_adjoint_transform(c, ca))


def _product(b: MatrixMAPolynomial, s: np.ndarray, n: int) -> np.ndarray:
    """First ``n`` coefficients of ``b^T(lambda) S(lambda)``."""
    out = kernels.causal_apply(b.coeffs, s)[:n]
    if out.shape[0] < n:
        out = np.vstack([out, np.zeros((n - out.shape[0], out.shape[1]), dtype=complex)])
    return out


def _check_inverse(d: MatrixMAPolynomial, b: MatrixMAPolynomial, tol: float = 1e-8):
    n = min(b.L, d.L + 4) + 1
    conv = np.zeros((n, b.K, d.M), dtype=complex)
    for q in range(n):
        for u in range(max(0, q - d.L), min(q, b.L) + 1):
            conv[q] += b.coeffs[u] @ d.coeffs[q - u]
    conv[0] -= np.eye(b.K)
    err = float(np.abs(conv).max())
    if err > tol * max(1.0, float(np.abs(b.coeffs[0]).max()) * float(np.abs(d.coeffs).max())):
        raise DimensionError(f"b is not the causal inverse of d (convolution error {err:.2e})")


def _inverse_tail(d, b) -> float:
    return inverse_defect(d, b)


def _tail_warn(name, value):
    if value > TAIL_WARN:
        warnings.warn(f"{name} truncated with tail norm {value:.2e}", TruncationWarning, stacklevel=3)


def spectral_characteristic_via_g(d, b, psi, a) -> FilterCharacteristic:
    """``h = A - b^T S_g`` with ``S_g = B^* Psi^* Psi a``."""
    aa = _as_weights(a)
    _check_inverse(d, b)
    _, s_g = _cascade(b, psi, aa)
    _tail_warn("inverse factor", _inverse_tail(d, b))
    n = aa.shape[0] + b.L
    h = np.zeros((n, aa.shape[1]), dtype=complex)
    h[: aa.shape[0]] = aa
    h -= _product(b, s_g, n)
    return FilterCharacteristic(h)


def spectral_characteristic_via_f(b, phi, a) -> FilterCharacteristic:
    """``h = b^T S_f`` with ``S_f = B^* Phi^* Phi a``."""
    aa = _as_weights(a)
    _, s_f = _cascade(b, phi, aa)
    return FilterCharacteristic(_product(b, s_f, aa.shape[0] + b.L))


def mse(route: str, factors: FilterFactors, a) -> MseReport:
    """Mean-square error of the optimal estimate by the chosen route.

    Raises :class:`NumericalInconsistencyError` when the result is below
    ``-1e-10``, which only happens with a broken factorization.
    """
    if route not in ROUTES:
        raise ValueError(f"route must be one of {ROUTES}, got {route!r}")
    c = factors.phi if route == "via_f" else factors.psi
    if c is None:
        raise FactorizationDomainError(f"route {route} needs a factor of {'f' if route == 'via_f' else 'g'}")
    ca, s = _cascade(factors.b, c, a)
    first = float(np.sum(np.abs(ca) ** 2))
    second = float(np.sum(np.abs(s) ** 2))
    delta = first - second
    if delta < NEGATIVE_TOL * max(1.0, first):
        raise NumericalInconsistencyError(
            f"negative mean-square error {delta:.3e} ({route}); factorization is inconsistent"
        )
    tails = {"b": _inverse_tail(factors.d, factors.b)}
    return MseReport(delta, (first, second), route, tails)


def white_noise_mse(sigma2: float, b, a) -> MseReport:
    """``sigma^2 ||a||^2 - sigma^4 ||B^* a||^2`` when one sequence is white."""
    aa = _as_weights(a)
    first = sigma2 * float(np.sum(np.abs(aa) ** 2))
    bstar_a = apply_adjoint_transform(b, aa)
    second = sigma2**2 * float(np.sum(np.abs(bstar_a) ** 2))
    return MseReport(first - second, (first, second), "white")


def single_block_mse(N: int, sigma2: float, b, a_N) -> float:
    """Error for the single term ``a_N^T zeta_{-N}`` under white-noise conditions."""
    bc = _coeffs(b)
    v = np.asarray(a_N, dtype=complex).ravel()
    total = 0.0
    for q in range(min(N, bc.shape[0] - 1) + 1):
        total += float(np.sum(np.abs(bc[q].conj() @ v) ** 2))
    return sigma2 * float(np.sum(np.abs(v) ** 2)) - sigma2**2 * total


def _estimates(h_coeffs: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """``sum_j h_j^T x_{-j}`` for observations ``obs[..., t, :]`` ending at time 0."""
    n = h_coeffs.shape[0]
    recent = obs[..., ::-1, :][..., :n, :]
    return np.einsum("...jk,jk->...", recent, h_coeffs[: recent.shape[-2]])


def estimate_functional(h: FilterCharacteristic, obs: BlockedSequence) -> complex:
    """Time-domain estimate ``sum_{j>=0} h_j^T x_{-j}``.

    The last block of ``obs`` is time 0; earlier blocks are the past.
    """
    if obs.K != h.K:
        raise DimensionError(f"observations have K={obs.K}, filter has K={h.K}")
    if obs.n_blocks < h.Jh + 1:
        raise HorizonError(f"filter needs {h.Jh + 1} blocks of history, got {obs.n_blocks}")
    return complex(_estimates(h.h_coeffs, obs.blocks))


def _quad(v: np.ndarray, m: np.ndarray, w: np.ndarray) -> complex:
    """Grid mean of ``v^T m conj(w)``."""
    return complex(np.einsum("rk,rkn,rn->", v, m, w.conj()) / v.shape[0])


def quadratic_mse(h, a, f: SpectralDensityGrid, g: SpectralDensityGrid) -> float:
    """Mean-square error ``Delta(h; f, g)`` of an arbitrary one-sided characteristic.

    Evaluates the four-term quadratic form in ``A`` and ``A - h`` by grid
    quadrature; exact when ``F`` exceeds the degree of the integrands.
    """
    hh = h.h_coeffs if isinstance(h, FilterCharacteristic) else _as_weights(h)
    aa = _as_weights(a)
    freqs = f.freqs
    j_a, j_h = np.arange(aa.shape[0]), np.arange(hh.shape[0])
    A = np.exp(-1j * np.outer(freqs, j_a)) @ aa
    E = A - np.exp(-1j * np.outer(freqs, j_h)) @ hh
    fg = f.values + g.values
    cross = _quad(E, g.values, A)
    total = _quad(A, g.values, A) + _quad(E, fg, E) - cross - np.conj(cross)
    return float(total.real)


def choose_inverse_order(d: MatrixMAPolynomial, J: int = 0, rel_tol: float = 1e-14, max_order: int = 4096) -> int:
    """Smallest doubling of ``max(4L, L + J + 1)`` whose inverse tail is below ``rel_tol``.

    Trailing coefficients that vanish exactly (finite inverse) are trimmed.
    """
    n = max(4 * d.L, d.L + J + 1, 1)
    while True:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            b = invert_factor(d, n)
        scale = float(np.linalg.norm(b.coeffs[0]))
        norms = np.linalg.norm(b.coeffs, axis=(1, 2))
        if norms[-1] <= rel_tol * scale or n >= max_order:
            break
        n = min(2 * n, max_order)
    nz = np.nonzero(norms)[0]
    return int(nz[-1]) if nz.size else 0


def _factor_or_zero(S: SpectralDensityGrid, L: int, tol: float):
    if not np.any(S.values):
        return MatrixMAPolynomial.zeros(S.K)
    try:
        return factorize(S, L, tol=tol)
    except (FactorizationDomainError, ConvergenceError):
        return None


def build_factors(
    f: SpectralDensityGrid,
    g: SpectralDensityGrid,
    L: int,
    J: int = 0,
    Lb: int | None = None,
    tol: float = 1e-10,
) -> FilterFactors:
    """Factorize ``f + g`` (required) and ``f``, ``g`` (when possible)."""
    d = factorize(f + g, L, tol=tol)
    if Lb is None:
        Lb = choose_inverse_order(d, J)
    b = invert_factor(d, Lb)
    return FilterFactors(d=d, b=b, phi=_factor_or_zero(f, L, tol), psi=_factor_or_zero(g, L, tol))


def solve_filter(
    f: SpectralDensityGrid,
    g: SpectralDensityGrid,
    a,
    L: int,
    route: str = "via_g",
    Lb: int | None = None,
    tol: float = 1e-10,
    factors: FilterFactors | None = None,
) -> FilterSolution:
    """Spectral characteristic and error of the optimal estimate in one call.

    Falls back to the other route when the requested one lacks a factor.
    """
    aa = _as_weights(a)
    if factors is None:
        factors = build_factors(f, g, L, J=aa.shape[0] - 1, Lb=Lb, tol=tol)
    if route == "via_g" and factors.psi is None:
        route = "via_f"
    elif route == "via_f" and factors.phi is None:
        route = "via_g"
    if route == "via_g":
        h = spectral_characteristic_via_g(factors.d, factors.b, factors.psi, aa)
    else:
        h = spectral_characteristic_via_f(factors.b, factors.phi, aa)
    return FilterSolution(h, mse(route, factors, aa), factors)

