"""Independent checks: MA simulation and finite-horizon normal equations.

Nothing here calls :func:`pcfilter.spectral.factorize`; covariances come
straight from grid quadrature of the densities, so agreement with the
closed-form routes in :mod:`pcfilter.filtering` is a genuine cross-check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from scipy import linalg

from . import kernels
from .errors import DimensionError, HorizonError, IllConditionedWarning
from .filtering import FilterCharacteristic, _as_weights, _estimates
from .spectral import MatrixMAPolynomial, SpectralDensityGrid, covariances_from_density

__all__ = [
    "SimulationSpec",
    "Simulation",
    "simulate_ma",
    "iter_simulations",
    "finite_horizon_mmse",
    "empirical_mse",
    "RIDGE",
    "MC_SIGMA_BAND",
]

RIDGE = 1e-10
MC_SIGMA_BAND = 3.0
CHUNK_PATHS = 4096


@dataclass(frozen=True)
class SimulationSpec:
    """Signal and noise MA factors, horizon in blocks, path count and seed.

    ``psi=None`` means noiseless observations.
    """

    phi: MatrixMAPolynomial
    psi: Optional[MatrixMAPolynomial]
    horizon: int
    n_paths: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.horizon < 1:
            raise HorizonError(f"horizon must be >= 1, got {self.horizon}")
        if self.psi is not None and self.psi.K != self.phi.K:
            raise DimensionError(f"signal has K={self.phi.K}, noise has K={self.psi.K}")

    @property
    def K(self) -> int:
        return self.phi.K


@dataclass(frozen=True)
class Simulation:
    """``signal`` and ``noise`` of shape ``(n_paths, horizon, K)``; last block is time 0."""

    signal: np.ndarray
    noise: np.ndarray

    @property
    def observations(self) -> np.ndarray:
        return self.signal + self.noise


def _innovations(rng: np.random.Generator, shape) -> np.ndarray:
    # circular complex normal, E|e|^2 = 1
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _run_ma(c: MatrixMAPolynomial, rng, n_paths, horizon) -> np.ndarray:
    eps = _innovations(rng, (n_paths, horizon + c.L, c.M))
    return kernels.ma_filter(c.coeffs, eps, horizon)


def _chunk(spec: SimulationSpec, index: int, n_paths: int) -> Simulation:
    seq = np.random.SeedSequence(entropy=spec.seed, spawn_key=(index,))
    rng_signal, rng_noise = (np.random.default_rng(s) for s in seq.spawn(2))
    signal = _run_ma(spec.phi, rng_signal, n_paths, spec.horizon)
    if spec.psi is None or not np.any(spec.psi.coeffs):
        noise = np.zeros_like(signal)
    else:
        noise = _run_ma(spec.psi, rng_noise, n_paths, spec.horizon)
    return Simulation(signal, noise)


def iter_simulations(spec: SimulationSpec, chunk_paths: int = CHUNK_PATHS) -> Iterator[Simulation]:
    """Yield the paths of ``spec`` in fixed-size chunks.

    Chunk ``i`` draws from its own stream derived from ``(seed, i)``, so the
    output does not depend on how chunks are scheduled.
    """
    done, index = 0, 0
    while done < spec.n_paths:
        n = min(chunk_paths, spec.n_paths - done)
        yield _chunk(spec, index, n)
        done += n
        index += 1


def simulate_ma(spec: SimulationSpec) -> Simulation:
    """Simulate signal and noise block sequences driven by independent innovations."""
    parts = list(iter_simulations(spec))
    return Simulation(
        np.concatenate([p.signal for p in parts]),
        np.concatenate([p.noise for p in parts]),
    )


def finite_horizon_mmse(
    f: SpectralDensityGrid,
    g: SpectralDensityGrid,
    a,
    horizon: int,
) -> float:
    """Linear MMSE of ``A zeta`` from ``x_0, x_{-1}, ..., x_{-horizon+1}``.

    Solves the block-Toeplitz normal equations with a Cholesky solve; if the
    covariance is not numerically positive definite a ridge of
    ``1e-10 * trace / dim`` is added and a warning issued.
    """
    aa = _as_weights(a)
    J = aa.shape[0] - 1
    if horizon < max(J, 1):
        raise HorizonError(f"horizon {horizon} is shorter than the functional length J={J}")
    K = f.K
    if aa.shape[1] != K:
        raise DimensionError(f"weights have length {aa.shape[1]}, densities are {K}x{K}")
    n_lags = max(horizon, J + 1)
    Rf = covariances_from_density(f, n_lags)
    Rx = covariances_from_density(f + g, n_lags)

    # block (i, l) = E[x_{-i} x_{-l}^*] = R_x(l - i)
    Sigma = np.zeros((horizon * K, horizon * K), dtype=complex)
    for i in range(horizon):
        for l in range(horizon):
            Sigma[i * K:(i + 1) * K, l * K:(l + 1) * K] = Rx.lag(l - i)
    Sigma = 0.5 * (Sigma + Sigma.conj().T)
    # c_i = E[x_{-i} conj(A zeta)] = sum_j R_f(j - i) conj(a_j)
    c = np.zeros((horizon, K), dtype=complex)
    for i in range(horizon):
        for j in range(J + 1):
            c[i] += Rf.lag(j - i) @ aa[j].conj()
    c = c.ravel()
    var = 0.0
    for j in range(J + 1):
        for l in range(J + 1):
            var += aa[j] @ Rf.lag(l - j) @ aa[l].conj()
    var = float(np.real(var))

    try:
        factor = linalg.cho_factor(Sigma, lower=True)
    except linalg.LinAlgError:
        ridge = RIDGE * float(np.real(np.trace(Sigma))) / Sigma.shape[0]
        warnings.warn(
            f"normal equations not positive definite; adding ridge {ridge:.2e}",
            IllConditionedWarning,
            stacklevel=2,
        )
        factor = linalg.cho_factor(Sigma + ridge * np.eye(Sigma.shape[0]), lower=True)
    explained = float(np.real(np.vdot(c, linalg.cho_solve(factor, c))))
    return var - explained


def empirical_mse(
    h: FilterCharacteristic,
    spec: SimulationSpec,
    a,
    chunk_paths: int = CHUNK_PATHS,
) -> tuple[float, float]:
    """Monte Carlo mean of ``|A zeta - hat A zeta|^2`` and its standard error."""
    aa = _as_weights(a)
    need = max(h.Jh, aa.shape[0] - 1) + 1
    if spec.horizon < need:
        raise HorizonError(f"simulation horizon {spec.horizon} shorter than required {need}")
    if spec.K != aa.shape[1] or spec.K != h.K:
        raise DimensionError("weights, filter and simulation disagree on K")
    total = 0.0
    total_sq = 0.0
    n = 0
    for sim in iter_simulations(spec, chunk_paths):
        target = _estimates(aa, sim.signal)
        estimate = _estimates(h.h_coeffs, sim.observations)
        err = np.abs(target - estimate) ** 2
        total += float(err.sum())
        total_sq += float((err**2).sum())
        n += err.size
    mean = total / n
    var = max(total_sq / n - mean**2, 0.0) * n / max(n - 1, 1)
    return mean, float(np.sqrt(var / n)) if n > 1 else float("nan")

