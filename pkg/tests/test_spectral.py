import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_ma, scalar_ma
from pcfilter.errors import (
    AliasingError,
    ConvergenceError,
    DimensionError,
    FactorizationDomainError,
    InfeasibleCandidateError,
    SingularFactorError,
    TruncationWarning,
)
from pcfilter.spectral import (
    CovarianceSequence,
    MatrixMAPolynomial,
    SpectralDensityGrid,
    covariances_from_density,
    density_from_ma,
    factorize,
    grid_frequencies,
    inverse_defect,
    invert_factor,
    residual_density_subtract,
)


def sup_rel_residual(S, d):
    P = d.on_grid(S.F)
    diff = np.linalg.norm(S.values - P @ np.conj(np.swapaxes(P, 1, 2)), axis=(1, 2))
    return float((diff / np.linalg.norm(S.values, axis=(1, 2))).max())


def test_grid_starts_at_minus_pi():
    lam = grid_frequencies(4)
    np.testing.assert_allclose(lam, [-np.pi, -np.pi / 2, 0, np.pi / 2])


def test_density_from_ma_examples():
    np.testing.assert_allclose(density_from_ma(scalar_ma(1), 16).values.ravel(), 1)
    f = density_from_ma(scalar_ma(1, 0.5), 64)
    np.testing.assert_allclose(f.values.ravel(), 1.25 + np.cos(f.freqs), atol=1e-14)
    eye = density_from_ma(MatrixMAPolynomial.identity(2), 8)
    np.testing.assert_allclose(eye.values, np.broadcast_to(np.eye(2), (8, 2, 2)))
    with pytest.raises(AliasingError):
        density_from_ma(scalar_ma(1, 0, 0, 1), 6)


def test_density_validation():
    with pytest.raises(DimensionError):
        SpectralDensityGrid(np.array([[[1, 1j], [1j, 1]]]))
    with pytest.raises(InfeasibleCandidateError):
        SpectralDensityGrid(np.array([-1.0, 1.0]))
    signed = SpectralDensityGrid(np.array([-1.0, 1.0]), validate=False)
    assert signed.min_eigenvalue() == -1.0


def test_moments_and_arithmetic():
    f = density_from_ma(scalar_ma(1, 0.5), 32)
    np.testing.assert_allclose(f.moments(), [1.25])
    np.testing.assert_allclose((f + f).moments(), [2.5])
    np.testing.assert_allclose(f.scaled(2.0).values, 2 * f.values)
    with pytest.raises(DimensionError):
        f + density_from_ma(scalar_ma(1), 16)


def test_covariance_examples():
    white = SpectralDensityGrid.constant(3.0 * np.eye(2), 32)
    R = covariances_from_density(white, 4)
    np.testing.assert_allclose(R.lag(0), 3 * np.eye(2))
    np.testing.assert_allclose(R.lags[1:], 0, atol=1e-14)
    R = covariances_from_density(density_from_ma(scalar_ma(1, 0.5), 64), 3)
    np.testing.assert_allclose(R.lags.ravel(), [1.25, 0.5, 0, 0], atol=1e-14)
    with pytest.raises(AliasingError):
        covariances_from_density(white, 16)


def test_covariance_hermitian_and_psd(rng):
    f = density_from_ma(random_ma(rng, 3, 2), 64)
    R = covariances_from_density(f, 5)
    for j in range(1, 4):
        np.testing.assert_allclose(R.lag(-j), R.lag(j).conj().T)
    assert R.is_psd()
    T = R.block_toeplitz(3)
    np.testing.assert_allclose(T, T.conj().T, atol=1e-13)
    assert not CovarianceSequence(np.array([1.0, 2.0])).is_psd()


def test_covariance_matches_ma_autocorrelation(rng):
    # R(j) = sum_u c(u + j) c(u)^*
    c = random_ma(rng, 2, 3)
    R = covariances_from_density(density_from_ma(c, 64), 4)
    for j in range(5):
        ref = sum(c.coeffs[u + j] @ c.coeffs[u].conj().T for u in range(c.L + 1 - j)) if j <= c.L else 0
        np.testing.assert_allclose(R.lag(j), ref, atol=1e-12)


def test_factorize_examples():
    d = factorize(SpectralDensityGrid.constant(4.0, 32), 0)
    np.testing.assert_allclose(d.coeffs.ravel(), [2.0])
    d = factorize(density_from_ma(scalar_ma(1, 0.5), 128), 1)
    np.testing.assert_allclose(d.coeffs.ravel(), [1, 0.5], atol=1e-8)


def test_factorize_recovers_minimum_phase_factor_of_non_minimum_phase_input():
    # 0.5 + e^{-i lambda} has its zero inside the disk; the canonical factor is 1 + 0.5 e^{-i lambda}
    d = factorize(density_from_ma(scalar_ma(0.5, 1), 128), 1)
    np.testing.assert_allclose(d.coeffs.ravel(), [1, 0.5], atol=1e-8)


def test_factorize_matrix_case_normalization(rng):
    S = density_from_ma(random_ma(rng, 2, 2), 128)
    d = factorize(S, 2)
    assert sup_rel_residual(S, d) <= 1e-8
    d0 = d.coeffs[0]
    assert abs(d0[0, 1]) == 0
    assert np.all(np.diag(d0).real > 0) and np.allclose(np.diag(d0).imag, 0)


def test_factorize_errors():
    with pytest.raises(FactorizationDomainError):
        factorize(SpectralDensityGrid.zeros(1, 16), 0)
    # zero on the unit circle
    with pytest.raises(FactorizationDomainError):
        factorize(density_from_ma(scalar_ma(1, 1), 64), 1)
    # order too small for an MA(2) density
    with pytest.raises(ConvergenceError) as err:
        factorize(density_from_ma(scalar_ma(1, 0.9, 0.5), 64), 0)
    assert err.value.residual > 1e-10


@settings(max_examples=25, deadline=None)
@given(K=st.integers(1, 4), L=st.integers(0, 8), seed=st.integers(0, 2**32 - 1))
def test_factorization_round_trip(K, L, seed):
    rng = np.random.default_rng(seed)
    S = density_from_ma(random_ma(rng, K, L), 128)
    assert sup_rel_residual(S, factorize(S, L)) <= 1e-8


def test_invert_factor_examples():
    b = invert_factor(scalar_ma(2), 3)
    np.testing.assert_allclose(b.coeffs.ravel(), [0.5, 0, 0, 0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        b = invert_factor(scalar_ma(1, 0.5), 10)
    np.testing.assert_allclose(b.coeffs.ravel(), (-0.5) ** np.arange(11), atol=1e-15)
    with pytest.raises(SingularFactorError):
        invert_factor(MatrixMAPolynomial(np.zeros((2, 2, 2))))


def test_invert_factor_warns_on_long_tail():
    with pytest.warns(TruncationWarning):
        invert_factor(scalar_ma(1, 0.9), 4)


@settings(max_examples=25, deadline=None)
@given(K=st.integers(1, 3), L=st.integers(1, 5), Lb=st.integers(0, 30), seed=st.integers(0, 2**32 - 1))
def test_inverse_convolution_identity(K, L, Lb, seed):
    rng = np.random.default_rng(seed)
    d = random_ma(rng, K, L)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        b = invert_factor(d, Lb)
    for n in range(Lb + 1):
        acc = sum(b.coeffs[u] @ d.coeffs[n - u] for u in range(max(0, n - L), n + 1))
        np.testing.assert_allclose(acc, np.eye(K) if n == 0 else 0, atol=1e-9 * max(1, np.abs(b.coeffs).max()))


def test_inverse_defect_zero_for_exact_inverse():
    assert inverse_defect(scalar_ma(2, 0, 0), invert_factor(scalar_ma(2, 0, 0), 0)) == 0.0
    assert inverse_defect(scalar_ma(1, 0.5), invert_factor(scalar_ma(1, 0.5), 60)) < 1e-17


def test_residual_density_subtract_examples():
    known = SpectralDensityGrid.constant(1.0, 32)
    resid, neg = residual_density_subtract(scalar_ma(np.sqrt(2)), known)
    np.testing.assert_allclose(resid.values.ravel(), 1.0)
    assert not neg.any()

    known = SpectralDensityGrid.constant(1.25, 64)
    resid, neg = residual_density_subtract(scalar_ma(1, 0.5), known)
    np.testing.assert_allclose(resid.values.ravel().real, np.cos(known.freqs), atol=1e-14)
    assert neg.sum() == np.sum(np.cos(known.freqs) < -1e-10)
    with pytest.raises(InfeasibleCandidateError):
        residual_density_subtract(scalar_ma(1, 0.5), known, strict=True)

    resid, _ = residual_density_subtract(scalar_ma(1, 0.5), SpectralDensityGrid.zeros(1, 64))
    np.testing.assert_allclose(resid.values, density_from_ma(scalar_ma(1, 0.5), 64).values)
