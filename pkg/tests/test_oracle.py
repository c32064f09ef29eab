import numpy as np
import pytest

from conftest import random_ma, scalar_ma
from pcfilter.errors import DimensionError, HorizonError, IllConditionedWarning
from pcfilter.filtering import FilterCharacteristic, solve_filter
from pcfilter.oracle import (
    MC_SIGMA_BAND,
    SimulationSpec,
    _chunk,
    empirical_mse,
    finite_horizon_mmse,
    iter_simulations,
    simulate_ma,
)
from pcfilter.spectral import MatrixMAPolynomial, SpectralDensityGrid, covariances_from_density, density_from_ma

# Delta for f = |1 + 0.5 e^{-i lambda}|^2, g = 1, a = (1): computed once with the
# factorization routes and independently with a 200-block normal-equation solve
MA1_WHITE_DELTA = 0.5311288741492748


def test_white_single_block():
    f = SpectralDensityGrid.constant(1.0, 64)
    assert finite_horizon_mmse(f, f, [1.0], 1) == pytest.approx(0.5, abs=1e-12)


def test_matches_formula_for_ma_signal():
    f = density_from_ma(scalar_ma(1, 0.5), 1024)
    g = SpectralDensityGrid.constant(1.0, 1024)
    assert finite_horizon_mmse(f, g, [1.0], 200) == pytest.approx(MA1_WHITE_DELTA, abs=1e-12)
    assert solve_filter(f, g, [1.0], 1).report.delta == pytest.approx(MA1_WHITE_DELTA, abs=1e-12)


def test_monotone_in_horizon(rng):
    f = density_from_ma(random_ma(rng, 2, 2), 256)
    g = density_from_ma(random_ma(rng, 2, 1), 256)
    a = rng.standard_normal((2, 2))
    values = [finite_horizon_mmse(f, g, a, n) for n in (2, 4, 8, 16, 32)]
    assert all(later <= earlier + 1e-12 for earlier, later in zip(values, values[1:]))


def test_horizon_errors():
    f = SpectralDensityGrid.constant(1.0, 64)
    with pytest.raises(HorizonError):
        finite_horizon_mmse(f, f, [1, 1, 1], 1)
    with pytest.raises(DimensionError):
        finite_horizon_mmse(f, f, np.ones((1, 2)), 4)


def test_ridge_fallback_warns():
    v = np.array([1.0, 1.0])
    f = SpectralDensityGrid.constant(np.outer(v, v), 64)
    g = SpectralDensityGrid.zeros(2, 64)
    with pytest.warns(IllConditionedWarning):
        value = finite_horizon_mmse(f, g, np.array([[1.0, -1.0]]), 3)
    assert value == pytest.approx(0.0, abs=1e-6)


def test_simulation_is_reproducible_and_chunk_local():
    spec = SimulationSpec(scalar_ma(1, 0.5), scalar_ma(0.7), horizon=6, n_paths=10, seed=3)
    a, b = simulate_ma(spec), simulate_ma(spec)
    np.testing.assert_array_equal(a.signal, b.signal)
    chunks = list(iter_simulations(spec, chunk_paths=4))
    assert [c.signal.shape[0] for c in chunks] == [4, 4, 2]
    # a chunk depends only on (seed, chunk index), not on what ran before it
    np.testing.assert_array_equal(_chunk(spec, 1, 4).signal, chunks[1].signal)
    other = simulate_ma(SimulationSpec(spec.phi, spec.psi, 6, 10, seed=4))
    assert not np.allclose(other.signal, a.signal)


def test_simulated_covariance(rng):
    phi = random_ma(rng, 2, 1)
    spec = SimulationSpec(phi, None, horizon=3, n_paths=100_000, seed=0)
    sim = simulate_ma(spec)
    assert np.all(sim.noise == 0)
    x = sim.signal
    R = covariances_from_density(density_from_ma(phi, 64), 1)
    emp0 = np.einsum("pk,pl->kl", x[:, 2], x[:, 2].conj()) / x.shape[0]
    emp1 = np.einsum("pk,pl->kl", x[:, 2], x[:, 1].conj()) / x.shape[0]
    scale = float(np.abs(R.lag(0)).max())
    assert np.abs(emp0 - R.lag(0)).max() < 0.05 * scale
    assert np.abs(emp1 - R.lag(1)).max() < 0.05 * scale


def test_empirical_mse_agrees_with_formula():
    f = density_from_ma(scalar_ma(1, 0.5), 1024)
    g = SpectralDensityGrid.constant(1.0, 1024)
    sol = solve_filter(f, g, [1.0], 1)
    spec = SimulationSpec(scalar_ma(1, 0.5), scalar_ma(1.0), horizon=sol.h.Jh + 1, n_paths=20_000, seed=11)
    mean, se = empirical_mse(sol.h, spec, [1.0])
    assert abs(mean - sol.report.delta) <= MC_SIGMA_BAND * se
    with pytest.raises(HorizonError):
        empirical_mse(sol.h, SimulationSpec(spec.phi, spec.psi, 2, 10), [1.0])
    with pytest.raises(DimensionError):
        empirical_mse(FilterCharacteristic(np.ones((1, 2))), SimulationSpec(spec.phi, spec.psi, 2, 10), [1.0])


def test_spec_validation():
    with pytest.raises(ValueError):
        SimulationSpec(scalar_ma(1), None, horizon=2, n_paths=0)
    with pytest.raises(HorizonError):
        SimulationSpec(scalar_ma(1), None, horizon=0)
    with pytest.raises(DimensionError):
        SimulationSpec(scalar_ma(1), MatrixMAPolynomial.identity(2), horizon=2)
