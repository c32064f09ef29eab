"""Optimal and minimax linear filtering of periodically correlated processes."""

from .blocking import (
    BlockedSequence,
    FunctionalWeights,
    SampledPath,
    block_path,
    block_weights,
    harmonic_map,
    unblock,
)
from .errors import (
    ConvergenceError,
    DomainError,
    NumericalInconsistencyError,
    PCFilterError,
    TruncationWarning,
)
from .filtering import (
    FilterCharacteristic,
    FilterFactors,
    MseReport,
    mse,
    quadratic_mse,
    solve_filter,
    spectral_characteristic_via_f,
    spectral_characteristic_via_g,
)
from .kernels import BACKEND
from .minimax import (
    DensityClassD00,
    SaddleCandidate,
    SolverOptions,
    lagrange_residual,
    least_favorable_given_f,
    least_favorable_given_g,
    objective_given_h0,
    saddle_check,
    solve_least_favorable,
)
from .oracle import SimulationSpec, empirical_mse, finite_horizon_mmse, simulate_ma
from .spectral import (
    CovarianceSequence,
    MatrixMAPolynomial,
    SpectralDensityGrid,
    covariances_from_density,
    density_from_ma,
    factorize,
    invert_factor,
    residual_density_subtract,
)

__version__ = "0.1.0"
