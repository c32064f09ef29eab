"""Least favorable densities and robust filters in the moment class D00.

The class fixes the diagonal moments ``p_k`` of the signal density and
``q_k`` of the noise density.  Densities are searched among MA densities of
a fixed order, parameterized by their factors so positivity is automatic;
a factor row ``k`` then lies on the sphere of radius ``sqrt(p_k)``
(resp. ``sqrt(q_k)``) and the search is a projected (retracted) gradient
ascent on a product of spheres.  Candidates are verified by the
multiplier residuals of the stationarity relations and by random probes of
the two saddle-point inequalities.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize, nnls

from .errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    FactorizationDomainError,
    InfeasibleCandidateError,
    NumericalInconsistencyError,
    SingularFactorError,
    TruncationWarning,
)
from .filtering import (
    ROUTES,
    FilterCharacteristic,
    FilterFactors,
    _as_weights,
    _cascade,
    apply_adjoint_transform,
    apply_factor_transform,
    choose_inverse_order,
    mse,
    quadratic_mse,
    spectral_characteristic_via_f,
    spectral_characteristic_via_g,
)
from .spectral import (
    DEFAULT_GRID_SIZE,
    MatrixMAPolynomial,
    SpectralDensityGrid,
    density_from_ma,
    factorize,
    inverse_defect,
    invert_factor,
)

__all__ = [
    "DensityClassD00",
    "SolverOptions",
    "SaddleCandidate",
    "SaddleReport",
    "make_candidate",
    "objective_given_h0",
    "lagrange_residual",
    "fit_multipliers",
    "solve_least_favorable",
    "least_favorable_given_f",
    "least_favorable_given_g",
    "saddle_check",
    "random_feasible_pair",
    "random_search",
    "SearchResult",
]

log = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-8
FACTOR_RESIDUAL_TOL = 1e-8
SADDLE_TOL = 1e-8
PSD_TOL = -1e-10

_FAILURES = (
    FactorizationDomainError,
    ConvergenceError,
    SingularFactorError,
    NumericalInconsistencyError,
    InfeasibleCandidateError,
    np.linalg.LinAlgError,
)


@dataclass(frozen=True)
class DensityClassD00:
    """Pairs ``(f, g)`` with ``mean f_kk = p_k`` and ``mean g_kk = q_k``."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if p.shape != q.shape or p.ndim != 1:
            raise DimensionError(f"p and q must be vectors of equal length, got {p.shape}, {q.shape}")
        if np.any(p < 0) or np.any(q < 0):
            raise InfeasibleCandidateError("moment constraints must be nonnegative")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def K(self) -> int:
        return self.p.size

    def membership_error(self, f: SpectralDensityGrid, g: SpectralDensityGrid) -> float:
        return float(max(np.abs(f.moments() - self.p).max(), np.abs(g.moments() - self.q).max()))

    def contains(self, f: SpectralDensityGrid, g: SpectralDensityGrid, tol: float = MEMBERSHIP_TOL) -> bool:
        if f.K != self.K or g.K != self.K:
            return False
        psd = min(f.min_eigenvalue(), g.min_eigenvalue()) >= PSD_TOL
        return psd and self.membership_error(f, g) <= tol


@dataclass(frozen=True)
class SolverOptions:
    """Tuning of the projected-gradient searches.

    ``order`` is the MA order of the searched densities; ``grid_size`` is
    used inside the search and ``final_grid_size`` for the returned candidate.
    """

    order: int = 2
    grid_size: int = 256
    final_grid_size: int = DEFAULT_GRID_SIZE
    stationarity_tol: float = 1e-6
    restarts: int = 8
    max_iter: int = 200
    fd_step: float = 1e-6
    grad_tol: float = 1e-9
    tie_tol: float = 1e-9
    factor_tol: float = 1e-10
    seed: int = 0


@dataclass(frozen=True)
class SaddleCandidate:
    """Candidate least favorable pair with its factors and robust filter.

    ``phi0`` / ``psi0`` may be ``None`` when the density is singular; the
    relevant quantities are then obtained from ``S_f + S_g = B^* D^* D a``.
    """

    f0: SpectralDensityGrid
    g0: SpectralDensityGrid
    d0: MatrixMAPolynomial
    phi0: Optional[MatrixMAPolynomial]
    psi0: Optional[MatrixMAPolynomial]
    b0: MatrixMAPolynomial
    alpha2: np.ndarray
    beta2: np.ndarray
    delta0: float
    a: np.ndarray
    h0: FilterCharacteristic
    route: str = "via_f"
    certified: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.f0.K

    @property
    def F(self) -> int:
        return self.f0.F


@dataclass(frozen=True)
class SaddleReport:
    n_probes: int
    left_violations: int
    right_violations: int
    worst_left_margin: Optional[float]
    worst_right_margin: Optional[float]
    value_at_candidate: float

    @property
    def passed(self) -> bool:
        return self.left_violations == 0 and self.right_violations == 0

    def as_dict(self) -> dict:
        return {
            "n_probes": self.n_probes,
            "left_violations": self.left_violations,
            "right_violations": self.right_violations,
            "worst_left_margin": self.worst_left_margin,
            "worst_right_margin": self.worst_right_margin,
            "value_at_candidate": self.value_at_candidate,
            "passed": self.passed,
        }


# ---------------------------------------------------------------------------
# candidate assembly and checks


def _factor_residual(S: SpectralDensityGrid, c: Optional[MatrixMAPolynomial]) -> float:
    if c is None:
        return float("nan")
    P = c.on_grid(S.F)
    diff = np.linalg.norm(S.values - P @ np.conj(np.swapaxes(P, 1, 2)), axis=(1, 2))
    scale = max(float(np.linalg.norm(S.values, axis=(1, 2)).max()), 1e-300)
    return float(diff.max() / scale) if np.any(S.values) else float(diff.max())


def _factor_of(S: SpectralDensityGrid, L: int, tol: float) -> Optional[MatrixMAPolynomial]:
    if not np.any(S.values):
        return MatrixMAPolynomial.zeros(S.K)
    try:
        return factorize(S, L, tol=tol)
    except (FactorizationDomainError, ConvergenceError):
        return None


def _pad(x: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, x.shape[1]), dtype=complex)
    out[: x.shape[0]] = x
    return out


def _s_sequences(d, b, phi, psi, a) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of ``S_f`` and ``S_g``; a missing factor is filled by complement."""
    s_f = _cascade(b, phi, a)[1] if phi is not None else None
    s_g = _cascade(b, psi, a)[1] if psi is not None else None
    if s_f is None or s_g is None:
        total = _cascade(b, d, a)[1]
        if s_f is None and s_g is None:
            raise DomainError("need a factor of f or of g")
        if s_f is None:
            n = max(total.shape[0], s_g.shape[0])
            s_f = _pad(total, n) - _pad(s_g, n)
        else:
            n = max(total.shape[0], s_f.shape[0])
            s_g = _pad(total, n) - _pad(s_f, n)
    n = max(s_f.shape[0], s_g.shape[0])
    return _pad(s_f, n), _pad(s_g, n)


def _series_on_grid(coeffs: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    j = np.arange(coeffs.shape[0])
    return np.exp(-1j * np.outer(freqs, j)) @ coeffs


def _lagrange_terms(candidate: SaddleCandidate):
    """Grid values of ``S_g S_g^*``, ``S_f S_f^*`` and the columns of ``d0``."""
    s_f, s_g = _s_sequences(candidate.d0, candidate.b0, candidate.phi0, candidate.psi0, candidate.a)
    freqs = candidate.f0.freqs
    Sg = _series_on_grid(s_g, freqs)
    Sf = _series_on_grid(s_f, freqs)
    D = candidate.d0.evaluate(freqs)
    lhs_g = Sg[:, :, None] * Sg.conj()[:, None, :]
    lhs_f = Sf[:, :, None] * Sf.conj()[:, None, :]
    # basis[k, r] = d(lambda_r)[:, k] d(lambda_r)[:, k]^*
    basis = np.einsum("rik,rjk->krij", D, D.conj())
    return lhs_g, lhs_f, basis


def _fit(lhs: np.ndarray, basis: np.ndarray) -> np.ndarray:
    K = basis.shape[0]
    A = basis.reshape(K, -1).T
    y = lhs.ravel()
    A_real = np.vstack([A.real, A.imag])
    y_real = np.concatenate([y.real, y.imag])
    scale = max(float(np.abs(A_real).max()), 1e-300)
    coef, _ = nnls(A_real / scale, y_real, maxiter=50 * K + 100)
    return coef / scale


def _sup_residual(lhs, basis, mult) -> float:
    model = np.einsum("k,krij->rij", np.asarray(mult, dtype=float), basis)
    return float(np.linalg.norm(lhs - model, axis=(1, 2)).max())


def fit_multipliers(candidate: SaddleCandidate) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares multipliers ``(alpha^2, beta^2)`` (nonnegative) over the grid."""
    lhs_g, lhs_f, basis = _lagrange_terms(candidate)
    return _fit(lhs_g, basis), _fit(lhs_f, basis)


def lagrange_residual(candidate: SaddleCandidate, alpha2=None, beta2=None) -> tuple[float, float]:
    """Sup-norm residuals of ``S_g S_g^* = d diag(alpha^2) d^*`` and the ``S_f`` analogue.

    Returns ``(residual_g, residual_f)``.  Multipliers not supplied are
    fitted by nonnegative least squares over the grid.
    """
    lhs_g, lhs_f, basis = _lagrange_terms(candidate)
    alpha2 = _fit(lhs_g, basis) if alpha2 is None else np.atleast_1d(alpha2)
    beta2 = _fit(lhs_f, basis) if beta2 is None else np.atleast_1d(beta2)
    return _sup_residual(lhs_g, basis, alpha2), _sup_residual(lhs_f, basis, beta2)


def objective_given_h0(candidate: SaddleCandidate, f: SpectralDensityGrid, g: SpectralDensityGrid) -> float:
    """Error of the candidate's robust filter under arbitrary densities ``(f, g)``.

    Linear in ``(f, g)``: the grid mean of
    ``S_g^T b0 f b0^* conj(S_g) + S_f^T b0 g b0^* conj(S_f)``.
    """
    if f.values.shape != g.values.shape or f.K != candidate.K:
        raise DimensionError("densities must share the candidate's K and a common grid")
    s_f, s_g = _s_sequences(candidate.d0, candidate.b0, candidate.phi0, candidate.psi0, candidate.a)
    freqs = f.freqs
    B = candidate.b0.evaluate(freqs)
    vg = np.einsum("rmk,rm->rk", B, _series_on_grid(s_g, freqs))
    vf = np.einsum("rmk,rm->rk", B, _series_on_grid(s_f, freqs))
    total = np.einsum("rk,rkn,rn->", vg, f.values, vg.conj()) + np.einsum("rk,rkn,rn->", vf, g.values, vf.conj())
    return float(total.real / f.F)


def make_candidate(
    f0: SpectralDensityGrid,
    g0: SpectralDensityGrid,
    a,
    L: int,
    route: str = "via_f",
    phi: Optional[MatrixMAPolynomial] = None,
    psi: Optional[MatrixMAPolynomial] = None,
    density_class: Optional[DensityClassD00] = None,
    stationarity_tol: float = 1e-6,
    factor_tol: float = 1e-10,
    relevant: str = "both",
    extra: Optional[dict] = None,
) -> SaddleCandidate:
    """Assemble factors, robust filter, error and certification for ``(f0, g0)``.

    ``relevant`` selects which stationarity relations count toward
    certification: ``"both"``, ``"f"`` (signal relation only) or ``"g"``.
    """
    if route not in ROUTES:
        raise ValueError(f"route must be one of {ROUTES}, got {route!r}")
    aa = _as_weights(a)
    d0 = factorize(f0 + g0, L, tol=factor_tol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        b0 = invert_factor(d0, choose_inverse_order(d0, aa.shape[0] - 1, max_order=f0.F // 2))
    phi0 = phi if phi is not None else _factor_of(f0, L, factor_tol)
    psi0 = psi if psi is not None else _factor_of(g0, L, factor_tol)
    if route == "via_f" and phi0 is None:
        route = "via_g"
    if route == "via_g" and psi0 is None:
        route = "via_f"
    factors = FilterFactors(d=d0, b=b0, phi=phi0, psi=psi0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        if route == "via_f":
            h0 = spectral_characteristic_via_f(b0, phi0, aa)
        else:
            h0 = spectral_characteristic_via_g(d0, b0, psi0, aa)
    delta0 = mse(route, factors, aa).delta

    draft = SaddleCandidate(
        f0=f0, g0=g0, d0=d0, phi0=phi0, psi0=psi0, b0=b0,
        alpha2=np.zeros(f0.K), beta2=np.zeros(f0.K),
        delta0=delta0, a=aa, h0=h0, route=route,
    )
    alpha2, beta2 = fit_multipliers(draft)
    res_g, res_f = lagrange_residual(draft, alpha2, beta2)
    fac = {
        "d0": _factor_residual(f0 + g0, d0),
        "phi0": _factor_residual(f0, phi0),
        "psi0": _factor_residual(g0, psi0),
    }
    membership = density_class.membership_error(f0, g0) if density_class is not None else float("nan")
    stationarity = {"both": max(res_g, res_f), "f": res_f, "g": res_g}[relevant]
    needed = [v for k, v in fac.items() if not np.isnan(v) or k == "d0"]
    certified = bool(
        all(v <= FACTOR_RESIDUAL_TOL for v in needed)
        and (density_class is None or membership <= MEMBERSHIP_TOL)
        and stationarity <= stationarity_tol
    )
    diagnostics = {
        "factor_residual_d0": fac["d0"],
        "factor_residual_phi0": fac["phi0"],
        "factor_residual_psi0": fac["psi0"],
        "membership_error": membership,
        "lagrange_residual_g": res_g,
        "lagrange_residual_f": res_f,
        "inverse_order": b0.L,
        "inverse_tail": inverse_defect(d0, b0),
        "min_eigenvalue_sum": (f0 + g0).min_eigenvalue(),
    }
    diagnostics.update(extra or {})
    return replace(draft, alpha2=alpha2, beta2=beta2, certified=certified, diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# projected gradient machinery


def _normalize_rows(X: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Scale row ``k`` of each factor block (all lags and columns) to ``radii[blk, k]``."""
    norms = np.sqrt(np.sum(np.abs(X) ** 2, axis=(1, 3)))  # (blocks, K)
    safe = np.where(norms > 0, norms, 1.0)
    scale = np.where(radii > 0, radii / safe, 0.0)
    return X * scale[:, None, :, None]


@dataclass
class _AscentResult:
    X: np.ndarray
    value: float
    iterations: int
    grad_norm: float
    converged: bool


def _ascend(fun: Callable, X0: np.ndarray, radii: np.ndarray, opts: SolverOptions) -> _AscentResult:
    """Maximize ``fun`` over the product of row spheres.

    The free rows are optimized unconstrained through the map
    ``X -> normalize(X)``; the composed objective is invariant to row
    scaling, so its gradient at a normalized point is tangent to the
    spheres.  L-BFGS-B drives the search with central-difference gradients.
    Points where ``fun`` is not finite (non-factorizable sums) get a large
    penalty so the line search backs off from them.
    """
    shape = X0.shape
    free = np.broadcast_to((radii > 0)[:, None, :, None], shape)
    n = int(free.sum())

    def unpack(v):
        X = np.zeros(shape, dtype=complex)
        X[free] = v[:n] + 1j * v[n:]
        return _normalize_rows(X, radii)

    start = _normalize_rows(X0, radii)
    val0 = fun(start)
    if not np.isfinite(val0):
        return _AscentResult(start, val0, 0, float("inf"), False)
    if n == 0:
        return _AscentResult(start, val0, 0, 0.0, True)
    penalty = 1e3 * (1.0 + abs(val0))

    def loss(v):
        val = fun(unpack(v))
        return -val if np.isfinite(val) else penalty

    def grad(v):
        g = np.empty_like(v)
        h = opts.fd_step
        for i in range(v.size):
            e = np.zeros_like(v)
            e[i] = h
            g[i] = (loss(v + e) - loss(v - e)) / (2 * h)
        return g

    v0 = np.concatenate([start[free].real, start[free].imag])
    res = minimize(
        loss, v0, jac=grad, method="L-BFGS-B",
        options={"maxiter": opts.max_iter, "gtol": opts.grad_tol, "ftol": 1e-15},
    )
    log.debug("L-BFGS-B: %s (%d evaluations)", res.message, res.nfev)
    X = unpack(res.x)
    value = fun(X)
    if not np.isfinite(value) or value < val0:
        X, value = start, val0
    return _AscentResult(X, value, int(res.nit), float(np.abs(res.jac).max()), bool(res.success))


def _entropy(X_sum: np.ndarray) -> float:
    """Mean log-determinant of a density on the grid (larger = flatter)."""
    sign, logdet = np.linalg.slogdet(X_sum)
    return float(np.mean(np.where(sign > 0, logdet, -np.inf)))


def _density_values(c: np.ndarray, E: np.ndarray) -> np.ndarray:
    P = np.einsum("ru,ukm->rkm", E, c)
    return P @ np.conj(np.swapaxes(P, 1, 2))


def _grid_basis(F: int, L: int) -> np.ndarray:
    lam = -np.pi + 2 * np.pi * np.arange(F) / F
    return np.exp(-1j * np.outer(lam, np.arange(L + 1)))


# ---------------------------------------------------------------------------
# solvers


def _validate_problem(density_class: DensityClassD00, aa: np.ndarray):
    if aa.shape[1] != density_class.K:
        raise DimensionError(f"weights have length {aa.shape[1]}, class has K={density_class.K}")
    if np.any(density_class.p + density_class.q <= 0):
        raise InfeasibleCandidateError("every harmonic needs p_k + q_k > 0 for f + g to be factorizable")


def solve_least_favorable(
    density_class: DensityClassD00,
    a,
    route: str = "via_f",
    opts: Optional[SolverOptions] = None,
) -> SaddleCandidate:
    """Maximize the optimal error over MA densities of order ``opts.order`` in the class.

    The first start is the flat pair ``f = diag(p)``, ``g = diag(q)``; the
    remaining ``opts.restarts - 1`` starts are random.  Ties in the error
    (within ``opts.tie_tol``) go to the flatter pair, measured by the mean
    log-determinant of ``f + g``.
    """
    opts = opts or SolverOptions()
    if route not in ROUTES:
        raise ValueError(f"route must be one of {ROUTES}, got {route!r}")
    aa = _as_weights(a)
    _validate_problem(density_class, aa)
    K, L = density_class.K, opts.order
    J = aa.shape[0] - 1
    radii = np.sqrt(np.vstack([density_class.p, density_class.q]))
    F = max(opts.grid_size, 4 * (L + 1))
    E = _grid_basis(F, L)
    max_lb = max(F // 2 - L - J - 1, L + J + 1)

    def value(X):
        phi, psi = X[0], X[1]
        S = _density_values(phi, E) + _density_values(psi, E)
        try:
            # no grid refinement: near-singular pairs act as a barrier
            d = factorize(SpectralDensityGrid(S, validate=False), L, tol=opts.factor_tol, max_grid=F)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TruncationWarning)
                b = invert_factor(d, choose_inverse_order(d, J, max_order=max_lb))
            factors = FilterFactors(d, b, MatrixMAPolynomial(phi), MatrixMAPolynomial(psi))
            return mse(route, factors, aa).delta
        except _FAILURES:
            return -np.inf

    starts = [_flat_start(radii, K, L)]
    rng = np.random.default_rng(np.random.SeedSequence(opts.seed))
    for _ in range(max(opts.restarts - 1, 0)):
        starts.append(_random_start(rng, 2, K, L))

    results = []
    for i, X0 in enumerate(starts):
        res = _ascend(value, X0, radii, opts)
        S = _density_values(res.X[0], E) + _density_values(res.X[1], E)
        results.append((res, _entropy(S)))
        log.debug("start %d: delta=%.12g iterations=%d grad=%.2e", i, res.value, res.iterations, res.grad_norm)

    best_val = max(r.value for r, _ in results)
    if not np.isfinite(best_val):
        raise ConvergenceError("no start produced a factorizable density pair")
    tied = [(r, h) for r, h in results if r.value >= best_val - opts.tie_tol]
    best, _ = max(tied, key=lambda item: item[1])

    Ff = opts.final_grid_size
    phi = MatrixMAPolynomial(best.X[0])
    psi = MatrixMAPolynomial(best.X[1])
    f0, g0 = density_from_ma(phi, Ff), density_from_ma(psi, Ff)
    extra = {
        "search_delta": best.value,
        "iterations": best.iterations,
        "gradient_norm": best.grad_norm,
        "converged": best.converged,
        "starts": len(starts),
    }
    return make_candidate(
        f0, g0, aa, L, route=route, phi=phi, psi=psi, density_class=density_class,
        stationarity_tol=opts.stationarity_tol, factor_tol=opts.factor_tol, extra=extra,
    )


def _flat_start(radii: np.ndarray, K: int, L: int) -> np.ndarray:
    X = np.zeros((radii.shape[0], L + 1, K, K), dtype=complex)
    for blk in range(radii.shape[0]):
        X[blk, 0] = np.diag(radii[blk])
    return X


def _random_start(rng: np.random.Generator, blocks: int, K: int, L: int) -> np.ndarray:
    decay = 0.6 ** np.arange(L + 1)
    shape = (blocks, L + 1, K, K)
    X = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return X * decay[None, :, None, None]


def _least_favorable_given(
    known: SpectralDensityGrid,
    known_factor: MatrixMAPolynomial,
    other_moments,
    a,
    opts: SolverOptions,
    known_is_signal: bool,
) -> SaddleCandidate:
    aa = _as_weights(a)
    K = known.K
    other = np.atleast_1d(np.asarray(other_moments, dtype=float))
    if other.shape != (K,):
        raise DimensionError(f"moment vector must have length {K}, got {other.shape}")
    if np.any(other < 0):
        raise InfeasibleCandidateError("moment constraints must be nonnegative")
    if known_factor.K != K:
        raise DimensionError("known factor and density disagree on K")
    known_moments = known.moments()
    if np.any(known_moments + other <= 0):
        raise InfeasibleCandidateError("every harmonic needs a positive total moment")
    L = max(opts.order, known_factor.L)
    J = aa.shape[0] - 1
    F = known.F
    E = _grid_basis(F, L)
    radii = np.sqrt(known_moments + other)[None, :]
    max_lb = max(F // 2 - L - J - 1, L + J + 1)
    scale = max(1.0, float(np.abs(known.values).max()))

    # ||B^* C^* C a||^2 for the known factor C; minimized over the sum density
    def value(X):
        S = _density_values(X[0], E)
        resid = S - known.values
        if np.linalg.eigvalsh(0.5 * (resid + np.conj(np.swapaxes(resid, 1, 2))))[:, 0].min() < PSD_TOL * scale:
            return -np.inf
        try:
            d = factorize(SpectralDensityGrid(S, validate=False), L, tol=opts.factor_tol, max_grid=F)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TruncationWarning)
                b = invert_factor(d, choose_inverse_order(d, J, max_order=max_lb))
        except _FAILURES:
            return -np.inf
        _, s = _cascade(b, known_factor, aa)
        return -float(np.sum(np.abs(s) ** 2))

    start_density = known.values + np.diag(other)[None]
    try:
        d_start = factorize(SpectralDensityGrid(start_density), L, tol=opts.factor_tol)
    except ConvergenceError:
        d_start = factorize(SpectralDensityGrid(start_density), min(F // 2 - 1, 8 * L + 8), tol=opts.factor_tol)
        d_start = MatrixMAPolynomial(d_start.coeffs[: L + 1])
    res = _ascend(value, d_start.coeffs[None], radii, opts)
    if not np.isfinite(res.value):
        raise InfeasibleCandidateError("no feasible sum density found for the given moments")

    sum_poly = MatrixMAPolynomial(res.X[0])
    S = density_from_ma(sum_poly, F).values
    other_density = S - known.values
    other_density = SpectralDensityGrid(0.5 * (other_density + np.conj(np.swapaxes(other_density, 1, 2))))
    extra = {
        "search_objective": -res.value,
        "iterations": res.iterations,
        "gradient_norm": res.grad_norm,
        "converged": res.converged,
    }
    if known_is_signal:
        cls = DensityClassD00(known_moments, other)
        return make_candidate(
            known, other_density, aa, L, route="via_f", phi=known_factor, density_class=cls,
            stationarity_tol=opts.stationarity_tol, factor_tol=opts.factor_tol, relevant="f", extra=extra,
        )
    cls = DensityClassD00(other, known_moments)
    return make_candidate(
        other_density, known, aa, L, route="via_g", psi=known_factor, density_class=cls,
        stationarity_tol=opts.stationarity_tol, factor_tol=opts.factor_tol, relevant="g", extra=extra,
    )


def _moments_arg(x, attr):
    return getattr(x, attr) if isinstance(x, DensityClassD00) else x


def least_favorable_given_f(
    f: SpectralDensityGrid,
    phi: MatrixMAPolynomial,
    q,
    a,
    opts: Optional[SolverOptions] = None,
) -> SaddleCandidate:
    """Least favorable noise density when the signal density ``f = phi phi^*`` is known.

    Minimizes ``||B^* Phi^* Phi a||^2`` over sum factors ``d`` with
    ``d d^* - f`` PSD and of noise moments ``q`` (a vector or a
    :class:`DensityClassD00`, whose ``q`` is used).
    """
    return _least_favorable_given(f, phi, _moments_arg(q, "q"), a, opts or SolverOptions(), True)


def least_favorable_given_g(
    g: SpectralDensityGrid,
    psi: MatrixMAPolynomial,
    p,
    a,
    opts: Optional[SolverOptions] = None,
) -> SaddleCandidate:
    """Mirror of :func:`least_favorable_given_f` with the noise density known."""
    return _least_favorable_given(g, psi, _moments_arg(p, "p"), a, opts or SolverOptions(), False)


# ---------------------------------------------------------------------------
# probes


def random_feasible_pair(
    density_class: DensityClassD00,
    rng: np.random.Generator,
    order: int,
    F: int,
) -> tuple[SpectralDensityGrid, SpectralDensityGrid]:
    """Random MA densities of the given order rescaled onto the class moments."""
    K = density_class.K
    radii = np.sqrt(np.vstack([density_class.p, density_class.q]))
    L = int(rng.integers(0, order + 1))
    X = _normalize_rows(_random_start(rng, 2, K, L), radii)
    E = _grid_basis(F, L)
    f = SpectralDensityGrid(_density_values(X[0], E), validate=False)
    g = SpectralDensityGrid(_density_values(X[1], E), validate=False)
    return f, g


def saddle_check(
    candidate: SaddleCandidate,
    density_class: DensityClassD00,
    n_probes: int,
    rng_seed: int = 0,
    probe_order: Optional[int] = None,
    perturbation: float = 0.1,
    tol: float = SADDLE_TOL,
) -> SaddleReport:
    """Probe both saddle inequalities with random densities and filter perturbations.

    Left: ``Delta(h0; f, g) <= Delta(h0; f0, g0) + tol`` for random feasible
    ``(f, g)``.  Right: ``Delta(h0; f0, g0) <= Delta(h0 + e; f0, g0) + tol``
    for random one-sided ``e`` with ``||e|| <= perturbation``.  Margins are
    reported as ``bound - value`` so negative means violated.
    """
    value0 = quadratic_mse(candidate.h0, candidate.a, candidate.f0, candidate.g0)
    if n_probes <= 0:
        return SaddleReport(0, 0, 0, None, None, value0)
    order = candidate.d0.L if probe_order is None else probe_order
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    left_margins = np.empty(n_probes)
    right_margins = np.empty(n_probes)
    h = candidate.h0.h_coeffs
    for i in range(n_probes):
        f, g = random_feasible_pair(density_class, rng, order, candidate.F)
        left_margins[i] = value0 - quadratic_mse(candidate.h0, candidate.a, f, g)
        e = rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)
        e *= perturbation * rng.uniform(0.0, 1.0) / np.linalg.norm(e)
        right_margins[i] = quadratic_mse(h + e, candidate.a, candidate.f0, candidate.g0) - value0
    return SaddleReport(
        n_probes=n_probes,
        left_violations=int(np.sum(left_margins < -tol)),
        right_violations=int(np.sum(right_margins < -tol)),
        worst_left_margin=float(left_margins.min()),
        worst_right_margin=float(right_margins.min()),
        value_at_candidate=value0,
    )


@dataclass(frozen=True)
class SearchResult:
    """Outcome of :func:`random_search`.

    ``n_bounded`` pairs could not be factorized; for those the finite-horizon
    MMSE (an upper bound on the optimal error) was used instead.
    """

    best_delta: float
    n_pairs: int
    n_formula: int
    n_bounded: int


def random_search(
    density_class: DensityClassD00,
    a,
    n_pairs: int,
    seed: int = 0,
    order: int = 2,
    F: int = 256,
    route: str = "via_f",
    bound_horizon: int = 64,
) -> SearchResult:
    """Largest optimal error over random feasible MA density pairs."""
    from .oracle import finite_horizon_mmse

    aa = _as_weights(a)
    J = aa.shape[0] - 1
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    best, n_formula, n_bounded = -np.inf, 0, 0
    for _ in range(n_pairs):
        f, g = random_feasible_pair(density_class, rng, order, F)
        try:
            d = factorize(f + g, order)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TruncationWarning)
                b = invert_factor(d, choose_inverse_order(d, J, max_order=F // 2))
            phi = _factor_of(f, order, 1e-10)
            psi = _factor_of(g, order, 1e-10)
            r = route if (phi if route == "via_f" else psi) is not None else ("via_g" if route == "via_f" else "via_f")
            delta = mse(r, FilterFactors(d, b, phi, psi), aa).delta
            n_formula += 1
        except _FAILURES:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                delta = finite_horizon_mmse(f, g, aa, max(bound_horizon, J + 1))
            n_bounded += 1
        best = max(best, delta)
    return SearchResult(float(best), n_pairs, n_formula, n_bounded)
