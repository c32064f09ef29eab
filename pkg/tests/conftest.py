import numpy as np
import pytest

from pcfilter.spectral import MatrixMAPolynomial, density_from_ma

F_TEST = 256


def random_ma(rng, K, L, decay=0.5, M=None, lower=True):
    """Random MA polynomial with geometrically decaying lags.

    With ``lower=True`` the leading coefficient is lower-triangular with a
    diagonal of at least 1, the normalization used by the factorization.
    """
    M = K if M is None else M
    shape = (L + 1, K, M)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c *= decay ** np.arange(L + 1)[:, None, None]
    if lower:
        c[0] = np.tril(c[0])
        c[0][np.diag_indices(min(K, M))] = 1.0 + np.abs(rng.standard_normal(min(K, M)))
    return MatrixMAPolynomial(c)


def random_weights(rng, K, J):
    return rng.standard_normal((J + 1, K)) + 1j * rng.standard_normal((J + 1, K))


def random_problem(rng, K, L, J, F=F_TEST):
    phi = random_ma(rng, K, L)
    psi = random_ma(rng, K, L)
    return density_from_ma(phi, F), density_from_ma(psi, F), random_weights(rng, K, J), phi, psi


def scalar_ma(*coeffs):
    return MatrixMAPolynomial(np.asarray(coeffs, dtype=complex).reshape(-1, 1, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA = []


@pytest.fixture
def record_criterion():
    """Collect one pass/fail line per acceptance criterion for the summary."""

    def record(label, passed, detail=""):
        _CRITERIA.append((label, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
