import os
import subprocess
import sys

import numpy as np
import pytest

from pcfilter import _kernels_py, kernels

try:
    from pcfilter import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = [pytest.param(_kernels_py, id="numpy")]
BACKENDS.append(
    pytest.param(_ckernels, id="cython", marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))
)


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def naive_causal(c, a):
    n_c, n_a = c.shape[0], a.shape[0]
    out = np.zeros((n_c + n_a - 1, c.shape[2]), dtype=complex)
    for q in range(out.shape[0]):
        for l in range(n_a):
            if 0 <= q - l < n_c:
                out[q] += c[q - l].T @ a[l]
    return out


def naive_adjoint(c, x):
    out = np.zeros((x.shape[0], c.shape[1]), dtype=complex)
    for j in range(x.shape[0]):
        for u in range(c.shape[0]):
            if u + j < x.shape[0]:
                out[j] += c[u].conj() @ x[u + j]
    return out


@pytest.mark.parametrize("impl", BACKENDS)
@pytest.mark.parametrize("K,M,n_c,n", [(1, 1, 1, 1), (1, 1, 3, 7), (2, 3, 4, 5), (3, 3, 6, 2)])
def test_convolutions_match_definition(impl, rng, K, M, n_c, n):
    c = cplx(rng, n_c, K, M)
    a = cplx(rng, n, K)
    x = cplx(rng, n + 2, M)
    np.testing.assert_allclose(impl.causal_apply(c, a), naive_causal(c, a), atol=1e-12)
    np.testing.assert_allclose(impl.adjoint_apply(c, x), naive_adjoint(c, x), atol=1e-12)


@pytest.mark.parametrize("impl", BACKENDS)
@pytest.mark.parametrize("K,L", [(1, 1), (2, 3), (3, 0)])
def test_inverse_recursion_is_convolution_inverse(impl, rng, K, L):
    d = cplx(rng, L + 1, K, K) * 0.3
    d[0] += 2 * np.eye(K)
    b = impl.inverse_recursion(d, np.linalg.inv(d[0]), 12)
    for n in range(12):
        acc = sum(b[u] @ d[n - u] for u in range(max(0, n - L), n + 1))
        np.testing.assert_allclose(acc, np.eye(K) if n == 0 else 0, atol=1e-12)


@pytest.mark.parametrize("impl", BACKENDS)
def test_ma_filter_matches_definition(impl, rng):
    c = cplx(rng, 3, 2, 2)
    eps = cplx(rng, 4, 10 + 2, 2)
    out = impl.ma_filter(c, eps, 10)
    for p in range(4):
        for t in range(10):
            ref = sum(c[u] @ eps[p, t + 2 - u] for u in range(3))
            np.testing.assert_allclose(out[p, t], ref, atol=1e-12)


@pytest.mark.skipif(_ckernels is None, reason="extension not built")
def test_backends_agree(rng):
    c = cplx(rng, 5, 3, 3)
    a = cplx(rng, 40, 3)
    eps = cplx(rng, 8, 44, 3)
    for name, args in (
        ("causal_apply", (c, a)),
        ("adjoint_apply", (c, a)),
        ("inverse_recursion", (c, np.linalg.inv(c[0]), 30)),
        ("ma_filter", (c, eps, 40)),
    ):
        np.testing.assert_allclose(getattr(_ckernels, name)(*args), getattr(_kernels_py, name)(*args), atol=1e-10)


def test_dispatch_accepts_noncontiguous_real_input():
    c = np.ones((2, 1, 1))[:, :, ::1]
    a = np.arange(6.0).reshape(3, 2)[:, :1]
    np.testing.assert_allclose(kernels.causal_apply(c, a).ravel(), [0, 2, 6, 4])


def test_pure_python_switch():
    env = dict(os.environ, PCFILTER_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import pcfilter.kernels as k; print(k.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
