"""Pure numpy implementations of the convolution kernels.

Shapes follow the convention used throughout the package: a matrix
polynomial is an array ``c`` of shape ``(n_c, K, M)`` holding ``c(0..n_c-1)``,
a vector sequence is an array of shape ``(n, K)``.
"""

import numpy as np


def causal_apply(c, a):
    """out[q] = sum_l c(q - l)^T a[l], q = 0 .. n_c + n_a - 2."""
    n_c, _, m = c.shape
    n_a = a.shape[0]
    out = np.zeros((n_c + n_a - 1, m), dtype=complex)
    for u in range(n_c):
        out[u:u + n_a] += a @ c[u]
    return out


def adjoint_apply(c, x):
    """out[j] = sum_u conj(c(u)) x[u + j], j = 0 .. n_x - 1."""
    n_c, k, _ = c.shape
    n_x = x.shape[0]
    out = np.zeros((n_x, k), dtype=complex)
    for u in range(min(n_c, n_x)):
        out[:n_x - u] += x[u:] @ c[u].conj().T
    return out


def inverse_recursion(d, b0, n_b):
    """Coefficients b(0..n_b-1) of the causal inverse with b(0) = ``b0``."""
    n_d, k, _ = d.shape
    b = np.zeros((n_b, k, k), dtype=complex)
    b[0] = b0
    for n in range(1, n_b):
        lo = max(0, n - n_d + 1)
        # sum_{u=lo}^{n-1} b(u) d(n-u)
        acc = np.einsum("uij,ujk->ik", b[lo:n], d[n - lo:0:-1])
        b[n] = -acc @ b0
    return b


def ma_filter(c, eps, n_out):
    """Moving-average filtering of innovations.

    ``eps`` has shape ``(P, n_out + n_c - 1, M)``; returns ``(P, n_out, K)``
    with out[p, t] = sum_u c(u) eps[p, t + n_c - 1 - u].
    """
    n_c, k, _ = c.shape
    p = eps.shape[0]
    out = np.zeros((p, n_out, k), dtype=complex)
    for u in range(n_c):
        start = n_c - 1 - u
        out += eps[:, start:start + n_out] @ c[u].T
    return out
