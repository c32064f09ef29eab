"""Kernel dispatch: the compiled core when importable, numpy otherwise.

Set ``PCFILTER_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("PCFILTER_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py


def _c(x):
    return np.ascontiguousarray(x, dtype=complex)


def causal_apply(c, a):
    return _impl.causal_apply(_c(c), _c(a))


def adjoint_apply(c, x):
    return _impl.adjoint_apply(_c(c), _c(x))


def inverse_recursion(d, b0, n_b):
    return _impl.inverse_recursion(_c(d), _c(b0), int(n_b))


def ma_filter(c, eps, n_out):
    return _impl.ma_filter(_c(c), _c(eps), int(n_out))
