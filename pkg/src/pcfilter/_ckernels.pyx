# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_kernels_py``; same signatures.

Complex products are spelled out on real and imaginary parts so the inner
loops stay in plain double arithmetic.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef double complex cplx


def causal_apply(const cplx[:, :, ::1] c, const cplx[:, ::1] a):
    cdef Py_ssize_t n_c = c.shape[0], K = c.shape[1], M = c.shape[2]
    cdef Py_ssize_t n_a = a.shape[0]
    out_arr = np.zeros((n_c + n_a - 1, M), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    cdef Py_ssize_t u, l, k, m
    cdef double sr, si, cr, ci, ar, ai
    with nogil:
        for u in range(n_c):
            for l in range(n_a):
                for m in range(M):
                    sr = 0.0
                    si = 0.0
                    for k in range(K):
                        cr = c[u, k, m].real
                        ci = c[u, k, m].imag
                        ar = a[l, k].real
                        ai = a[l, k].imag
                        sr = sr + cr * ar - ci * ai
                        si = si + cr * ai + ci * ar
                    out[u + l, m].real = out[u + l, m].real + sr
                    out[u + l, m].imag = out[u + l, m].imag + si
    return out_arr


def adjoint_apply(const cplx[:, :, ::1] c, const cplx[:, ::1] x):
    cdef Py_ssize_t n_c = c.shape[0], K = c.shape[1], M = c.shape[2]
    cdef Py_ssize_t n_x = x.shape[0]
    out_arr = np.zeros((n_x, K), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    cdef Py_ssize_t u, j, k, m
    cdef double sr, si, cr, ci, xr, xi
    with nogil:
        for j in range(n_x):
            for u in range(n_c):
                if u + j >= n_x:
                    break
                for k in range(K):
                    sr = 0.0
                    si = 0.0
                    for m in range(M):
                        # conj(c) * x
                        cr = c[u, k, m].real
                        ci = c[u, k, m].imag
                        xr = x[u + j, m].real
                        xi = x[u + j, m].imag
                        sr = sr + cr * xr + ci * xi
                        si = si + cr * xi - ci * xr
                    out[j, k].real = out[j, k].real + sr
                    out[j, k].imag = out[j, k].imag + si
    return out_arr


def inverse_recursion(const cplx[:, :, ::1] d, const cplx[:, ::1] b0, Py_ssize_t n_b):
    cdef Py_ssize_t n_d = d.shape[0], K = d.shape[1]
    b_arr = np.zeros((n_b, K, K), dtype=np.complex128)
    acc_arr = np.zeros((K, K), dtype=np.complex128)
    cdef cplx[:, :, ::1] b = b_arr
    cdef cplx[:, ::1] acc = acc_arr
    cdef Py_ssize_t n, u, lo, i, j, r
    cdef double sr, si, pr, pi, qr, qi
    with nogil:
        for i in range(K):
            for j in range(K):
                b[0, i, j] = b0[i, j]
        for n in range(1, n_b):
            lo = n - n_d + 1
            if lo < 0:
                lo = 0
            for i in range(K):
                for j in range(K):
                    sr = 0.0
                    si = 0.0
                    for u in range(lo, n):
                        for r in range(K):
                            pr = b[u, i, r].real
                            pi = b[u, i, r].imag
                            qr = d[n - u, r, j].real
                            qi = d[n - u, r, j].imag
                            sr = sr + pr * qr - pi * qi
                            si = si + pr * qi + pi * qr
                    acc[i, j].real = sr
                    acc[i, j].imag = si
            for i in range(K):
                for j in range(K):
                    sr = 0.0
                    si = 0.0
                    for r in range(K):
                        pr = acc[i, r].real
                        pi = acc[i, r].imag
                        qr = b0[r, j].real
                        qi = b0[r, j].imag
                        sr = sr - (pr * qr - pi * qi)
                        si = si - (pr * qi + pi * qr)
                    b[n, i, j].real = sr
                    b[n, i, j].imag = si
    return b_arr


def ma_filter(const cplx[:, :, ::1] c, const cplx[:, :, ::1] eps, Py_ssize_t n_out):
    cdef Py_ssize_t n_c = c.shape[0], K = c.shape[1], M = c.shape[2]
    cdef Py_ssize_t P = eps.shape[0]
    out_arr = np.zeros((P, n_out, K), dtype=np.complex128)
    cdef cplx[:, :, ::1] out = out_arr
    cdef Py_ssize_t p, t, u, k, m
    cdef double sr, si, cr, ci, er, ei
    with nogil:
        for p in range(P):
            for t in range(n_out):
                for k in range(K):
                    sr = 0.0
                    si = 0.0
                    for u in range(n_c):
                        for m in range(M):
                            cr = c[u, k, m].real
                            ci = c[u, k, m].imag
                            er = eps[p, t + n_c - 1 - u, m].real
                            ei = eps[p, t + n_c - 1 - u, m].imag
                            sr = sr + cr * er - ci * ei
                            si = si + cr * ei + ci * er
                    out[p, t, k].real = sr
                    out[p, t, k].imag = si
    return out_arr
