# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Dyson prefix recurrence.

Same contract as ``_dyson_py.dyson_terms``.  Matrix products go straight to
BLAS ``zgemm``; row-major operands are handled by swapping the factors
(``C = A B`` row-major is ``C^T = B^T A^T`` column-major).
"""

import numpy as np
from libc.math cimport cos, sin
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport zgemm

cdef enum:
    MODE_STRICT = 0
    MODE_WEIGHTED = 1


cdef inline void _gemm(int n, double complex alpha, double complex* a, double complex* b,
                       double complex beta, double complex* c) noexcept nogil:
    # row-major c = alpha * a @ b + beta * c
    cdef char no = b'N'
    zgemm(&no, &no, &n, &n, &n, &alpha, b, &n, a, &n, &beta, c, &n)


def dyson_terms(v, d, double delta, int m_steps, int k_max, int mode):
    cdef const double complex[:, ::1] vv = np.ascontiguousarray(v, dtype=np.complex128)
    cdef const double[::1] dd = np.ascontiguousarray(d, dtype=np.float64)
    cdef int dim = vv.shape[0]
    out_arr = np.zeros((k_max + 1, dim, dim), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    cdef double complex[:, ::1] w = np.empty((dim, dim), dtype=np.complex128)
    cdef double complex[:, ::1] acc = np.empty((dim, dim), dtype=np.complex128)
    cdef double complex[:, ::1] tmp = np.empty((dim, dim), dtype=np.complex128)
    cdef double complex[::1] ph = np.empty(dim, dtype=np.complex128)
    cdef double complex minus_i_delta = -1j * delta
    cdef double complex one = 1.0
    cdef double complex scale
    cdef double complex* swap_ptr
    cdef double complex* acc_p
    cdef double complex* tmp_p
    cdef Py_ssize_t i, j
    cdef int m, k, n
    cdef double s
    cdef size_t nbytes = <size_t>dim * dim * sizeof(double complex)

    for i in range(dim):
        out[0, i, i] = 1.0

    with nogil:
        for m in range(m_steps):
            s = m * delta
            for i in range(dim):
                ph[i] = cos(dd[i] * s) + 1j * sin(dd[i] * s)
            for i in range(dim):
                for j in range(dim):
                    w[i, j] = minus_i_delta * ph[i] * ph[j].conjugate() * vv[i, j]
            for k in range(k_max, 0, -1):
                if mode == MODE_STRICT:
                    _gemm(dim, one, &w[0, 0], &out[k - 1, 0, 0], one, &out[k, 0, 0])
                    continue
                acc_p = &acc[0, 0]
                tmp_p = &tmp[0, 0]
                memcpy(acc_p, &out[0, 0, 0], nbytes)
                for n in range(k, 1, -1):
                    scale = (1.0 / n) if mode == MODE_WEIGHTED else 1.0
                    memcpy(tmp_p, &out[k - n + 1, 0, 0], nbytes)
                    _gemm(dim, scale, &w[0, 0], acc_p, one, tmp_p)
                    swap_ptr = acc_p
                    acc_p = tmp_p
                    tmp_p = swap_ptr
                _gemm(dim, one, &w[0, 0], acc_p, one, &out[k, 0, 0])
    return out_arr
