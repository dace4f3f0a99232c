# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation of a flattened Wick term list."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def wick_terms(const double[::1] coef, const long[:, ::1] pos, const double[:, ::1] zflat):
    """out[b] = sum_t coef[t] * prod_u zflat[b, pos[t, u]].

    Rows of ``zflat`` end with a 1.0 slot so short products can be padded.
    """
    return wick_terms_t(coef, pos, np.ascontiguousarray(np.asarray(zflat).T))


def wick_terms_t(const double[::1] coef, const long[:, ::1] pos, const double[:, ::1] zt):
    """Same sum with the batch along the fast axis: ``zt[slot, b]``.

    Terms are the outer loop so the inner loop runs over contiguous memory.
    """
    cdef Py_ssize_t B = zt.shape[1]
    cdef Py_ssize_t T = coef.shape[0]
    cdef Py_ssize_t k = pos.shape[1]
    cdef Py_ssize_t b, t, u
    cdef double c
    cdef const double* r0
    cdef const double* r1
    cdef const double* r2
    cdef const double* r3
    cdef const double* r4
    out = np.zeros(B, dtype=np.float64)
    cdef double[::1] res = out
    cdef double* acc = &res[0] if B > 0 else NULL
    if B == 0:
        return out
    with nogil:
        for t in range(T):
            c = coef[t]
            if k == 1:
                r0 = &zt[pos[t, 0], 0]
                for b in range(B):
                    acc[b] += c * r0[b]
            elif k == 2:
                r0 = &zt[pos[t, 0], 0]
                r1 = &zt[pos[t, 1], 0]
                for b in range(B):
                    acc[b] += c * r0[b] * r1[b]
            elif k == 3:
                r0 = &zt[pos[t, 0], 0]
                r1 = &zt[pos[t, 1], 0]
                r2 = &zt[pos[t, 2], 0]
                for b in range(B):
                    acc[b] += c * r0[b] * r1[b] * r2[b]
            elif k == 4:
                r0 = &zt[pos[t, 0], 0]
                r1 = &zt[pos[t, 1], 0]
                r2 = &zt[pos[t, 2], 0]
                r3 = &zt[pos[t, 3], 0]
                for b in range(B):
                    acc[b] += c * r0[b] * r1[b] * r2[b] * r3[b]
            else:
                r0 = &zt[pos[t, 0], 0]
                r1 = &zt[pos[t, 1], 0]
                r2 = &zt[pos[t, 2], 0]
                r3 = &zt[pos[t, 3], 0]
                r4 = &zt[pos[t, 4], 0]
                for b in range(B):
                    acc[b] += c * r0[b] * r1[b] * r2[b] * r3[b] * r4[b]
    return out
