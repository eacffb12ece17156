# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte Carlo accumulation kernel.

Same contract as frameport._kernels._fallback.conj_superop_sums.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def conj_superop_sums(mats, buckets, Py_ssize_t n_buckets):
    """Accumulate kron(conj(W), W) per bucket; returns (sums, counts)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] w = \
        np.ascontiguousarray(mats, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] b = \
        np.ascontiguousarray(buckets, dtype=np.int64)
    cdef Py_ssize_t n = w.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] sums = \
        np.zeros((n_buckets, 4, 4), dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = \
        np.zeros(n_buckets, dtype=np.int64)
    cdef Py_ssize_t i, a, c, col1, col2
    cdef Py_ssize_t bucket
    cdef double complex conj_ab, val
    for i in range(n):
        bucket = b[i]
        counts[bucket] += 1
        for a in range(2):
            for col1 in range(2):
                conj_ab = w[i, a, col1].conjugate()
                for c in range(2):
                    for col2 in range(2):
                        sums[bucket, 2 * a + c, 2 * col1 + col2] += \
                            conj_ab * w[i, c, col2]
    return sums, counts
