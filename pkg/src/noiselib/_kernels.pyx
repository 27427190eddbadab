# cython: language_level=3
# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled scan kernels.

Thin typed wrappers over the C routines in ``_scanops.c``; the numpy
fallback in ``_kernels_py`` exposes the same call surface.
"""

import numpy as np

from libc.stdint cimport uint16_t, int64_t
from libc.stddef cimport ptrdiff_t

cdef extern from "_scanops.h":
    void nl_screen_f16(const uint16_t *mat16, const float *q, float *out,
                       ptrdiff_t n, ptrdiff_t d) nogil
    float nl_kth_largest_f32(const float *s, ptrdiff_t n, int k) nogil
    ptrdiff_t nl_gather_ge_f32(const float *s, ptrdiff_t n, float thr,
                               int64_t *out_idx) nogil
    void nl_rescore_dot(const float *mat, const double *q, const int64_t *idx,
                        double *out, ptrdiff_t m, ptrdiff_t d) nogil
    void nl_dist_scan_f32(const float *mat, const double *q, double *out,
                          ptrdiff_t n, ptrdiff_t d, int mode) nogil
    void nl_dist_scan_f64(const double *mat, const double *q, double *out,
                          ptrdiff_t n, ptrdiff_t d, int mode) nogil
    ptrdiff_t nl_argmax_f64(const double *s, ptrdiff_t n) nogil

NAME = "c"

KTH_BUFFER_LIMIT = 1024


def screen_scores(mat16, const float[::1] q not None):
    """Approximate dot products against a float16 matrix.

    Accumulates in float32; callers are expected to re-score rows near
    the selection boundary exactly.
    """
    if mat16.dtype != np.float16:
        raise ValueError("screen matrix must be float16")
    cdef const uint16_t[:, ::1] m = mat16.view(np.uint16)
    cdef Py_ssize_t n = m.shape[0]
    cdef Py_ssize_t d = m.shape[1]
    if q.shape[0] != d:
        raise ValueError("query length does not match matrix width")
    out = np.empty(n, dtype=np.float32)
    cdef float[::1] ov = out
    if n == 0:
        return out
    with nogil:
        nl_screen_f16(&m[0, 0], &q[0], &ov[0], n, d)
    return out


def kth_largest(const float[::1] scores not None, int k):
    """Value of the k-th largest score (duplicates counted)."""
    cdef Py_ssize_t n = scores.shape[0]
    if k < 1 or k > n or k > KTH_BUFFER_LIMIT:
        raise ValueError("k out of range")
    cdef float v
    with nogil:
        v = nl_kth_largest_f32(&scores[0], n, k)
    return float(v)


def gather_ge(const float[::1] scores not None, float threshold):
    """Indices (int64, ascending) of scores >= threshold."""
    cdef Py_ssize_t n = scores.shape[0]
    idx = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] iv = idx
    cdef Py_ssize_t m = 0
    if n:
        with nogil:
            m = nl_gather_ge_f32(&scores[0], n, threshold, &iv[0])
    return idx[:m].copy()


def rescore_dot(const float[:, ::1] mat not None,
                const double[::1] q not None,
                const int64_t[::1] idx not None):
    """Exact float64 dot products for the selected rows."""
    cdef Py_ssize_t d = mat.shape[1]
    cdef Py_ssize_t m = idx.shape[0]
    if q.shape[0] != d:
        raise ValueError("query length does not match matrix width")
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] ov = out
    if m == 0:
        return out
    with nogil:
        nl_rescore_dot(&mat[0, 0], &q[0], &idx[0], &ov[0], m, d)
    return out


def dist_scan(mat, const double[::1] q not None, int mode):
    """Score every row of ``mat`` against ``q`` with float64 accumulation.

    Modes: 0 dot, 1 negated mean squared difference, 2 negated euclidean
    distance, 3 negated mean absolute difference.
    """
    if mode < 0 or mode > 3:
        raise ValueError("unknown scan mode")
    cdef const float[:, ::1] m32
    cdef const double[:, ::1] m64
    cdef Py_ssize_t n, d
    cdef double[::1] ov
    if mat.dtype == np.float32:
        m32 = mat
        n = m32.shape[0]
        d = m32.shape[1]
        if q.shape[0] != d:
            raise ValueError("query length does not match matrix width")
        out = np.empty(n, dtype=np.float64)
        ov = out
        if n:
            with nogil:
                nl_dist_scan_f32(&m32[0, 0], &q[0], &ov[0], n, d, mode)
        return out
    if mat.dtype == np.float64:
        m64 = mat
        n = m64.shape[0]
        d = m64.shape[1]
        if q.shape[0] != d:
            raise ValueError("query length does not match matrix width")
        out = np.empty(n, dtype=np.float64)
        ov = out
        if n:
            with nogil:
                nl_dist_scan_f64(&m64[0, 0], &q[0], &ov[0], n, d, mode)
        return out
    raise ValueError("matrix must be float32 or float64")


def argmax(const double[::1] scores not None):
    """Index of the largest score (first occurrence on ties)."""
    cdef Py_ssize_t n = scores.shape[0]
    if n == 0:
        raise ValueError("argmax of empty scores")
    cdef Py_ssize_t best
    with nogil:
        best = nl_argmax_f64(&scores[0], n)
    return int(best)
