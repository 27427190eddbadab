"""Pure-numpy scan kernels.

Mirror of the compiled backend in ``_kernels.pyx``; used when the
extension is unavailable or when ``NOISELIB_KERNELS=py`` forces it.
Scoring accumulates in float64 (or float32 for the screen pass) exactly
like the compiled path, so both backends select identical rows.
"""

import numpy as np

NAME = "python"

KTH_BUFFER_LIMIT = 1024

# Chunk size for full-matrix scans; bounds the float64 temporaries to a
# few dozen MB regardless of library size.
_CHUNK = 8192


def screen_scores(mat16, q):
    if mat16.dtype != np.float16:
        raise ValueError("screen matrix must be float16")
    n, d = mat16.shape
    if q.shape[0] != d:
        raise ValueError("query length does not match matrix width")
    q32 = np.ascontiguousarray(q, dtype=np.float32)
    out = np.empty(n, dtype=np.float32)
    for start in range(0, n, _CHUNK):
        block = mat16[start:start + _CHUNK].astype(np.float32)
        out[start:start + _CHUNK] = block @ q32
    return out


def kth_largest(scores, k):
    n = scores.shape[0]
    if k < 1 or k > n or k > KTH_BUFFER_LIMIT:
        raise ValueError("k out of range")
    return float(np.partition(scores, n - k)[n - k])


def gather_ge(scores, threshold):
    return np.flatnonzero(scores >= np.float32(threshold)).astype(np.int64)


def rescore_dot(mat, q, idx):
    if q.shape[0] != mat.shape[1]:
        raise ValueError("query length does not match matrix width")
    if idx.shape[0] == 0:
        return np.empty(0, dtype=np.float64)
    return mat[idx].astype(np.float64) @ q


def dist_scan(mat, q, mode):
    if mode not in (0, 1, 2, 3):
        raise ValueError("unknown scan mode")
    if mat.dtype not in (np.float32, np.float64):
        raise ValueError("matrix must be float32 or float64")
    n, d = mat.shape
    if q.shape[0] != d:
        raise ValueError("query length does not match matrix width")
    out = np.empty(n, dtype=np.float64)
    for start in range(0, n, _CHUNK):
        block = mat[start:start + _CHUNK].astype(np.float64)
        if mode == 0:
            out[start:start + _CHUNK] = block @ q
        elif mode == 1:
            diff = block - q
            out[start:start + _CHUNK] = -np.einsum("ij,ij->i", diff, diff) / d
        elif mode == 2:
            diff = block - q
            out[start:start + _CHUNK] = -np.sqrt(
                np.einsum("ij,ij->i", diff, diff))
        else:
            out[start:start + _CHUNK] = -np.abs(block - q).mean(axis=1)
    return out


def argmax(scores):
    if scores.shape[0] == 0:
        raise ValueError("argmax of empty scores")
    return int(np.argmax(scores))
