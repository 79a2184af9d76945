# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled fused inference kernels: dense MLP chains without numpy dispatch.

Matches bearnet._kernels_fallback operation for operation; BLAS dgemm does the
matrix products and the bias add + activation are fused into one pass.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

BACKEND = "compiled"

cdef enum:
    _SILU = 0
    _TANH = 1
    _RELU = 2

ACT_SILU = _SILU
ACT_TANH = _TANH
ACT_RELU = _RELU

cnp.import_array()


cdef void _gemm(double[:, ::1] x, double[:, ::1] w, double[:, ::1] out) noexcept nogil:
    # C-order C = X @ W via Fortran-order C^T = W^T @ X^T.
    cdef int n = <int> x.shape[0]
    cdef int k = <int> x.shape[1]
    cdef int m = <int> w.shape[1]
    cdef double one = 1.0, zero = 0.0
    if n == 0:
        return
    dgemm("N", "N", &m, &n, &k, &one, &w[0, 0], &m, &x[0, 0], &k,
          &zero, &out[0, 0], &m)


cdef void _bias_act(double[:, ::1] h, double[::1] b, int act) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double v, s
    for i in range(h.shape[0]):
        for j in range(h.shape[1]):
            v = h[i, j] + b[j]
            if act == _SILU:
                s = 1.0 / (1.0 + exp(-v))
                v = v * s
            elif act == _TANH:
                v = tanh(v)
            elif act == _RELU:
                v = v if v > 0.0 else 0.0
            h[i, j] = v


cdef void _bias_only(double[:, ::1] h, double[::1] b) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(h.shape[0]):
        for j in range(h.shape[1]):
            h[i, j] = h[i, j] + b[j]


# Below this many elements the fused scalar loop beats numpy's vectorized
# transcendentals (whose SIMD advantage needs volume to amortize dispatch).
cdef enum:
    _SCALAR_CUTOFF = 1024


cdef _vector_act(object arr, double[::1] b, int act):
    # In-place bias + activation with numpy's SIMD kernels; one temporary.
    arr += np.asarray(b)
    if act == _SILU:
        t = np.exp(-arr)
        t += 1.0
        np.reciprocal(t, out=t)
        arr *= t
    elif act == _TANH:
        np.tanh(arr, out=arr)
    elif act == _RELU:
        np.maximum(arr, 0.0, out=arr)


def fused_mlp(x, weights, biases, int act):
    """Forward pass of a dense MLP: activation after every layer but the last."""
    if act not in (ACT_SILU, ACT_TANH, ACT_RELU):
        raise ValueError(f"unknown activation code {act}")
    cdef double[:, ::1] h = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] w
    cdef double[::1] b
    cdef double[:, ::1] out
    cdef int last = len(weights) - 1
    cdef int i
    result = np.asarray(h)
    for i in range(len(weights)):
        w = np.ascontiguousarray(weights[i], dtype=np.float64)
        b = np.ascontiguousarray(biases[i], dtype=np.float64)
        result = np.empty((h.shape[0], w.shape[1]), dtype=np.float64)
        out = result
        _gemm(h, w, out)
        if i == last:
            _bias_only(out, b)
        elif out.shape[0] * out.shape[1] <= _SCALAR_CUTOFF:
            _bias_act(out, b, act)
        else:
            _vector_act(result, b, act)
        h = out
    return result
