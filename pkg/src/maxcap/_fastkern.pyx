# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: O(n^2) log-kernel assembly and batched sums."""

import numpy as np

cimport numpy as cnp
from libc.math cimport log, sqrt

cnp.import_array()


def log_kernel_matrix(
    cnp.ndarray[cnp.complex128_t, ndim=1] nodes,
    cnp.ndarray[cnp.float64_t, ndim=1] gaps,
):
    """K_kl = -log|z_k - z_l| off the diagonal, cell self-energy on it."""
    cdef Py_ssize_t n = nodes.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, n))
    cdef Py_ssize_t i, j
    cdef double dx, dy, v
    for i in range(n):
        out[i, i] = 1.5 - log(gaps[i])
        for j in range(i + 1, n):
            dx = nodes[i].real - nodes[j].real
            dy = nodes[i].imag - nodes[j].imag
            v = -0.5 * log(dx * dx + dy * dy)
            out[i, j] = v
            out[j, i] = v
    return out


def potential_many(
    cnp.ndarray[cnp.complex128_t, ndim=1] nodes,
    cnp.ndarray[cnp.float64_t, ndim=1] weights,
    cnp.ndarray[cnp.complex128_t, ndim=1] targets,
):
    """U(t) = sum_k w_k log 1/|z_k - t|; +inf where a target hits a node."""
    cdef Py_ssize_t n = nodes.shape[0]
    cdef Py_ssize_t m = targets.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(m)
    cdef Py_ssize_t i, k
    cdef double dx, dy, d2, acc
    cdef double inf = np.inf
    for i in range(m):
        acc = 0.0
        for k in range(n):
            dx = nodes[k].real - targets[i].real
            dy = nodes[k].imag - targets[i].imag
            d2 = dx * dx + dy * dy
            if d2 == 0.0:
                acc = inf
                break
            acc -= 0.5 * weights[k] * log(d2)
        out[i] = acc
    return out


def cauchy_many(
    cnp.ndarray[cnp.complex128_t, ndim=1] nodes,
    cnp.ndarray[cnp.float64_t, ndim=1] weights,
    cnp.ndarray[cnp.complex128_t, ndim=1] targets,
):
    """C(t) = sum_k w_k / (z_k - t)."""
    cdef Py_ssize_t n = nodes.shape[0]
    cdef Py_ssize_t m = targets.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.zeros(m, dtype=np.complex128)
    cdef Py_ssize_t i, k
    cdef double dx, dy, d2
    cdef double re, im
    for i in range(m):
        re = 0.0
        im = 0.0
        for k in range(n):
            dx = nodes[k].real - targets[i].real
            dy = nodes[k].imag - targets[i].imag
            d2 = dx * dx + dy * dy
            re += weights[k] * dx / d2
            im -= weights[k] * dy / d2
        out[i].real = re
        out[i].imag = im
    return out


def quotient_double_sum(
    cnp.ndarray[cnp.complex128_t, ndim=1] nodes,
    cnp.ndarray[cnp.float64_t, ndim=1] weights,
    cnp.ndarray[cnp.complex128_t, ndim=1] hvals,
    cnp.ndarray[cnp.complex128_t, ndim=1] hdiag,
):
    """sum_{k,l} w_k w_l K(z_k, z_l) with K(x,y) = (h(x)-h(y))/(x-y) and the
    supplied continuous extension on the diagonal."""
    cdef Py_ssize_t n = nodes.shape[0]
    cdef Py_ssize_t k, l
    cdef double re = 0.0, im = 0.0
    cdef double dzr, dzi, dhr, dhi, d2, qr, qi, w2
    for k in range(n):
        re += weights[k] * weights[k] * hdiag[k].real
        im += weights[k] * weights[k] * hdiag[k].imag
        for l in range(k + 1, n):
            dzr = nodes[k].real - nodes[l].real
            dzi = nodes[k].imag - nodes[l].imag
            dhr = hvals[k].real - hvals[l].real
            dhi = hvals[k].imag - hvals[l].imag
            d2 = dzr * dzr + dzi * dzi
            qr = (dhr * dzr + dhi * dzi) / d2
            qi = (dhi * dzr - dhr * dzi) / d2
            w2 = 2.0 * weights[k] * weights[l]
            re += w2 * qr
            im += w2 * qi
    return complex(re, im)
