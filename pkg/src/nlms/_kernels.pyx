# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise kernels.

Every routine mirrors a function of ``_kernels_py`` and accepts arrays of any
shape; inputs are flattened to contiguous buffers.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, pow, cos, sin

cnp.import_array()

from .parallel import num_threads


def power_nonlinearity(u, double gamma):
    cdef double complex[::1] uf = np.ascontiguousarray(u, dtype=np.complex128).ravel()
    out = np.empty(uf.shape[0], dtype=np.complex128)
    cdef double complex[::1] of = out
    cdef Py_ssize_t i, n = uf.shape[0]
    cdef double a, w, e = 0.5 * (gamma - 1.0)
    cdef int nt = num_threads()
    for i in prange(n, nogil=True, num_threads=nt, schedule="static"):
        a = uf[i].real * uf[i].real + uf[i].imag * uf[i].imag
        w = pow(a, e) if a > 0 else 0.0
        of[i] = w * uf[i]
    return out.reshape(np.shape(u))


def abs_power(u, double p):
    cdef double complex[::1] uf = np.ascontiguousarray(u, dtype=np.complex128).ravel()
    out = np.empty(uf.shape[0], dtype=np.float64)
    cdef double[::1] of = out
    cdef Py_ssize_t i, n = uf.shape[0]
    cdef double a, e = 0.5 * p
    cdef int nt = num_threads()
    for i in prange(n, nogil=True, num_threads=nt, schedule="static"):
        a = uf[i].real * uf[i].real + uf[i].imag * uf[i].imag
        if a > 0:
            of[i] = pow(a, e)
        elif p == 0:
            of[i] = 1.0
        else:
            of[i] = 0.0
    return out.reshape(np.shape(u))


def phase_rotate(u, V, double dt):
    cdef double complex[::1] uf = np.ascontiguousarray(u, dtype=np.complex128).ravel()
    cdef double[::1] vf = np.ascontiguousarray(V, dtype=np.float64).ravel()
    out = np.empty(uf.shape[0], dtype=np.complex128)
    cdef double complex[::1] of = out
    cdef Py_ssize_t i, n = uf.shape[0]
    cdef double c, s, th
    cdef int nt = num_threads()
    for i in prange(n, nogil=True, num_threads=nt, schedule="static"):
        th = dt * vf[i]
        c = cos(th)
        s = sin(th)
        of[i].real = c * uf[i].real + s * uf[i].imag
        of[i].imag = c * uf[i].imag - s * uf[i].real
    return out.reshape(np.shape(u))


def current(u, du, A):
    shape = np.shape(A)
    cdef double complex[::1] uf = np.ascontiguousarray(u, dtype=np.complex128).ravel()
    cdef double complex[:, ::1] df = np.ascontiguousarray(du, dtype=np.complex128).reshape(3, -1)
    cdef double[:, ::1] af = np.ascontiguousarray(A, dtype=np.float64).reshape(3, -1)
    out = np.empty((3, uf.shape[0]), dtype=np.float64)
    cdef double[:, ::1] of = out
    cdef Py_ssize_t i, j, n = uf.shape[0]
    cdef double rho, ur, ui
    cdef int nt = num_threads()
    for i in prange(n, nogil=True, num_threads=nt, schedule="static"):
        ur = uf[i].real
        ui = uf[i].imag
        rho = ur * ur + ui * ui
        for j in range(3):
            # Im(conj(u) du) = ur*Im(du) - ui*Re(du)
            of[j, i] = 2.0 * (ur * df[j, i].imag - ui * df[j, i].real) - 2.0 * af[j, i] * rho
    return out.reshape(shape)


def magnetic_grad_sq(u, du, A):
    cdef double complex[::1] uf = np.ascontiguousarray(u, dtype=np.complex128).ravel()
    cdef double complex[:, ::1] df = np.ascontiguousarray(du, dtype=np.complex128).reshape(3, -1)
    cdef double[:, ::1] af = np.ascontiguousarray(A, dtype=np.float64).reshape(3, -1)
    out = np.empty(uf.shape[0], dtype=np.float64)
    cdef double[::1] of = out
    cdef Py_ssize_t i, j, n = uf.shape[0]
    cdef double acc, gr, gi
    cdef int nt = num_threads()
    for i in prange(n, nogil=True, num_threads=nt, schedule="static"):
        acc = 0.0
        for j in range(3):
            # du - i A u
            gr = df[j, i].real + af[j, i] * uf[i].imag
            gi = df[j, i].imag - af[j, i] * uf[i].real
            acc = acc + gr * gr + gi * gi
        of[i] = acc
    return out.reshape(np.shape(u))


def abs_rate(u, ut, double floor):
    cdef double complex[::1] uf = np.ascontiguousarray(u, dtype=np.complex128).ravel()
    cdef double complex[::1] tf = np.ascontiguousarray(ut, dtype=np.complex128).ravel()
    out = np.empty(uf.shape[0], dtype=np.float64)
    cdef double[::1] of = out
    cdef Py_ssize_t i, n = uf.shape[0]
    cdef double a
    cdef int nt = num_threads()
    for i in prange(n, nogil=True, num_threads=nt, schedule="static"):
        a = sqrt(uf[i].real * uf[i].real + uf[i].imag * uf[i].imag)
        if a > floor:
            of[i] = (uf[i].real * tf[i].real + uf[i].imag * tf[i].imag) / a
        else:
            of[i] = 0.0
    return out.reshape(np.shape(u))
