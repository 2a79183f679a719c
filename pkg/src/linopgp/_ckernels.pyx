# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the functions in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()


cdef inline double _hermite_deriv(double tau, double w, int k) nogil:
    cdef double sw = sqrt(w)
    cdef double s = sw * tau
    cdef double he_prev = 1.0
    cdef double he = s if k >= 1 else 1.0
    cdef double tmp, scale = 1.0
    cdef int j
    for j in range(1, k):
        tmp = s * he - j * he_prev
        he_prev = he
        he = tmp
    for j in range(k):
        scale *= -sw
    return scale * he * exp(-0.5 * s * s)


def hermite_deriv(tau, double w, int k):
    cdef cnp.ndarray[double, ndim=1] t = np.ascontiguousarray(tau, dtype=float).ravel()
    cdef cnp.ndarray[double, ndim=1] out = np.empty(t.shape[0])
    cdef Py_ssize_t i
    for i in range(t.shape[0]):
        out[i] = _hermite_deriv(t[i], w, k)
    return out.reshape(np.shape(tau))


def deriv_product(A, B, w, lord, rord):
    cdef double[:, ::1] a = np.ascontiguousarray(A, dtype=float)
    cdef double[:, ::1] b = np.ascontiguousarray(B, dtype=float)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=float)
    cdef long[::1] lo = np.ascontiguousarray(lord, dtype=np.int64)
    cdef long[::1] ro = np.ascontiguousarray(rord, dtype=np.int64)
    cdef Py_ssize_t P = a.shape[0], D = a.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(P)
    cdef double[::1] o = out
    cdef Py_ssize_t i, d
    cdef int j, k
    cdef double expo, poly, s, sw, he, he_prev, tmp, tau
    with nogil:
        for i in range(P):
            # one exp per pair: the Gaussian factors of all active dims combine
            expo = 0.0
            poly = 1.0
            for d in range(D):
                if lo[d] < 0 or ro[d] < 0:
                    continue
                tau = a[i, d] - b[i, d]
                expo += wv[d] * tau * tau
                k = <int>(lo[d] + ro[d])
                if k == 0:
                    continue
                sw = sqrt(wv[d])
                s = sw * tau
                he_prev = 1.0
                he = s
                for j in range(1, k):
                    tmp = s * he - j * he_prev
                    he_prev = he
                    he = tmp
                for j in range(k):
                    he *= -sw
                if ro[d] % 2:
                    he = -he
                poly *= he
            o[i] = poly * exp(-0.5 * expo)
    return out


cdef extern from "_spectral.h" nogil:
    void spectral_row(const double *om, Py_ssize_t N, double x, const double *cw,
                      const double *sw, Py_ssize_t M, double *cs, double *sn, double *out)


def spectral_sum(tau, omega, cw, sw):
    cdef double[::1] t = np.ascontiguousarray(tau, dtype=float).ravel()
    cdef double[::1] om = np.ascontiguousarray(omega, dtype=float)
    one_d = np.ndim(cw) == 1
    # weights stored (M, N) so each weight set is a contiguous row
    cdef double[:, ::1] c = np.ascontiguousarray(np.reshape(cw, (om.shape[0], -1)).T, dtype=float)
    cdef double[:, ::1] s = np.ascontiguousarray(np.reshape(sw, (om.shape[0], -1)).T, dtype=float)
    cdef Py_ssize_t P = t.shape[0], N = om.shape[0], M = c.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.zeros((P, M))
    cdef double[:, ::1] o = out
    cdef double[::1] cs = np.empty(max(N, 1))
    cdef double[::1] sn = np.empty(max(N, 1))
    cdef Py_ssize_t i
    if N == 0 or P == 0:
        return out[:, 0] if one_d else out
    with nogil:
        for i in range(P):
            spectral_row(&om[0], N, t[i], &c[0, 0], &s[0, 0], M, &cs[0], &sn[0], &o[i, 0])
    return out[:, 0] if one_d else out
