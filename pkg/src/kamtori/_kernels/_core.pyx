# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled divisor-scan kernels; semantics match _ref exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, pow, sqrt


def min_divisor_ratio_batch(double[:, ::1] kvecs, double[::1] kpow,
                            double[:, ::1] omegas, double[:, ::1] mre,
                            double[:, ::1] mim):
    cdef Py_ssize_t Nk = kvecs.shape[0]
    cdef Py_ssize_t n = kvecs.shape[1]
    cdef Py_ssize_t Ns = omegas.shape[0]
    cdef Py_ssize_t Nm = mre.shape[1]
    ratio_arr = np.full(Ns, np.inf)
    argk_arr = np.zeros(Ns, dtype=np.int64)
    argm_arr = np.zeros(Ns, dtype=np.int64)
    cdef double[::1] ratio = ratio_arr
    cdef long long[::1] argk = argk_arr
    cdef long long[::1] argm = argm_arr
    cdef Py_ssize_t s, i, j, m, bi, bm
    cdef double t, re, im, r, best
    if Nk == 0:
        return ratio_arr, argk_arr, argm_arr
    with nogil:
        for s in range(Ns):
            best = INFINITY
            bi = 0
            bm = 0
            for i in range(Nk):
                t = 0.0
                for j in range(n):
                    t += kvecs[i, j] * omegas[s, j]
                for m in range(Nm):
                    re = mre[s, m]
                    im = t + mim[s, m]
                    r = sqrt(re * re + im * im) * kpow[i]
                    if r < best:
                        best = r
                        bi = i
                        bm = m
            ratio[s] = best
            argk[s] = bi
            argm[s] = bm
    return ratio_arr, argk_arr, argm_arr


def divisor_sum_reduce(double[::1] kdotw, double[::1] weights,
                       double[::1] hyp_pow, double lam, double b):
    cdef Py_ssize_t Nk = kdotw.shape[0]
    cdef double total = 0.0
    cdef double gamma_emp = INFINITY
    cdef double min_abs = INFINITY
    cdef double a0, a1, a, g
    cdef Py_ssize_t i
    cdef int bi = <int> b if b == <int> b else -1
    with nogil:
        for i in range(Nk):
            a0 = fabs(kdotw[i])
            a1 = fabs(kdotw[i] + lam)
            if a1 > 0.0:
                if bi == 1:
                    total += weights[i] / a1
                elif bi == 2:
                    total += weights[i] / (a1 * a1)
                else:
                    total += weights[i] * pow(a1, -b)
            else:
                total = INFINITY
            a = a0 if a0 < a1 else a1
            g = a * hyp_pow[i]
            if g < gamma_emp:
                gamma_emp = g
            if a < min_abs:
                min_abs = a
    return total, gamma_emp, min_abs
