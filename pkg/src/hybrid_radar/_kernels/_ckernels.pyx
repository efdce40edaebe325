# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels; same contracts as ``_fallback``.

Complex data is viewed as interleaved doubles so the loops stay in plain
real arithmetic.
"""

import numpy as np
cimport cython


def quad_forms(X, mats):
    Xc = np.ascontiguousarray(np.atleast_2d(X), dtype=np.complex128)
    Ac = np.ascontiguousarray(mats, dtype=np.complex128)
    if Ac.ndim != 3 or Ac.shape[1] != Xc.shape[1] or Ac.shape[2] != Xc.shape[1]:
        raise ValueError("matrix stack does not match vector length")
    cdef Py_ssize_t Q = Xc.shape[0], N = Xc.shape[1], m = Ac.shape[0]
    cdef Py_ssize_t L = N * (N + 1) // 2
    cdef double[:, :, ::1] a = Ac.view(np.float64)
    cdef double[:, ::1] x = Xc.view(np.float64)
    cdef double[:, ::1] pr = np.empty((m, L))
    cdef double[:, ::1] pi = np.empty((m, L))
    cdef double[::1] er = np.empty(L)
    cdef double[::1] ei = np.empty(L)
    out = np.empty((Q, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t q, k, i, j, l
    cdef double xr, xi, yr, yi, acc, wt
    with nogil:
        # packed upper triangles; off-diagonal entries carry the factor 2 of A_ij + A_ji
        for k in range(m):
            l = 0
            for i in range(N):
                for j in range(i, N):
                    wt = 1.0 if i == j else 2.0
                    pr[k, l] = wt * a[k, i, 2 * j]
                    pi[k, l] = wt * a[k, i, 2 * j + 1]
                    l = l + 1
        for q in range(Q):
            # conj(x_i) x_j on the upper triangle
            l = 0
            for i in range(N):
                xr = x[q, 2 * i]
                xi = x[q, 2 * i + 1]
                for j in range(i, N):
                    yr = x[q, 2 * j]
                    yi = x[q, 2 * j + 1]
                    er[l] = xr * yr + xi * yi
                    ei[l] = xr * yi - xi * yr
                    l = l + 1
            for k in range(m):
                # Re(A_ij e_ij) summed
                acc = 0.0
                for l in range(L):
                    acc = acc + pr[k, l] * er[l] - pi[k, l] * ei[l]
                o[q, k] = acc
    return out


def energy_statistic(Y, F):
    Yc = np.ascontiguousarray(np.atleast_2d(Y), dtype=np.complex128)
    Fc = np.ascontiguousarray(np.atleast_2d(F), dtype=np.complex128)
    if Fc.shape[1] != Yc.shape[1]:
        raise ValueError("filter length does not match observation length")
    cdef double[:, ::1] y = Yc.view(np.float64)
    cdef double[:, ::1] f = Fc.view(np.float64)
    cdef Py_ssize_t T = Yc.shape[0], N = Yc.shape[1], nf = Fc.shape[0]
    out = np.empty(T, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t t, j, n
    cdef double re, im, fr, fi, yr, yi, total
    with nogil:
        for t in range(T):
            total = 0.0
            for j in range(nf):
                re = 0.0
                im = 0.0
                for n in range(N):
                    # conj(f) * y
                    fr = f[j, 2 * n]
                    fi = f[j, 2 * n + 1]
                    yr = y[t, 2 * n]
                    yi = y[t, 2 * n + 1]
                    re = re + fr * yr + fi * yi
                    im = im + fr * yi - fi * yr
                total = total + re * re + im * im
            o[t] = total
    return out
