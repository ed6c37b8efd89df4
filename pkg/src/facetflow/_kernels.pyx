# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels (model density only).

Same signatures and semantics as :mod:`facetflow._kernels_py`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, expm1, log1p

cnp.import_array()


def element_terms(Du, grads, area, double b, double p, double eps, bint want_hessian):
    cdef double[:, :, ::1] du = np.ascontiguousarray(Du, dtype=np.float64)
    cdef double[:, :, ::1] gr = np.ascontiguousarray(grads, dtype=np.float64)
    cdef double[::1] ar = np.ascontiguousarray(area, dtype=np.float64)
    cdef Py_ssize_t T = du.shape[0], N = du.shape[1]
    cdef Py_ssize_t t, i, k, l, j, m = 3 * N
    cdef double s, sig, root, q = 0.5 * p, d1, d2, A, gkl, ww
    cdef double w[3][16]
    if N > 16:
        raise ValueError("compiled kernel supports N <= 16")

    energy_np = np.empty(T)
    lgrad_np = np.zeros((T, 3, N))
    cdef double[::1] energy = energy_np
    cdef double[:, :, ::1] lgrad = lgrad_np
    cdef double[:, :, ::1] K
    if want_hessian:
        K_np = np.zeros((T, m, m))
        K = K_np
    else:
        K_np = None

    for t in range(T):
        s = 0.0
        for i in range(N):
            s += du[t, i, 0] * du[t, i, 0] + du[t, i, 1] * du[t, i, 1]
        sig = eps * eps + s
        root = sqrt(sig)
        A = ar[t]
        energy[t] = A * (b * root + pow(sig, q) / p)
        d1 = b / root + pow(sig, q - 1.0)
        for k in range(3):
            for i in range(N):
                w[k][i] = du[t, i, 0] * gr[t, k, 0] + du[t, i, 1] * gr[t, k, 1]
                lgrad[t, k, i] = A * d1 * w[k][i]
        if want_hessian:
            d2 = -0.5 * b / (sig * root)
            if q != 1.0:
                d2 += (q - 1.0) * pow(sig, q - 2.0)
            for k in range(3):
                for l in range(3):
                    gkl = gr[t, k, 0] * gr[t, l, 0] + gr[t, k, 1] * gr[t, l, 1]
                    for i in range(N):
                        for j in range(N):
                            ww = 2.0 * d2 * A * w[k][i] * w[l][j]
                            if i == j:
                                ww += d1 * A * gkl
                            K[t, k * N + i, l * N + j] = ww
    return energy_np, lgrad_np, K_np


def energy_change(Du0, Du1, double b, double p, double eps):
    cdef double[:, :, ::1] u0 = np.ascontiguousarray(Du0, dtype=np.float64)
    cdef double[:, :, ::1] u1 = np.ascontiguousarray(Du1, dtype=np.float64)
    cdef Py_ssize_t T = u0.shape[0], N = u0.shape[1], n = u0.shape[2]
    cdef Py_ssize_t t, i, a
    cdef double ds, s0, sig0, sig1, q = 0.5 * p
    out_np = np.empty(T)
    cdef double[::1] out = out_np
    for t in range(T):
        ds = 0.0
        s0 = 0.0
        for i in range(N):
            for a in range(n):
                ds += (u1[t, i, a] - u0[t, i, a]) * (u1[t, i, a] + u0[t, i, a])
                s0 += u0[t, i, a] * u0[t, i, a]
        sig0 = eps * eps + s0
        sig1 = sig0 + ds
        out[t] = b * ds / (sqrt(sig1) + sqrt(sig0)) + pow(sig0, q) * expm1(q * log1p(ds / sig0)) / p
    return out_np


def truncation_quotients(x1, x2, double delta, double eps):
    cdef double[:, ::1] a = np.ascontiguousarray(x1, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(x2, dtype=np.float64)
    cdef Py_ssize_t M = a.shape[0], K = a.shape[1]
    cdef Py_ssize_t i, j
    cdef double r1, r2, s1, s2, dg, dx, e
    dg_np = np.empty(M)
    dx_np = np.empty(M)
    cdef double[::1] dgv = dg_np
    cdef double[::1] dxv = dx_np
    for i in range(M):
        r1 = 0.0
        r2 = 0.0
        for j in range(K):
            r1 += a[i, j] * a[i, j]
            r2 += c[i, j] * c[i, j]
        s1 = sqrt(eps * eps + r1) - delta
        s2 = sqrt(eps * eps + r2) - delta
        s1 = s1 / sqrt(r1) if (s1 > 0.0 and r1 > 0.0) else 0.0
        s2 = s2 / sqrt(r2) if (s2 > 0.0 and r2 > 0.0) else 0.0
        dg = 0.0
        dx = 0.0
        for j in range(K):
            e = s1 * a[i, j] - s2 * c[i, j]
            dg += e * e
            e = a[i, j] - c[i, j]
            dx += e * e
        dgv[i] = sqrt(dg)
        dxv[i] = sqrt(dx)
    return dg_np, dx_np
