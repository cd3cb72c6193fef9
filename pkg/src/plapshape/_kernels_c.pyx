# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels; same signatures and semantics as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport expm1, log1p, pow, sqrt

cnp.import_array()

BACKEND = "cython"


cdef inline double _cpow(double q, double expo) nogil:
    if expo == 0.0:
        return 1.0
    if q <= 0.0:
        return 0.0
    return pow(q, expo)


def element_gradients(const double[::1] u, const cnp.intp_t[:, ::1] tri,
                      const double[:, :, ::1] grads):
    cdef Py_ssize_t t, a, nt = tri.shape[0]
    out = np.empty((nt, 2))
    cdef double[:, ::1] g = out
    cdef double gx, gy, ua
    with nogil:
        for t in range(nt):
            gx = 0.0
            gy = 0.0
            for a in range(3):
                ua = u[tri[t, a]]
                gx += grads[t, a, 0] * ua
                gy += grads[t, a, 1] * ua
            g[t, 0] = gx
            g[t, 1] = gy
    return out


def energy(const double[::1] u, const cnp.intp_t[:, ::1] tri,
           const double[:, :, ::1] grads, const double[::1] areas,
           double p, double eps):
    cdef Py_ssize_t t, a, nt = tri.shape[0]
    cdef double gx, gy, ua, g2, total = 0.0
    cdef double epsp = pow(eps, p), eps2 = eps * eps
    with nogil:
        for t in range(nt):
            gx = 0.0
            gy = 0.0
            for a in range(3):
                ua = u[tri[t, a]]
                gx += grads[t, a, 0] * ua
                gy += grads[t, a, 1] * ua
            g2 = gx * gx + gy * gy
            if eps2 == 0.0:
                total += areas[t] * pow(g2, 0.5 * p)
            else:
                total += areas[t] * epsp * expm1(0.5 * p * log1p(g2 / eps2))
    return total / p


def residual(const double[::1] u, const cnp.intp_t[:, ::1] tri,
             const double[:, :, ::1] grads, const double[::1] areas,
             double p, double eps, Py_ssize_t n_vertices):
    cdef Py_ssize_t t, a, nt = tri.shape[0]
    out = np.zeros(n_vertices)
    cdef double[::1] res = out
    cdef double gx, gy, ua, q, c
    cdef double e1 = 0.5 * (p - 2.0)
    with nogil:
        for t in range(nt):
            gx = 0.0
            gy = 0.0
            for a in range(3):
                ua = u[tri[t, a]]
                gx += grads[t, a, 0] * ua
                gy += grads[t, a, 1] * ua
            q = eps * eps + gx * gx + gy * gy
            c = areas[t] * _cpow(q, e1)
            for a in range(3):
                res[tri[t, a]] += c * (grads[t, a, 0] * gx + grads[t, a, 1] * gy)
    return out


def residual_and_jacobian(const double[::1] u, const cnp.intp_t[:, ::1] tri,
                          const double[:, :, ::1] grads, const double[::1] areas,
                          double p, double eps, Py_ssize_t n_vertices,
                          const cnp.intp_t[:, ::1] pos, Py_ssize_t nnz):
    cdef Py_ssize_t t, a, b, k, nt = tri.shape[0]
    out_r = np.zeros(n_vertices)
    out_d = np.zeros(nnz)
    cdef double[::1] res = out_r
    cdef double[::1] data = out_d
    cdef double gx, gy, ua, q, ca, cb
    cdef double gg[3]
    cdef double e1 = 0.5 * (p - 2.0)
    cdef double e2 = 0.5 * (p - 4.0)
    with nogil:
        for t in range(nt):
            gx = 0.0
            gy = 0.0
            for a in range(3):
                ua = u[tri[t, a]]
                gx += grads[t, a, 0] * ua
                gy += grads[t, a, 1] * ua
            q = eps * eps + gx * gx + gy * gy
            ca = areas[t] * _cpow(q, e1)
            cb = areas[t] * (p - 2.0) * _cpow(q, e2)
            for a in range(3):
                gg[a] = grads[t, a, 0] * gx + grads[t, a, 1] * gy
                res[tri[t, a]] += ca * gg[a]
            for a in range(3):
                for b in range(3):
                    k = pos[t, 3 * a + b]
                    if k >= 0:
                        data[k] += ca * (grads[t, a, 0] * grads[t, b, 0]
                                         + grads[t, a, 1] * grads[t, b, 1]) \
                            + cb * (gg[a] * gg[b])   # symmetric in a, b bit for bit
    return out_r, out_d


cdef void _matvec(const cnp.intp_t[::1] indptr, const cnp.intp_t[::1] indices,
                  const double[::1] data, double[::1] x, double[::1] y) nogil:
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(indptr.shape[0] - 1):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        y[i] = acc


def pcg(const cnp.intp_t[::1] indptr, const cnp.intp_t[::1] indices,
        const double[::1] data, const double[::1] b, x0, double tol,
        Py_ssize_t maxiter):
    """Jacobi-preconditioned CG; returns (x, iterations, relative residual)."""
    cdef Py_ssize_t n = b.shape[0], i, k, it = 0
    x_arr = np.array(x0, dtype=float)
    cdef double[::1] x = x_arr
    cdef double[::1] r = np.empty(n)
    cdef double[::1] z = np.empty(n)
    cdef double[::1] d = np.empty(n)
    cdef double[::1] Ad = np.empty(n)
    cdef double[::1] dinv = np.empty(n)
    cdef double bnorm = 0.0, rnorm, rz, rz_new, dAd, alpha, beta, target
    for i in range(n):
        bnorm += b[i] * b[i]
    bnorm = sqrt(bnorm)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    with nogil:
        for i in range(n):
            dinv[i] = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                if indices[k] == i:
                    dinv[i] = 1.0 / data[k]
        _matvec(indptr, indices, data, x, Ad)
        rz = 0.0
        rnorm = 0.0
        for i in range(n):
            r[i] = b[i] - Ad[i]
            z[i] = dinv[i] * r[i]
            d[i] = z[i]
            rz += r[i] * z[i]
            rnorm += r[i] * r[i]
        rnorm = sqrt(rnorm)
        target = tol * bnorm
        while rnorm > target and it < maxiter:
            _matvec(indptr, indices, data, d, Ad)
            dAd = 0.0
            for i in range(n):
                dAd += d[i] * Ad[i]
            alpha = rz / dAd
            rz_new = 0.0
            rnorm = 0.0
            for i in range(n):
                x[i] += alpha * d[i]
                r[i] -= alpha * Ad[i]
                z[i] = dinv[i] * r[i]
                rz_new += r[i] * z[i]
                rnorm += r[i] * r[i]
            rnorm = sqrt(rnorm)
            beta = rz_new / rz
            rz = rz_new
            for i in range(n):
                d[i] = z[i] + beta * d[i]
            it += 1
    return x_arr, it, rnorm / bnorm
