"""Pure-numpy element kernels; the reference twin of ``_kernels_c``.

Shapes: ``tri`` (T, 3) vertex ids, ``grads`` (T, 3, 2) P1 basis gradients,
``areas`` (T,), ``pos`` (T, 9) positions of the local 3x3 block in the CSR
data array (-1 where either vertex is constrained).
"""
import numpy as np
import scipy.sparse as sp

BACKEND = "python"


def _pow(q, expo):
    if expo == 0.0:
        return np.ones_like(q)
    pos = q > 0.0
    return np.where(pos, np.power(np.where(pos, q, 1.0), expo), 0.0)


def element_gradients(u, tri, grads):
    return np.einsum("tad,ta->td", grads, u[tri])


def energy(u, tri, grads, areas, p, eps):
    g = element_gradients(u, tri, grads)
    g2 = np.einsum("td,td->t", g, g)
    if eps == 0.0:
        dens = np.power(g2, 0.5 * p)
    else:
        dens = eps ** p * np.expm1(0.5 * p * np.log1p(g2 / (eps * eps)))
    return float(np.sum(areas * dens) / p)


def residual(u, tri, grads, areas, p, eps, n_vertices):
    g = element_gradients(u, tri, grads)
    q = eps * eps + np.einsum("td,td->t", g, g)
    a = _pow(q, 0.5 * (p - 2.0))
    floc = areas[:, None] * np.einsum("tad,td->ta", grads, a[:, None] * g)
    return np.bincount(tri.ravel(), floc.ravel(), minlength=n_vertices)


def residual_and_jacobian(u, tri, grads, areas, p, eps, n_vertices, pos, nnz):
    g = element_gradients(u, tri, grads)
    q = eps * eps + np.einsum("td,td->t", g, g)
    a = _pow(q, 0.5 * (p - 2.0))
    b = (p - 2.0) * _pow(q, 0.5 * (p - 4.0))
    floc = areas[:, None] * np.einsum("tad,td->ta", grads, a[:, None] * g)
    res = np.bincount(tri.ravel(), floc.ravel(), minlength=n_vertices)
    gg = np.einsum("tad,td->ta", grads, g)
    kloc = (a * areas)[:, None, None] * np.einsum("tad,tbd->tab", grads, grads) \
        + (b * areas)[:, None, None] * (gg[:, :, None] * gg[:, None, :])
    keep = pos.ravel() >= 0
    data = np.bincount(pos.ravel()[keep], kloc.ravel()[keep], minlength=nnz)
    return res, data


def pcg(indptr, indices, data, b, x0, tol, maxiter):
    """Jacobi-preconditioned CG; returns (x, iterations, relative residual)."""
    n = len(b)
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    dinv = 1.0 / A.diagonal()
    x = np.array(x0, dtype=float)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    target = tol * bnorm
    z = dinv * r
    d = z.copy()
    rz = r @ z
    rnorm = np.linalg.norm(r)
    it = 0
    while rnorm > target and it < maxiter:
        Ad = A @ d
        alpha = rz / (d @ Ad)
        x += alpha * d
        r -= alpha * Ad
        z = dinv * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
        rnorm = np.linalg.norm(r)
        it += 1
    return x, it, rnorm / bnorm
