"""P1 finite elements on :class:`~plapshape.geometry.TriMesh`.

Dirichlet data is eliminated: residuals and Jacobians live on the free
(interior) vertices only, in the order given by ``mesh.free_vertices``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import DegenerateJacobian, LinearSolveFailure
from .geometry import INTERIOR, TriMesh

# 7-point degree-5 rule on the reference triangle (barycentric, weights sum to 1)
_A1 = (6.0 - np.sqrt(15.0)) / 21.0
_A2 = (6.0 + np.sqrt(15.0)) / 21.0
_W1 = (155.0 - np.sqrt(15.0)) / 1200.0    # weight of the _A1 orbit
_W2 = (155.0 + np.sqrt(15.0)) / 1200.0    # weight of the _A2 orbit
QUAD_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _A1, 1 - 2 * _A1], [_A1, 1 - 2 * _A1, _A1], [1 - 2 * _A1, _A1, _A1],
    [_A2, _A2, 1 - 2 * _A2], [_A2, 1 - 2 * _A2, _A2], [1 - 2 * _A2, _A2, _A2],
])
QUAD_WEIGHTS = np.array([9 / 40, _W1, _W1, _W1, _W2, _W2, _W2])


@dataclass(frozen=True)
class DirichletMask:
    constrained: np.ndarray   # bool per vertex
    values: np.ndarray        # boundary values (zero for every problem here)

    @classmethod
    def homogeneous(cls, mesh: TriMesh):
        return cls(constrained=mesh.vertex_flags != INTERIOR,
                   values=np.zeros(mesh.n_vertices))

    @property
    def free(self):
        return np.flatnonzero(~self.constrained)


class P1Space:
    """Per-mesh precomputation: basis gradients, CSR pattern, quadrature."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        tri = np.ascontiguousarray(mesh.triangles, dtype=np.intp)
        self.tri = tri
        x = mesh.vertices[tri]                      # (T, 3, 2)
        areas = mesh.signed_areas()
        self.areas = np.ascontiguousarray(areas)
        grads = np.empty((len(tri), 3, 2))
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            grads[:, a, 0] = x[:, b, 1] - x[:, c, 1]
            grads[:, a, 1] = x[:, c, 0] - x[:, b, 0]
        self.grads = np.ascontiguousarray(grads / (2.0 * areas)[:, None, None])

        self.free = mesh.free_vertices
        nf = len(self.free)
        self.n_free = nf
        fidx = np.full(mesh.n_vertices, -1, dtype=np.intp)
        fidx[self.free] = np.arange(nf)
        self.free_index = fidx
        rows = np.repeat(fidx[tri], 3, axis=1)      # (T, 9): a-major
        cols = np.tile(fidx[tri], (1, 3))
        ok = (rows >= 0) & (cols >= 0)
        keys = rows[ok].astype(np.int64) * nf + cols[ok]
        uniq, inverse = np.unique(keys, return_inverse=True)
        pos = np.full(rows.shape, -1, dtype=np.intp)
        pos[ok] = inverse
        self.pos = np.ascontiguousarray(pos)
        self.nnz = len(uniq)
        r = (uniq // nf).astype(np.intp)
        self.indices = np.ascontiguousarray((uniq % nf).astype(np.intp))
        self.indptr = np.ascontiguousarray(
            np.concatenate([[0], np.cumsum(np.bincount(r, minlength=nf))]).astype(np.intp))

        # quadrature points and P1 basis values there
        self.quad_points = np.einsum("qa,tad->tqd", QUAD_BARY, x)
        self.quad_weights = areas[:, None] * QUAD_WEIGHTS[None, :]

    def csr(self, data):
        n = self.n_free
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    def mass_matrix(self):
        """Consistent P1 mass matrix on all vertices."""
        tri = self.tri
        local = (np.ones((3, 3)) + np.eye(3)) / 12.0
        vals = self.areas[:, None, None] * local[None]
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        n = self.mesh.n_vertices
        return sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(n, n))


def space(mesh: TriMesh) -> P1Space:
    cache = mesh._cache
    if "p1" not in cache:
        cache["p1"] = P1Space(mesh)
    return cache["p1"]


def as_values(mesh, u):
    u = np.ascontiguousarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise ValueError(f"field has shape {u.shape}, mesh has {mesh.n_vertices} vertices")
    return u


def p1_gradient(mesh: TriMesh, u, triangle_index=None):
    """Constant gradient of the P1 interpolant, on one triangle or all of them."""
    V = space(mesh)
    g = kernels.element_gradients(as_values(mesh, u), V.tri, V.grads)
    return g if triangle_index is None else g[triangle_index]


def quad_values(mesh, u):
    """Values of the P1 interpolant at the 7 quadrature points of every triangle."""
    V = space(mesh)
    return as_values(mesh, u)[V.tri] @ QUAD_BARY.T


def integrate_field(mesh: TriMesh, u, power=1.0):
    """Integral of |u|^power by the 7-point rule.

    ``power == 1`` is special-cased to the signed integral of the P1
    interpolant, which the rule integrates exactly.
    """
    if power < 1.0:
        raise ValueError("power must be >= 1")
    if power == 1.0:
        return integral(mesh, u)
    V = space(mesh)
    return float(np.sum(V.quad_weights * np.abs(quad_values(mesh, u)) ** power))


def integral(mesh: TriMesh, u):
    """Signed integral of the P1 interpolant (area/3 times vertex sum)."""
    V = space(mesh)
    u = as_values(mesh, u)
    return float(np.sum(V.areas * u[V.tri].sum(axis=1)) / 3.0)


def load_vector(mesh: TriMesh, f):
    """Entries b_i = integral of f * phi_i for nodal P1 data f (consistent mass)."""
    V = space(mesh)
    f = as_values(mesh, np.broadcast_to(np.asarray(f, dtype=float), (mesh.n_vertices,)))
    fq = f[V.tri]
    local = (fq.sum(axis=1, keepdims=True) + fq) / 12.0 * V.areas[:, None]
    return np.bincount(V.tri.ravel(), local.ravel(), minlength=mesh.n_vertices)


def power_load_vector(mesh: TriMesh, u, p):
    """Entries integral of |u|^(p-2) u phi_i by the 7-point rule.

    Uses the same quadrature as ``integrate_field(u, p)`` so that
    ``power_load_vector(u) @ u == integrate_field(u, p)`` exactly.
    """
    V = space(mesh)
    uq = quad_values(mesh, u)
    fq = np.sign(uq) * np.abs(uq) ** (p - 1.0)
    local = np.einsum("tq,qa->ta", V.quad_weights * fq, QUAD_BARY)
    return np.bincount(V.tri.ravel(), local.ravel(), minlength=mesh.n_vertices)


def _check_degenerate(V, u, p, eps):
    if p < 2.0 and eps == 0.0:
        g = kernels.element_gradients(u, V.tri, V.grads)
        if np.any(np.einsum("td,td->t", g, g) == 0.0):
            raise DegenerateJacobian("zero element gradient with p < 2 and eps = 0")


def discrete_energy(mesh, u, p, eps, b):
    """(1/p) sum_T |T| ((eps^2 + |grad u|^2)^(p/2) - eps^p) - b . u."""
    V = space(mesh)
    u = as_values(mesh, u)
    return kernels.energy(u, V.tri, V.grads, V.areas, p, eps) - float(b @ u)


def residual_vector(mesh, u, p, eps, b):
    """Free-vertex residual for a precomputed load vector ``b`` (all vertices)."""
    V = space(mesh)
    u = as_values(mesh, u)
    r = kernels.residual(u, V.tri, V.grads, V.areas, p, eps, mesh.n_vertices)
    return (r - b)[V.free]


def assemble_residual(mesh, u, p, eps, load, mask: DirichletMask | None = None):
    """Residual  int flux(grad u) . grad psi - int load psi  at free vertices.

    ``load`` is nodal P1 data (scalar broadcasts).
    """
    _check_mask(mesh, mask)
    return residual_vector(mesh, u, p, eps, load_vector(mesh, load))


def residual_and_jacobian(mesh, u, p, eps, b):
    V = space(mesh)
    u = as_values(mesh, u)
    _check_degenerate(V, u, p, eps)
    r, data = kernels.residual_and_jacobian(u, V.tri, V.grads, V.areas, p, eps,
                                            mesh.n_vertices, V.pos, V.nnz)
    return (r - b)[V.free], V.csr(data)


def assemble_jacobian(mesh, u, p, eps, mask: DirichletMask | None = None):
    """Free-vertex Jacobian of the residual as a CSR matrix (SPD for eps > 0)."""
    _check_mask(mesh, mask)
    return residual_and_jacobian(mesh, u, p, eps, np.zeros(mesh.n_vertices))[1]


def _check_mask(mesh, mask):
    if mask is None:
        return
    if not np.array_equal(mask.constrained, mesh.vertex_flags != INTERIOR):
        raise ValueError("every boundary vertex, and only those, must be constrained")
    if np.any(mask.values != 0.0):
        raise ValueError("only homogeneous Dirichlet data is supported")


def solve_spd(matrix, rhs, tol, x0=None, maxiter=None):
    """Jacobi-preconditioned conjugate gradients.

    Raises
    ------
    LinearSolveFailure
        If the relative residual is still above ``tol`` after
        ``10 * dimension`` iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = sp.csr_matrix(matrix)
    A.sort_indices()
    rhs = np.ascontiguousarray(rhs, dtype=float)
    n = A.shape[0]
    if maxiter is None:
        maxiter = 10 * n
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    x, it, rel = kernels.pcg(A.indptr.astype(np.intp), A.indices.astype(np.intp),
                             np.ascontiguousarray(A.data, dtype=float), rhs, x0, tol, maxiter)
    if rel > tol:
        raise LinearSolveFailure(f"CG stalled at relative residual {rel:.3e} after {it} "
                                 "iterations", iterations=it, residual=rel)
    return x
