"""Boundary shape derivatives, the Pucci-Serrin identity residual and the
reflection comparison on discrete solutions.

For a translation of the hole along e1 the velocity satisfies V.n = n1 on the
hole boundary and V = 0 near the outer circle, so

    dE/ds      =          int_{hole} |dy/dn|^p  n1 dS
    dlambda/ds = -(p - 1) int_{hole} |dy1/dn|^p n1 dS      (int |y1|^p = 1)

with n the unit normal pointing out of the domain (into the hole).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from . import fem, kernels
from .errors import PointLocationFailure
from .geometry import INNER, OUTER, TriMesh, reflect_about_hyperplane


@dataclass(frozen=True)
class BoundaryFlux:
    edges: np.ndarray        # (B,) indices into mesh.boundary_edges
    midpoints: np.ndarray    # (B, 2)
    normals: np.ndarray      # (B, 2), out of the domain
    values: np.ndarray       # (B,) normal derivative du/dn at the midpoint
    lengths: np.ndarray      # (B,)
    method: str = "recovered"

    @property
    def n1(self):
        return self.normals[:, 0]


def _edge_geometry(mesh, tag):
    idx = mesh.edges_with_tag(tag)
    e = mesh.boundary_edges[idx]
    a, b = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    mid = 0.5 * (a + b)
    if tag == INNER:
        n = mesh.hole_center - mid
    else:
        n = mid.copy()
    n /= np.linalg.norm(n, axis=1)[:, None]
    return idx, e, mid, n, np.linalg.norm(b - a, axis=1)


def boundary_normal_derivative(mesh: TriMesh, u, tag=INNER, method="recovered",
                               p=None, eps=0.0, load=None) -> BoundaryFlux:
    """Normal derivative of ``u`` on the boundary edges carrying ``tag``.

    ``method="gradient"`` dots the gradient of the adjacent triangle with the
    exact circle normal.  ``method="recovered"`` (the default, and what the
    shape derivatives use) takes the weak normal flux
    ``q_i = int A(grad u).grad phi_i - int f phi_i`` at the boundary nodes,
    solves the boundary mass system for the flux density and inverts
    ``t -> |t|^(p-2) t``; it needs ``p`` and the load vector ``load``.
    """
    u = fem.as_values(mesh, u)
    idx, e, mid, n, length = _edge_geometry(mesh, tag)
    if method == "gradient":
        grads = fem.p1_gradient(mesh, u)[mesh.boundary_edge_triangles()[idx]]
        values = np.einsum("ij,ij->i", grads, n)
    elif method == "recovered":
        if p is None or load is None:
            raise ValueError("recovered flux needs p and the load vector")
        V = fem.space(mesh)
        r = kernels.residual(u, V.tri, V.grads, V.areas, p, eps, mesh.n_vertices) - load
        nodes, local = np.unique(e, return_inverse=True)
        local = local.reshape(e.shape)
        m = len(nodes)
        rows = np.concatenate([local[:, 0], local[:, 1], local[:, 0], local[:, 1]])
        cols = np.concatenate([local[:, 0], local[:, 1], local[:, 1], local[:, 0]])
        vals = np.concatenate([length / 3, length / 3, length / 6, length / 6])
        M = sp.csc_matrix((vals, (rows, cols)), shape=(m, m))
        q = spla.spsolve(M, r[nodes])
        q_mid = 0.5 * (q[local[:, 0]] + q[local[:, 1]])
        values = np.sign(q_mid) * np.abs(q_mid) ** (1.0 / (p - 1.0))
    else:
        raise ValueError(f"unknown method {method!r}")
    return BoundaryFlux(edges=idx, midpoints=mid, normals=n, values=values,
                        lengths=length, method=method)


def normal_integral(flux: BoundaryFlux, p, direction=1.0):
    """Midpoint rule for int |du/dn|^p (n . d) dS with d = direction * e1."""
    return float(direction * np.sum(np.abs(flux.values) ** p * flux.n1 * flux.lengths))


def hadamard_torsion_derivative(flux: BoundaryFlux, p, direction=1.0):
    """dE/ds for the hole moving along ``direction * e1``."""
    return normal_integral(flux, p, direction)


def hadamard_eigen_derivative(flux: BoundaryFlux, p, direction=1.0):
    """dlambda1/ds for the hole moving along ``direction * e1``; needs unit L^p norm."""
    return -(p - 1.0) * normal_integral(flux, p, direction)


def torsion_flux(mesh, y, p, eps=0.0, tag=INNER, method="recovered"):
    return boundary_normal_derivative(mesh, y, tag, method, p=p, eps=eps,
                                      load=fem.load_vector(mesh, 1.0))


def eigen_flux(mesh, y1, lam, p, eps=0.0, tag=INNER, method="recovered"):
    return boundary_normal_derivative(mesh, y1, tag, method, p=p, eps=eps,
                                      load=lam * fem.power_load_vector(mesh, y1, p))


class PerturbationField:
    """V = rho(x) e1 with a C^1 smoothstep rho.

    rho = 1 on |x - c| <= a, rho = 0 on |x| >= b, and in between
    rho = 1 - 3 tau^2 + 2 tau^3 in the normalized distance tau = (d - a) / (D - a)
    along rays from the hole centre c (D is where the ray meets |x| = b).
    """

    def __init__(self, s, a, b, zero=False):
        if not zero and not (a + s < b):
            raise ValueError("plateau must sit inside the support")
        self.s, self.a, self.b, self.zero = float(s), float(a), float(b), zero

    @classmethod
    def for_mesh(cls, mesh: TriMesh, zero=False):
        s = float(mesh.hole_center[0])
        gap = mesh.r1 - mesh.r0 - abs(s)
        return cls(s, mesh.r0 + 0.2 * gap, mesh.r1 - 0.2 * gap, zero=zero)

    def _tau(self, x):
        s, a, b = self.s, self.a, self.b
        z = x - np.array([s, 0.0])
        d = np.linalg.norm(z, axis=-1)
        d_safe = np.where(d > 0, d, 1.0)
        w = z / d_safe[..., None]
        root = np.sqrt(b * b - s * s * w[..., 1] ** 2)
        D = -s * w[..., 0] + root
        tau = (d - a) / (D - a)
        # gradients: grad d = w, grad w_i = (e_i - w_i w) / d
        gw0 = (np.stack([np.ones_like(d), np.zeros_like(d)], -1) - w[..., :1] * w) / d_safe[..., None]
        gw1 = (np.stack([np.zeros_like(d), np.ones_like(d)], -1) - w[..., 1:] * w) / d_safe[..., None]
        gD = -s * gw0 - (s * s * w[..., 1] / root)[..., None] * gw1
        gtau = (w * (D - a)[..., None] - (d - a)[..., None] * gD) / ((D - a) ** 2)[..., None]
        return tau, gtau

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        if self.zero:
            return np.zeros(x.shape[:-1])
        tau, _ = self._tau(x)
        t = np.clip(tau, 0.0, 1.0)
        return 1.0 - 3.0 * t ** 2 + 2.0 * t ** 3

    def grad_rho(self, x):
        x = np.asarray(x, dtype=float)
        if self.zero:
            return np.zeros(x.shape)
        tau, gtau = self._tau(x)
        inside = (tau > 0.0) & (tau < 1.0)
        drho = np.where(inside, -6.0 * tau + 6.0 * tau ** 2, 0.0)
        return drho[..., None] * gtau


def _blend_quadrature(mesh, V: PerturbationField, levels):
    """7-point rule on every triangle, with triangles cut by the kink curves
    tau = 0 and tau = 1 of the blend split ``levels`` times (4 children each).

    Returns ``(parent, bary, weights)``: the owning triangle of every
    sub-cell, barycentric coordinates (M, 7, 3) of its points with respect to
    that triangle, and absolute weights (M, 7).
    """
    T = mesh.n_triangles
    parent = np.arange(T)
    corners = np.broadcast_to(np.eye(3), (T, 3, 3)).copy()    # sub-cell corners, barycentric
    area = mesh.signed_areas().copy()
    done_parent, done_corners, done_area = [], [], []
    x = mesh.vertices[mesh.triangles]
    for _ in range(levels):
        probe = np.concatenate([corners, np.einsum("qa,cab->cqb", fem.QUAD_BARY, corners)], axis=1)
        tau, _ = V._tau(np.einsum("cqa,cad->cqd", probe, x[parent]))
        lo, hi = tau.min(axis=1), tau.max(axis=1)
        cut = ((lo < 0.0) & (hi > 0.0)) | ((lo < 1.0) & (hi > 1.0))
        done_parent.append(parent[~cut])
        done_corners.append(corners[~cut])
        done_area.append(area[~cut])
        if not cut.any():
            parent = parent[:0]
            corners = corners[:0]
            area = area[:0]
            break
        c = corners[cut]
        m01, m12, m20 = 0.5 * (c[:, 0] + c[:, 1]), 0.5 * (c[:, 1] + c[:, 2]), 0.5 * (c[:, 2] + c[:, 0])
        kids = [np.stack(k, axis=1) for k in ((c[:, 0], m01, m20), (m01, c[:, 1], m12),
                                              (m20, m12, c[:, 2]), (m12, m20, m01))]
        corners = np.concatenate(kids)
        parent = np.tile(parent[cut], 4)
        area = np.tile(area[cut] / 4.0, 4)
    parent = np.concatenate(done_parent + [parent])
    corners = np.concatenate(done_corners + [corners])
    area = np.concatenate(done_area + [area])
    bary = np.einsum("qa,cab->cqb", fem.QUAD_BARY, corners)
    return parent, bary, area[:, None] * fem.QUAD_WEIGHTS[None, :]


def pucci_serrin_terms(mesh, u, p, load_value, V: PerturbationField, flux=None, levels=4):
    """The four integrals of the identity, for V = rho e1.

    Returns ``(boundary, div_term, dv_term, load_term)`` with

        boundary = -((p-1)/p) int_{dOmega} |du/dn|^p V.n dS
        div_term = int div V |grad u|^p / p
        dv_term  = -int <(DV)^T grad u, |grad u|^(p-2) grad u>
        load_term = int (V . grad u) f

    ``load_value`` is a constant or nodal P1 data.  Volume integrals use the
    7-point rule, refined ``levels`` times on triangles where the C^1 blend
    has its second-derivative jumps.
    """
    g_all = fem.p1_gradient(mesh, u)                   # (T, 2)
    parent, bary, wq = _blend_quadrature(mesh, V, levels)
    g = g_all[parent]
    xq = np.einsum("cqa,cad->cqd", bary, mesh.vertices[mesh.triangles[parent]])
    rho = V.rho(xq)
    grho = V.grad_rho(xq)
    gnorm2 = np.einsum("td,td->t", g, g)
    W = gnorm2 ** (0.5 * p) / p
    coef = np.where(gnorm2 > 0, gnorm2, 1.0) ** (0.5 * (p - 2.0)) * (gnorm2 > 0)
    div_term = float(np.sum(wq * grho[..., 0] * W[:, None]))
    # (DV)^T grad u = grad rho * du/dx1
    dv_term = -float(np.sum(wq * (g[:, None, 0] * np.einsum("tqd,td->tq", grho, g))
                            * coef[:, None]))
    f = np.asarray(load_value, dtype=float)
    if f.ndim == 0:
        fq = np.broadcast_to(f, wq.shape)
    else:
        fq = np.einsum("cqa,ca->cq", bary, fem.as_values(mesh, f)[mesh.triangles[parent]])
    load_term = float(np.sum(wq * rho * g[:, None, 0] * fq))
    if flux is None:
        flux = [torsion_flux(mesh, u, p, tag=t) for t in (INNER, OUTER)]
    boundary = 0.0
    for fl in flux:
        vn = V.rho(fl.midpoints) * fl.n1
        boundary += float(np.sum(np.abs(fl.values) ** p * vn * fl.lengths))
    boundary *= -(p - 1.0) / p
    return boundary, div_term, dv_term, load_term


def pucci_serrin_residual(mesh, u, p, load_value=1.0, V: PerturbationField | None = None,
                          flux=None, levels=4):
    """``(|LHS - RHS|, scale)`` with scale the largest of the four terms."""
    V = V or PerturbationField.for_mesh(mesh)
    lhs, t1, t2, t3 = pucci_serrin_terms(mesh, u, p, load_value, V, flux, levels)
    residual = abs(lhs - (t1 + t2 + t3))
    scale = max(abs(lhs), abs(t1), abs(t2), abs(t3))
    return residual, scale


class PointLocator:
    """P1 evaluation at arbitrary points of a TriMesh.

    Points a little outside the polygon (between a boundary chord and its
    arc) are evaluated by linear extrapolation from the nearest triangle;
    anything farther than ``slack`` raises :class:`PointLocationFailure`.
    """

    def __init__(self, mesh: TriMesh, slack=None, k=12):
        self.mesh = mesh
        v = mesh.vertices[mesh.triangles]
        self.tree = cKDTree(v.mean(axis=1))
        self.k = min(k, mesh.n_triangles)
        if slack is None:
            e = mesh.boundary_edges
            half = 0.5 * np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
            sag = mesh.r1 - np.sqrt(np.maximum(mesh.r1 ** 2 - half ** 2, 0.0))
            slack = 1e-10 + 2.0 * float(sag.max())
        self.slack = slack
        S = fem.space(mesh)
        self._grads, self._tri = S.grads, S.tri

    def barycentric(self, tri_idx, x):
        v0 = self.mesh.vertices[self._tri[tri_idx, 0]]
        G = self._grads[tri_idx]                         # (..., 3, 2)
        lam12 = np.einsum("...ad,...d->...a", G[..., 1:, :], x - v0)
        lam0 = 1.0 - lam12.sum(axis=-1)
        return np.concatenate([lam0[..., None], lam12], axis=-1)

    def locate(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        _, cand = self.tree.query(x, k=self.k)
        cand = np.atleast_2d(cand)
        lam = self.barycentric(cand, x[:, None, :])      # (n, k, 3)
        worst = lam.min(axis=-1)
        best = np.argmax(worst, axis=1)
        rows = np.arange(len(x))
        tri = cand[rows, best]
        lam_best = lam[rows, best]
        outside = worst[rows, best] < -1e-12
        for i in np.flatnonzero(outside):
            # exhaustive search before concluding the point is outside
            all_lam = self.barycentric(np.arange(self.mesh.n_triangles), x[i][None, :])
            j = int(np.argmax(all_lam.min(axis=-1)))
            tri[i], lam_best[i] = j, all_lam[j]
            if all_lam[j].min() < -1e-12:
                dist = self._distance_to_triangle(j, x[i])
                if dist > self.slack:
                    raise PointLocationFailure(
                        f"point {x[i]} lies {dist:.3e} outside the mesh")
        return tri, lam_best

    def _distance_to_triangle(self, t, x):
        pts = self.mesh.vertices[self._tri[t]]
        best = np.inf
        for a, b in ((0, 1), (1, 2), (2, 0)):
            pa, pb = pts[a], pts[b]
            ab = pb - pa
            tpar = np.clip(np.dot(x - pa, ab) / np.dot(ab, ab), 0.0, 1.0)
            best = min(best, float(np.linalg.norm(x - (pa + tpar * ab))))
        return best

    def evaluate(self, u, x):
        tri, lam = self.locate(x)
        return np.einsum("na,na->n", lam, np.asarray(u)[self._tri[tri]])


def reflection_comparison(mesh: TriMesh, u, s, locator=None, direction=1.0):
    """``(min_gap, violating_fraction)`` of u(x') - u(x) over interior vertices
    with direction * (x1 - s) > 0, where x' is the mirror image of x in the
    line x1 = s.  Violations are gaps below -1e-3 max(u)."""
    u = fem.as_values(mesh, u)
    verts = mesh.vertices
    side = direction * (verts[:, 0] - s)
    sel = np.flatnonzero((side > 1e-12 * mesh.r1) & ~mesh.boundary_mask)
    if not len(sel):
        return 0.0, 0.0
    locator = locator or PointLocator(mesh)
    mirrored = reflect_about_hyperplane(verts[sel], s)
    gap = locator.evaluate(u, mirrored) - u[sel]
    tol_geom = 1e-3 * float(np.max(u))
    return float(gap.min()), float(np.mean(gap < -tol_geom))


def mirrored_flux_pairs(mesh: TriMesh, flux: BoundaryFlux, direction=1.0):
    """Pairs (hole edge on the far side of x1 = s, its mirror edge).

    Uses the structured angular numbering: the mirror of hole edge k about
    the line x1 = s through the hole centre is edge n_theta/2 - 1 - k.
    """
    n = mesh.n_theta
    if n == 0 or n % 2 or len(flux.values) != n:
        raise ValueError("mirrored pairs need the hole edges of a structured mesh, even n_theta")
    side = direction * (flux.midpoints[:, 0] - mesh.hole_center[0])
    right = np.flatnonzero(side > 1e-12 * mesh.r1)
    mirror = (n // 2 - 1 - right) % n
    return right, mirror


def strict_flux_inequality(mesh, flux: BoundaryFlux, rel_tol=1e-3, direction=1.0):
    """Fraction of right-side hole edges where |d(y~)/dn| > |dy/dn| fails.

    The reflected function's normal derivative at an edge equals the
    function's normal derivative at the mirror edge.
    """
    right, mirror = mirrored_flux_pairs(mesh, flux, direction)
    own = np.abs(flux.values[right])
    refl = np.abs(flux.values[mirror])
    ok = refl > own * (1.0 - rel_tol)
    return float(np.mean(~ok)), float(np.min(refl - own))
