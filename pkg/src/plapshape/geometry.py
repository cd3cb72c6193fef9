"""Punctured-disk domains and structured boundary-conforming meshes.

The domain is B(0, r1) minus the closed disk B(s e1, r0).  Meshes are built
from the transfinite blend

    P(theta, t) = (1 - t) (c + r0 w(theta)) + t r1 w(theta),   c = (s, 0),

on a uniform (theta, t) grid, so every boundary vertex sits exactly on its
circle and vertex ``j * n_theta + k`` is layer ``j`` (0 = hole), angle ``k``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, MeshQualityError, TagNotFound

INTERIOR, INNER, OUTER = 0, 1, 2
TAG_NAMES = {INNER: "Inner", OUTER: "Outer"}
FLAG_NAMES = {INTERIOR: "interior", INNER: "inner", OUTER: "outer"}

# Offsets closer than this fraction of r1 - r0 to tangency are refused.
MAX_OFFSET_FRACTION = 0.95


@dataclass(frozen=True)
class AnnularDomain:
    r0: float
    r1: float
    s: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.r0 < self.r1):
            raise GeometryError(f"need 0 < r0 < r1, got r0={self.r0}, r1={self.r1}")
        if not (0.0 <= self.s < self.r1 - self.r0):
            raise GeometryError(
                f"need 0 <= s < r1 - r0 = {self.r1 - self.r0}, got s={self.s}")

    @property
    def hole_center(self):
        return np.array([self.s, 0.0])

    @property
    def gap(self):
        """Thinnest wall thickness, r1 - r0 - s."""
        return self.r1 - self.r0 - self.s

    def area(self):
        return np.pi * (self.r1 ** 2 - self.r0 ** 2)


@dataclass(frozen=True)
class MeshQuality:
    min_angle: float
    min_area: float
    max_aspect_ratio: float


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable triangulation with tagged boundary edges.

    Arrays are made read-only on construction; share freely between threads.
    """

    vertices: np.ndarray          # (V, 2)
    triangles: np.ndarray         # (T, 3), counterclockwise
    boundary_edges: np.ndarray    # (B, 2)
    boundary_tags: np.ndarray     # (B,), INNER or OUTER
    vertex_flags: np.ndarray      # (V,), INTERIOR / INNER / OUTER
    mesh_id: str
    r0: float
    r1: float
    hole_center: np.ndarray       # (2,)
    n_theta: int = 0
    n_layers: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges", "boundary_tags",
                     "vertex_flags", "hole_center"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def boundary_mask(self):
        return self.vertex_flags != INTERIOR

    @property
    def free_vertices(self):
        return np.flatnonzero(self.vertex_flags == INTERIOR)

    def signed_areas(self):
        if "areas" not in self._cache:
            a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
            ab, ac = b - a, c - a
            self._cache["areas"] = 0.5 * (ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])
        return self._cache["areas"]

    def total_area(self):
        return float(np.sum(self.signed_areas()))

    def edges(self):
        """Unique undirected edges, sorted lexicographically."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def euler_characteristic(self):
        return self.n_vertices - len(self.edges()) + self.n_triangles

    def edges_with_tag(self, tag):
        sel = self.boundary_tags == tag
        if not np.any(sel):
            raise TagNotFound(TAG_NAMES.get(tag, tag))
        return np.flatnonzero(sel)

    def boundary_edge_triangles(self):
        """Index of the unique triangle adjacent to each boundary edge."""
        if "bedge_tri" not in self._cache:
            t = self.triangles
            lookup = {}
            for ti, (a, b, c) in enumerate(t.tolist()):
                for u, v in ((a, b), (b, c), (c, a)):
                    lookup[(min(u, v), max(u, v))] = ti
            out = np.array([lookup[(min(u, v), max(u, v))]
                            for u, v in self.boundary_edges.tolist()], dtype=np.intp)
            self._cache["bedge_tri"] = out
        return self._cache["bedge_tri"]

    def quality(self):
        v = self.vertices[self.triangles]
        lengths = np.stack([np.linalg.norm(v[:, (i + 1) % 3] - v[:, i], axis=1)
                            for i in range(3)], axis=1)
        areas = self.signed_areas()
        # angle opposite edge i via the law of cosines
        a, b, c = lengths[:, 1], lengths[:, 2], lengths[:, 0]
        angles = []
        for opp, x, y in ((a, b, c), (b, c, a), (c, a, b)):
            cosang = np.clip((x ** 2 + y ** 2 - opp ** 2) / (2 * x * y), -1.0, 1.0)
            angles.append(np.arccos(cosang))
        longest = lengths.max(axis=1)
        shortest_alt = 2.0 * areas / longest
        return MeshQuality(min_angle=float(np.min(angles)),
                           min_area=float(areas.min()),
                           max_aspect_ratio=float(np.max(longest / shortest_alt)))


def _mesh_id(*parts):
    text = "|".join(repr(p) for p in parts)
    return "annulus-" + hashlib.sha1(text.encode()).hexdigest()[:12]


def build_annulus_mesh(domain: AnnularDomain, n_theta: int, n_layers: int) -> TriMesh:
    """Structured triangulation of the punctured disk ``domain``.

    Parameters
    ----------
    domain : AnnularDomain
        Radii and hole offset.
    n_theta : int
        Number of angular cells (>= 8).  Divisible by 4 keeps the mesh
        symmetric under both coordinate reflections when s = 0.
    n_layers : int
        Number of radial cell layers (>= 2).

    Returns
    -------
    TriMesh
        ``n_theta * (n_layers + 1)`` vertices and ``2 * n_theta * n_layers``
        triangles.
    """
    if not isinstance(domain, AnnularDomain):
        raise GeometryError("domain must be an AnnularDomain")
    if n_theta < 8 or n_layers < 2:
        raise GeometryError(f"need n_theta >= 8 and n_layers >= 2, got {n_theta}, {n_layers}")
    if domain.s > MAX_OFFSET_FRACTION * (domain.r1 - domain.r0):
        raise MeshQualityError(
            f"offset s={domain.s} exceeds {MAX_OFFSET_FRACTION} * (r1 - r0); "
            "elements would degenerate")

    r0, r1, s = domain.r0, domain.r1, domain.s
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    t = np.arange(n_layers + 1) / n_layers
    w = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    inner = np.array([s, 0.0]) + r0 * w
    outer = r1 * w
    pts = (1.0 - t)[:, None, None] * inner[None] + t[:, None, None] * outer[None]
    vertices = pts.reshape(-1, 2)
    # exact boundary placement (the blend already gives it up to rounding)
    vertices[:n_theta] = inner
    vertices[-n_theta:] = outer

    j, k = np.meshgrid(np.arange(n_layers), np.arange(n_theta), indexing="ij")
    j, k = j.ravel(), k.ravel()
    k1 = (k + 1) % n_theta
    a = j * n_theta + k
    b = j * n_theta + k1
    c = (j + 1) * n_theta + k1
    d = (j + 1) * n_theta + k
    len_ac = np.linalg.norm(vertices[a] - vertices[c], axis=1)
    len_bd = np.linalg.norm(vertices[b] - vertices[d], axis=1)
    tie = np.abs(len_ac - len_bd) <= 1e-9 * np.maximum(len_ac, len_bd)
    # ties broken towards the corner nearer the x1 axis: reflection-invariant
    cos_a = np.abs(np.cos(theta[k]))
    cos_b = np.abs(np.cos(theta[k1]))
    use_ac = np.where(tie, cos_a > cos_b, len_ac < len_bd)
    tri1 = np.where(use_ac[:, None], np.stack([a, d, c], 1), np.stack([a, d, b], 1))
    tri2 = np.where(use_ac[:, None], np.stack([a, c, b], 1), np.stack([b, d, c], 1))
    triangles = np.empty((2 * len(a), 3), dtype=np.intp)
    triangles[0::2] = tri1
    triangles[1::2] = tri2

    kk = np.arange(n_theta)
    inner_edges = np.stack([kk, (kk + 1) % n_theta], axis=1)
    off = n_layers * n_theta
    outer_edges = off + inner_edges
    boundary_edges = np.concatenate([inner_edges, outer_edges])
    boundary_tags = np.concatenate([np.full(n_theta, INNER), np.full(n_theta, OUTER)])
    flags = np.full(len(vertices), INTERIOR, dtype=np.int8)
    flags[:n_theta] = INNER
    flags[-n_theta:] = OUTER

    mesh = TriMesh(vertices=vertices, triangles=triangles,
                   boundary_edges=boundary_edges, boundary_tags=boundary_tags,
                   vertex_flags=flags,
                   mesh_id=_mesh_id(r0, r1, s, n_theta, n_layers),
                   r0=r0, r1=r1, hole_center=np.array([s, 0.0]),
                   n_theta=n_theta, n_layers=n_layers)
    if mesh.signed_areas().min() <= 0.0:
        raise MeshQualityError("mapping folded: non-positive triangle area")
    return mesh


def mirror_mesh(mesh: TriMesh, axis: int = 1) -> TriMesh:
    """Reflect a mesh through x_axis -> -x_axis (axis=1 flips x2).

    Vertex numbering is kept; triangles are reordered to stay counterclockwise.
    """
    flip = np.ones(2)
    flip[axis] = -1.0
    return TriMesh(vertices=mesh.vertices * flip,
                   triangles=mesh.triangles[:, [0, 2, 1]],
                   boundary_edges=mesh.boundary_edges[:, ::-1],
                   boundary_tags=mesh.boundary_tags,
                   vertex_flags=mesh.vertex_flags,
                   mesh_id=f"{mesh.mesh_id}-mirror{axis}",
                   r0=mesh.r0, r1=mesh.r1, hole_center=mesh.hole_center * flip,
                   n_theta=mesh.n_theta, n_layers=mesh.n_layers)


def reflect_about_hyperplane(point, s):
    """Reflection through the line x1 = s; works on (2,) or (n, 2) arrays."""
    x = np.array(point, dtype=float, copy=True)
    x[..., 0] = 2.0 * s - x[..., 0]
    return x


def write_mesh(mesh: TriMesh, fh):
    """Plain-text dump: ``V T BE`` header, then vertices, triangles, edges."""
    fh.write(f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}\n")
    for (x, y), f in zip(mesh.vertices.tolist(), mesh.vertex_flags.tolist()):
        fh.write(f"{x:.17g} {y:.17g} {FLAG_NAMES[f]}\n")
    for i, j, k in mesh.triangles.tolist():
        fh.write(f"{i} {j} {k}\n")
    for (i, j), tag in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist()):
        fh.write(f"{i} {j} {TAG_NAMES[tag]}\n")


def read_mesh(fh, r0, r1, hole_center=(0.0, 0.0)) -> TriMesh:
    """Inverse of :func:`write_mesh`; the circle data is not in the file."""
    nv, nt, nb = (int(x) for x in fh.readline().split())
    flag_codes = {v: k for k, v in FLAG_NAMES.items()}
    tag_codes = {v: k for k, v in TAG_NAMES.items()}
    verts, flags = [], []
    for _ in range(nv):
        x, y, f = fh.readline().split()
        verts.append((float(x), float(y)))
        flags.append(flag_codes[f])
    tris = [tuple(int(i) for i in fh.readline().split()) for _ in range(nt)]
    edges, tags = [], []
    for _ in range(nb):
        i, j, tag = fh.readline().split()
        edges.append((int(i), int(j)))
        tags.append(tag_codes[tag])
    return TriMesh(vertices=np.array(verts), triangles=np.array(tris, dtype=np.intp),
                   boundary_edges=np.array(edges, dtype=np.intp),
                   boundary_tags=np.array(tags), vertex_flags=np.array(flags, dtype=np.int8),
                   mesh_id=_mesh_id("file", nv, nt, nb), r0=r0, r1=r1,
                   hole_center=np.asarray(hole_center, dtype=float))
