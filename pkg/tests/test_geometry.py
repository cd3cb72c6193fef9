import io

import numpy as np
import pytest

from plapshape import geometry as g
from plapshape.errors import GeometryError, MeshQualityError, TagNotFound

from conftest import annulus


@pytest.mark.parametrize("r0,r1,s", [(0.0, 1.0, 0.0), (0.5, 0.4, 0.0), (0.3, 1.0, 0.7),
                                     (0.3, 1.0, -0.1), (0.3, 1.0, 0.8)])
def test_domain_rejects_bad_parameters(r0, r1, s):
    with pytest.raises(GeometryError):
        g.AnnularDomain(r0, r1, s)


def test_coarse_counts():
    m = annulus(0.0, 8, 2)
    assert (m.n_vertices, m.n_triangles) == (24, 32)
    tags = m.boundary_tags
    assert np.sum(tags == g.INNER) == 8 and np.sum(tags == g.OUTER) == 8


@pytest.mark.parametrize("s", [0.0, 0.3, 0.5])
def test_orientation_and_topology(s):
    m = annulus(s, 64, 16)
    assert np.all(m.signed_areas() > 0)
    assert m.euler_characteristic() == 0


def test_edge_incidence():
    m = annulus(0.3, 32, 8)
    tri = m.triangles
    e = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    assert set(counts.tolist()) <= {1, 2}
    assert np.sum(counts == 1) == len(m.boundary_edges)
    be = {tuple(sorted(x)) for x in m.boundary_edges.tolist()}
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    assert be == {tuple(x) for x in uniq[counts == 1].tolist()}


@pytest.mark.parametrize("s", [0.0, 0.25, 0.6])
def test_boundary_vertices_on_circles(s):
    m = annulus(s, 64, 16)
    v = m.vertices
    inner = m.vertex_flags == g.INNER
    outer = m.vertex_flags == g.OUTER
    assert np.max(np.abs(np.linalg.norm(v[inner] - [s, 0], axis=1) - 0.3)) <= 1e-12
    assert np.max(np.abs(np.linalg.norm(v[outer], axis=1) - 1.0)) <= 1e-12


def test_area_converges():
    exact = np.pi * 0.91
    errs = [abs(annulus(0.0, n, n // 4).total_area() - exact) / exact for n in (32, 64, 128)]
    assert errs[2] <= 5e-3
    assert errs[0] / errs[1] >= 2 and errs[1] / errs[2] >= 2


def test_inner_perimeter_second_order():
    errs = []
    for n in (32, 64, 128):
        m = annulus(0.2, n, 8)
        e = m.boundary_edges[m.edges_with_tag(g.INNER)]
        L = np.linalg.norm(m.vertices[e[:, 0]] - m.vertices[e[:, 1]], axis=1).sum()
        errs.append(abs(L - 2 * np.pi * 0.3) / (2 * np.pi * 0.3))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_injective_across_offsets():
    for s in np.linspace(0.0, 0.95 * 0.7, 12):
        m = g.build_annulus_mesh(g.AnnularDomain(0.3, 1.0, float(s)), 64, 16)
        assert m.signed_areas().min() > 0


def test_rejects_near_degenerate_offset():
    with pytest.raises(MeshQualityError):
        g.build_annulus_mesh(g.AnnularDomain(0.3, 1.0, 0.69), 64, 16)


def test_quality_reported():
    q = annulus(0.5, 64, 16).quality()
    assert 0 < q.min_angle < 90 and q.min_area > 0 and q.max_aspect_ratio >= 1


def test_mesh_is_immutable():
    m = annulus(0.0, 8, 2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


def test_mirror_keeps_orientation():
    m = annulus(0.3, 32, 8)
    for axis in (0, 1):
        mm = g.mirror_mesh(m, axis)
        assert np.all(mm.signed_areas() > 0)
        assert np.allclose(mm.signed_areas(), m.signed_areas(), rtol=0, atol=1e-15)


def test_missing_tag():
    m = annulus(0.0, 8, 2)
    with pytest.raises(TagNotFound):
        m.edges_with_tag(7)


def test_reflection():
    assert np.allclose(g.reflect_about_hyperplane((0.2, 0.7), 0.2), (0.2, 0.7))
    assert np.allclose(g.reflect_about_hyperplane((0.9, 0.1), 0.2), (-0.5, 0.1))
    x = np.random.default_rng(0).normal(size=(50, 2))
    assert np.allclose(g.reflect_about_hyperplane(g.reflect_about_hyperplane(x, 0.37), 0.37), x)


def test_dump_round_trip():
    m = annulus(0.3, 16, 4)
    buf = io.StringIO()
    g.write_mesh(m, buf)
    text = buf.getvalue()
    header = text.splitlines()[0].split()
    assert list(map(int, header)) == [m.n_vertices, m.n_triangles, len(m.boundary_edges)]
    back = g.read_mesh(io.StringIO(text), 0.3, 1.0, (0.3, 0.0))
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.boundary_edges, m.boundary_edges)
    assert np.array_equal(back.boundary_tags, m.boundary_tags)
    assert np.array_equal(back.vertex_flags, m.vertex_flags)
