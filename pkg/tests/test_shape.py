import numpy as np
import pytest

from plapshape import fem, geometry as g, radial, shape
from plapshape.errors import PointLocationFailure, TagNotFound

from conftest import annulus, eigen_solution, torsion_solution


def test_linear_field_gradient_flux():
    m = annulus(0.3, 32, 8)
    fl = shape.boundary_normal_derivative(m, m.vertices[:, 0], g.INNER, method="gradient")
    assert np.allclose(fl.values, fl.n1, atol=1e-12)
    assert np.allclose(np.linalg.norm(fl.normals, axis=1), 1.0, atol=1e-12)
    # normals point from the edge toward the hole centre
    assert np.all(np.einsum("ij,ij->i", fl.normals, m.hole_center - fl.midpoints) > 0)


def test_unknown_tag_and_method():
    m = annulus(0.0, 8, 2)
    with pytest.raises(TagNotFound):
        shape.boundary_normal_derivative(m, np.zeros(m.n_vertices), 9, method="gradient")
    with pytest.raises(ValueError):
        shape.boundary_normal_derivative(m, np.zeros(m.n_vertices), method="spline")


@pytest.mark.parametrize("s", [0.0, 0.3, 0.55])
def test_closed_curve_normal_integral(s):
    m = annulus(s, 128, 8)
    fl = shape.boundary_normal_derivative(m, np.zeros(m.n_vertices), method="gradient")
    assert abs(np.sum(fl.n1 * fl.lengths)) <= 1e-12
    const = shape.BoundaryFlux(fl.edges, fl.midpoints, fl.normals, np.full(len(fl.values), -0.7),
                               fl.lengths)
    assert abs(shape.hadamard_torsion_derivative(const, 2.5)) <= 1e-12


def test_concentric_flux_matches_radial_slope():
    m = annulus(0.0, 128, 48)
    y = torsion_solution(2.0, 0.0, 128, 48).field
    fl = shape.torsion_flux(m, y, 2.0)
    slope = radial.annulus_torsion_profile(2.0, 2, 0.3, 1.0).slope_at(0.3)
    # outward normal points into the hole, i.e. along -r
    assert np.max(np.abs(fl.values + slope)) <= 0.02 * slope


def test_one_sided_flux_first_order():
    # the adjacent-triangle gradient is O(h) accurate at the wall: about 4%
    # at 48 layers, halving with every radial refinement
    slope = radial.annulus_torsion_profile(2.0, 2, 0.3, 1.0).slope_at(0.3)
    err = []
    for k in (24, 48):
        m = annulus(0.0, 128, k)
        y = torsion_solution(2.0, 0.0, 128, k).field
        fl = shape.torsion_flux(m, y, 2.0, method="gradient")
        err.append(np.max(np.abs(fl.values + slope)) / slope)
    assert 1.7 <= err[0] / err[1] <= 2.3


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_fluxes_negative(p):
    m = annulus(0.3)
    t = torsion_solution(p, 0.3)
    e = eigen_solution(p, 0.3)
    eps = 1e-8 if p < 2 else 0.0
    assert np.all(shape.torsion_flux(m, t.field, p, eps).values < 0)
    assert np.all(shape.eigen_flux(m, e.field, e.lambda1, p, eps).values < 0)


def test_hadamard_signs():
    m = annulus(0.3)
    t, e = torsion_solution(2.0, 0.3), eigen_solution(2.0, 0.3)
    assert shape.hadamard_torsion_derivative(shape.torsion_flux(m, t.field, 2.0), 2.0) > 0
    assert shape.hadamard_eigen_derivative(shape.eigen_flux(m, e.field, e.lambda1, 2.0), 2.0) < 0


def test_rho_profile_and_gradient(rng):
    m = annulus(0.3)
    V = shape.PerturbationField.for_mesh(m)
    x = rng.uniform(-1, 1, size=(500, 2))
    x = x[np.linalg.norm(x, axis=1) < 1.0]
    d = np.linalg.norm(x - [0.3, 0.0], axis=1)
    rho = V.rho(x)
    assert np.all(rho[d <= V.a] == 1.0)
    assert np.all(rho[np.linalg.norm(x, axis=1) >= V.b] == 0.0)
    assert np.all((rho >= 0) & (rho <= 1))
    h = 1e-6
    fd = np.stack([(V.rho(x + h * e) - V.rho(x - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
    keep = d > 1e-3
    assert np.max(np.abs(fd[keep] - V.grad_rho(x)[keep])) <= 1e-6


def test_zero_field_gives_zero_identity():
    m = annulus(0.3)
    V = shape.PerturbationField.for_mesh(m, zero=True)
    terms = shape.pucci_serrin_terms(m, torsion_solution(2.0, 0.3).field, 2.0, 1.0, V)
    assert terms == (0.0, 0.0, 0.0, 0.0) or max(abs(t) for t in terms) == 0.0
    res, _ = shape.pucci_serrin_residual(m, torsion_solution(2.0, 0.3).field, 2.0, 1.0, V)
    assert res == 0.0


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_identity_for_linear_field(p):
    # u = G.x + c solves the homogeneous equation (f = 0).  For it the
    # boundary side is  int rho (W n1 - G1 A(G).n) dS  over the hole, which
    # vanishes because rho = 1 there and the polygon normals integrate to 0;
    # so the volume terms must cancel up to quadrature error.
    m = annulus(0.3, 16, 4)
    G = np.array([0.7, -0.4])
    u = m.vertices @ G + 2.0
    V = shape.PerturbationField.for_mesh(m)
    _, t1, t2, t3 = shape.pucci_serrin_terms(m, u, p, 0.0, V, flux=[], levels=6)
    assert t3 == 0.0
    assert abs(t1) <= 1e-6 and abs(t2) <= 1e-6
    assert abs(t1 + t2) <= 1e-6


def test_identity_residual_refines():
    rel = []
    for n, k in ((32, 12), (64, 24)):
        m = annulus(0.3, n, k)
        y = torsion_solution(2.0, 0.3, n, k).field
        res, scale = shape.pucci_serrin_residual(m, y, 2.0, 1.0)
        rel.append(res / scale)
    assert rel[1] < rel[0] and rel[1] <= 0.05


def test_reflection_concentric():
    m = annulus(0.0)
    y = torsion_solution(2.0, 0.0).field
    gap, frac = shape.reflection_comparison(m, y, 0.0)
    assert abs(gap) <= 1e-6 * y.max() and frac == 0.0


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_reflection_inequality(p):
    m = annulus(0.3)
    for u in (torsion_solution(p, 0.3).field, eigen_solution(p, 0.3).field):
        gap, frac = shape.reflection_comparison(m, u, 0.3)
        assert gap >= -1e-3 * u.max() and frac == 0.0


def test_locator_rejects_far_points():
    m = annulus(0.3, 16, 4)
    loc = shape.PointLocator(m)
    tri, lam = loc.locate(np.array([[0.9, 0.1]]))
    assert lam.min() >= -1e-12
    with pytest.raises(PointLocationFailure):
        loc.locate(np.array([[1.5, 0.0]]))
    with pytest.raises(PointLocationFailure):
        loc.locate(np.array([[0.3, 0.0]]))     # hole centre


def test_locator_reproduces_linear_fields(rng):
    m = annulus(0.3, 32, 8)
    loc = shape.PointLocator(m)
    x = rng.uniform(-0.7, 0.7, size=(200, 2))
    x = x[np.linalg.norm(x - [0.3, 0], axis=1) > 0.32]
    u = 2 * m.vertices[:, 0] - m.vertices[:, 1]
    assert np.allclose(loc.evaluate(u, x), 2 * x[:, 0] - x[:, 1], atol=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_strict_flux_inequality(p):
    m = annulus(0.3)
    eps = 1e-8 if p < 2 else 0.0
    fl = shape.torsion_flux(m, torsion_solution(p, 0.3).field, p, eps)
    right, mirror = shape.mirrored_flux_pairs(m, fl)
    assert len(right) == m.n_theta // 2
    assert np.allclose(fl.midpoints[right], g.reflect_about_hyperplane(fl.midpoints[mirror], 0.3),
                       atol=1e-12)
    frac, margin = shape.strict_flux_inequality(m, fl)
    assert frac == 0.0


def test_mirrored_direction():
    m = g.mirror_mesh(annulus(0.3), axis=0)
    y = torsion_solution(2.0, 0.3).field    # numbering is shared with the mirror
    fl = shape.torsion_flux(m, y, 2.0)
    assert shape.hadamard_torsion_derivative(fl, 2.0, direction=-1) > 0
    gap, frac = shape.reflection_comparison(m, y, -0.3, direction=-1)
    assert gap >= -1e-3 * y.max() and frac == 0.0
    assert shape.strict_flux_inequality(m, fl, direction=-1)[0] == 0.0
