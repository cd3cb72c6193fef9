import numpy as np
import pytest
import scipy.sparse as sp
import scipy.linalg as sla

from plapshape import fem, geometry as g
from plapshape.errors import DegenerateJacobian, LinearSolveFailure

from conftest import annulus, torsion_solution


def laplace_system(mesh):
    """Independent P1 stiffness and mass assembly, one triangle at a time."""
    n = mesh.n_vertices
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    for t in mesh.triangles:
        x = mesh.vertices[t]
        B = np.array([x[1] - x[0], x[2] - x[0]]).T
        area = 0.5 * abs(np.linalg.det(B))
        G = np.linalg.solve(B.T, np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]]))
        K[np.ix_(t, t)] += area * G.T @ G
        M[np.ix_(t, t)] += area / 12.0 * (np.ones((3, 3)) + np.eye(3))
    return K, M


def test_quadrature_degree_five():
    # int over the reference triangle of x^a y^b = a! b! / (a + b + 2)!
    from math import factorial
    w, bary = fem.QUAD_WEIGHTS, fem.QUAD_BARY
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    x, y = bary[:, 1], bary[:, 2]
    for a in range(6):
        for b in range(6 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            assert 0.5 * np.sum(w * x ** a * y ** b) == pytest.approx(exact, rel=1e-13)


def test_gradient_of_linear_fields():
    m = annulus(0.3, 32, 8)
    x1, x2 = m.vertices.T
    assert np.allclose(fem.p1_gradient(m, x1), [1, 0], atol=1e-12)
    assert np.allclose(fem.p1_gradient(m, np.full(m.n_vertices, 4.0)), 0, atol=1e-12)
    grad = fem.p1_gradient(m, 3 * x1 - 2 * x2 + 5)
    assert np.allclose(grad, [3, -2], atol=1e-11)
    assert np.allclose(fem.p1_gradient(m, x1, 7), [1, 0])


def test_integrals():
    m = annulus(0.0, 64, 16)
    area = m.total_area()
    assert fem.integrate_field(m, np.ones(m.n_vertices), 1.0) == pytest.approx(area, rel=1e-14)
    assert fem.integrate_field(m, np.full(m.n_vertices, 2.0), 3.0) == pytest.approx(8 * area, rel=1e-13)
    assert abs(fem.integrate_field(m, m.vertices[:, 0], 1.0)) <= 1e-3
    with pytest.raises(ValueError):
        fem.integrate_field(m, np.ones(m.n_vertices), 0.5)


def test_power_integral_exact_for_polynomials():
    # |u|^2 with u linear is a quadratic: the rule is exact
    m = annulus(0.2, 16, 4)
    u = 1.0 + m.vertices[:, 0]
    _, M = laplace_system(m)
    assert fem.integrate_field(m, u, 2.0) == pytest.approx(u @ M @ u, rel=1e-13)


def test_power_load_consistent_with_norm(rng):
    m = annulus(0.3, 32, 8)
    u = rng.random(m.n_vertices) - 0.3
    for p in (1.5, 2.0, 3.7):
        assert fem.power_load_vector(m, u, p) @ u == pytest.approx(fem.integrate_field(m, u, p), rel=1e-13)


def test_zero_residual_for_zero_data():
    m = annulus(0.0, 16, 4)
    r = fem.assemble_residual(m, np.zeros(m.n_vertices), 3.0, 0.0, 0.0)
    assert np.all(r == 0)


def test_residual_matches_laplace(rng):
    m = annulus(0.3, 16, 4)
    K, M = laplace_system(m)
    u = rng.random(m.n_vertices)
    u[m.boundary_mask] = 0.0
    f = rng.random(m.n_vertices)
    free = m.free_vertices
    r = fem.assemble_residual(m, u, 2.0, 0.0, f, fem.DirichletMask.homogeneous(m))
    assert np.allclose(r, (K @ u - M @ f)[free], rtol=0, atol=1e-12)
    J = fem.assemble_jacobian(m, rng.random(m.n_vertices), 2.0, 0.0).toarray()
    assert np.allclose(J, K[np.ix_(free, free)], atol=1e-12)


def test_jacobian_symmetric_and_spd(rng):
    m = annulus(0.0, 8, 2)
    u = rng.random(m.n_vertices)
    J = fem.assemble_jacobian(m, u, 3.0, 1e-4)
    assert abs(J - J.T).max() == 0.0
    assert np.linalg.eigvalsh(J.toarray()).min() > 0


@pytest.mark.parametrize("p,eps", [(3.0, 1e-4), (1.5, 1e-3), (2.0, 0.0), (4.5, 0.0)])
def test_jacobian_directional_fd(rng, p, eps):
    m = annulus(0.2, 16, 4)
    u = rng.random(m.n_vertices)
    u[m.boundary_mask] = 0.0
    d = np.zeros(m.n_vertices)
    d[m.free_vertices] = rng.normal(size=len(m.free_vertices))
    b = fem.load_vector(m, 1.0)
    h = 1e-6
    fd = (fem.residual_vector(m, u + h * d, p, eps, b) - fem.residual_vector(m, u - h * d, p, eps, b)) / (2 * h)
    _, J = fem.residual_and_jacobian(m, u, p, eps, b)
    Jd = J @ d[m.free_vertices]
    assert np.linalg.norm(fd - Jd) <= 1e-5 * np.linalg.norm(Jd)


@pytest.mark.parametrize("p,eps", [(3.0, 0.0), (1.5, 1e-3), (2.0, 0.0)])
def test_residual_is_energy_gradient(rng, p, eps):
    m = annulus(0.2, 16, 4)
    u = rng.random(m.n_vertices)
    u[m.boundary_mask] = 0.0
    b = fem.load_vector(m, 1.0)
    r = fem.residual_vector(m, u, p, eps, b)
    d = np.zeros(m.n_vertices)
    d[m.free_vertices] = rng.normal(size=len(m.free_vertices))
    h = 1e-6
    fd = (fem.discrete_energy(m, u + h * d, p, eps, b) - fem.discrete_energy(m, u - h * d, p, eps, b)) / (2 * h)
    assert fd == pytest.approx(r @ d[m.free_vertices], rel=1e-6)


def test_degenerate_guard():
    m = annulus(0.0, 8, 2)
    with pytest.raises(DegenerateJacobian):
        fem.residual_and_jacobian(m, np.zeros(m.n_vertices), 1.5, 0.0, np.zeros(m.n_vertices))


def test_mask_contract():
    m = annulus(0.0, 8, 2)
    bad = fem.DirichletMask(np.zeros(m.n_vertices, bool), np.zeros(m.n_vertices))
    with pytest.raises(ValueError):
        fem.assemble_residual(m, np.zeros(m.n_vertices), 2.0, 0.0, 1.0, bad)


def test_solve_spd_small_cases():
    assert np.allclose(fem.solve_spd(sp.eye(5), np.arange(5.0), 1e-12), np.arange(5.0))
    assert np.allclose(fem.solve_spd(sp.diags([2.0, 4.0]), np.array([2.0, 4.0]), 1e-12), [1, 1])


def test_solve_spd_matches_lu(rng):
    m = annulus(0.3, 32, 8)
    K, _ = laplace_system(m)
    free = m.free_vertices
    A = K[np.ix_(free, free)]
    rhs = rng.normal(size=len(free))
    x = fem.solve_spd(sp.csr_matrix(A), rhs, 1e-13)
    ref = sla.lu_solve(sla.lu_factor(A), rhs)
    assert np.linalg.norm(x - ref) <= 1e-8 * np.linalg.norm(ref)


def test_solve_spd_cap():
    A = sp.diags(np.linspace(1, 1e8, 400))
    with pytest.raises(LinearSolveFailure) as info:
        fem.solve_spd(A @ sp.random(400, 400, density=0.05, random_state=0) + sp.eye(400) * 1.0,
                      np.ones(400), 1e-14, maxiter=3)
    assert info.value.iterations == 3


def test_discrete_euler_identity():
    m = annulus(0.0, 64, 24)
    sol = torsion_solution(2.0)
    V = fem.space(m)
    grad = fem.p1_gradient(m, sol.field)
    lhs = float(np.sum(V.areas * np.einsum("td,td->t", grad, grad)))
    assert abs(lhs - fem.integral(m, sol.field)) / lhs <= 10 * 1e-10
