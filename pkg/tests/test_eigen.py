import numpy as np
import pytest

from plapshape import eigen, fem, geometry as g, radial
from plapshape.errors import ZeroField

from conftest import annulus, eigen_solution, torsion_solution


def test_rayleigh_homogeneity():
    m = annulus(0.3)
    y = torsion_solution(2.5, 0.3).field
    for p in (1.5, 2.5):
        R = eigen.rayleigh_quotient(m, y, p)
        for c in (-3.0, 0.5, 10.0):
            assert eigen.rayleigh_quotient(m, c * y, p) == pytest.approx(R, rel=1e-12)
    with pytest.raises(ZeroField):
        eigen.rayleigh_quotient(m, np.zeros(m.n_vertices), 2.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_eigenpair_contract(p):
    m = annulus(0.3)
    pair = eigen_solution(p, 0.3)
    assert eigen.lp_norm_p(m, pair.field, p) == pytest.approx(1.0, rel=1e-12)
    assert eigen.rayleigh_quotient(m, pair.field, p) == pytest.approx(pair.lambda1, rel=1e-12)
    assert pair.rq_residual <= 1e-8 * pair.lambda1
    hist = np.array(pair.lambda_history)
    assert np.all(np.diff(hist) <= 1e-12 * hist[:-1])
    assert pair.field[m.free_vertices].min() > 0


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_concentric_eigenfield_symmetric(p):
    m = annulus(0.0)
    u = eigen_solution(p, 0.0).field
    v = m.vertices
    mirrored = np.array([-1.0, 1.0]) * v
    # structured mesh: find the vertex at the mirrored position
    order = np.lexsort((np.round(v[:, 1], 12), np.round(v[:, 0], 12)))
    target = np.lexsort((np.round(mirrored[:, 1], 12), np.round(mirrored[:, 0], 12)))
    assert np.allclose(v[order], mirrored[target], atol=1e-12)
    assert np.max(np.abs(u[order] - u[target])) <= 1e-6


def test_p2_matches_bessel():
    pair = eigen.solve_first_eigenpair(annulus(0.0, 128, 48), 2.0)
    assert abs(pair.lambda1 - radial.bessel_annulus_eigenvalue(0.3, 1.0)) <= 1e-2 * pair.lambda1


def test_lambda_decreases_with_smaller_hole():
    lam = [eigen.solve_first_eigenpair(annulus(0.0, 64, 24, r0=r0), 2.0).lambda1
           for r0 in (0.4, 0.3, 0.2)]
    assert lam[0] > lam[1] > lam[2]
