"""First Dirichlet eigenpair of the p-Laplacian by nonlinear inverse power
iteration: given u_k with unit L^p norm and lambda_k = R(u_k), solve

    -Delta_p u = lambda_k |u_k|^(p-2) u_k,   u = 0 on the boundary,

normalize, repeat.  Each step is an energy minimization, so R(u_k) does not
increase.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .errors import NonConvergence, ZeroField
from .operator import check_p
from .torsion import SolverSettings, minimize_energy, solve_torsion, torsional_rigidity

log = logging.getLogger(__name__)


@dataclass
class EigenPair:
    lambda1: float
    field: np.ndarray
    iterations: int
    rq_residual: float
    mesh_id: str = ""
    lambda_history: list = field(default_factory=list)
    newton_iterations: int = 0


def lp_norm_p(mesh, u, p):
    return fem.integrate_field(mesh, u, p)


def rayleigh_quotient(mesh, u, p):
    """int |grad u|^p / int |u|^p for a P1 field vanishing on the boundary."""
    den = lp_norm_p(mesh, u, p)
    if not den > 1e-300:
        raise ZeroField("field has vanishing L^p norm")
    num, _ = torsional_rigidity(mesh, u, p)
    return num / den


def normalize(mesh, u, p):
    return u / lp_norm_p(mesh, u, p) ** (1.0 / p)


def solve_first_eigenpair(mesh, p, settings: SolverSettings | None = None,
                          tol=1e-8, max_iter=1000) -> EigenPair:
    """Principal eigenvalue and positive eigenfunction with unit L^p norm.

    Parameters
    ----------
    mesh : TriMesh
    p : float
    settings : SolverSettings, optional
        Newton settings for the torsion start and the inner solves.
    tol : float
        Stop once the relative change of lambda is <= tol and the last inner
        solve reached ``settings.tol``.
    max_iter : int
        Outer iteration budget.
    """
    p = check_p(p)
    settings = settings or SolverSettings()
    final_eps = settings.stages(p)[-1]
    tors = solve_torsion(mesh, p, settings)
    u = normalize(mesh, tors.field, p)
    lam = rayleigh_quotient(mesh, u, p)
    history = [lam]
    newton = tors.newton_iterations
    change = np.inf
    sub_tol = max(settings.tol, 1e-6)
    for k in range(1, max_iter + 1):
        b = lam * fem.power_load_vector(mesh, u, p)
        try:
            res = minimize_energy(mesh, p, b, u, settings, stages=[final_eps], tol=sub_tol)
        except NonConvergence:
            # cold restart through the continuation if the warm start failed
            res = minimize_energy(mesh, p, b, u, settings, tol=sub_tol)
        newton += res.iterations
        u_new = normalize(mesh, res.u, p)
        lam_new = rayleigh_quotient(mesh, u_new, p)
        change = abs(lam_new - lam)
        history.append(lam_new)
        u, lam = u_new, lam_new
        if change <= tol * lam and sub_tol <= settings.tol:
            break
        # tighten the inner tolerance geometrically as lambda settles
        sub_tol = max(settings.tol, min(sub_tol, 1e-3 * change / lam))
    else:
        raise NonConvergence(f"inverse power iteration: relative change "
                             f"{change / lam:.3e} after {max_iter} steps",
                             best=EigenPair(lam, u, max_iter, change, mesh.mesh_id, history),
                             residual=change)
    log.debug("lambda1=%.12g after %d outer / %d Newton steps", lam, k, newton)
    return EigenPair(lambda1=lam, field=u, iterations=k, rq_residual=change,
                     mesh_id=mesh.mesh_id, lambda_history=history, newton_iterations=newton)
