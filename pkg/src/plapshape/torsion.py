"""p-torsion problem  -div(|grad y|^(p-2) grad y) = 1,  y = 0 on the boundary.

Solved as minimization of the discrete energy

    J(u) = (1/p) sum_T |T| ((eps^2 + |grad u|^2)^(p/2) - eps^p) - b . u

by damped Newton with continuation in the regularization eps.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .errors import DegenerateJacobian, LinearSolveFailure, NonConvergence
from .operator import check_p

log = logging.getLogger(__name__)

DEFAULT_EPS_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-10
    eps_schedule: tuple = DEFAULT_EPS_SCHEDULE
    max_newton_per_eps: int = 60
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    max_backtracks: int = 30
    polish: bool = True           # extra eps = 0 stage when p >= 2

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        sched = tuple(float(e) for e in self.eps_schedule)
        if not sched or any(b >= a for a, b in zip(sched, sched[1:])) or sched[-1] < 0:
            raise ValueError("eps_schedule must be strictly decreasing and end >= 0")
        object.__setattr__(self, "eps_schedule", sched)
        if not (0 < self.armijo_c < 1 and 0 < self.armijo_shrink < 1):
            raise ValueError("Armijo parameters must lie in (0, 1)")

    def stages(self, p):
        sched = list(self.eps_schedule)
        if self.polish and p >= 2.0 and sched[-1] > 0.0:
            sched.append(0.0)
        if p < 2.0 and sched[-1] == 0.0:
            raise DegenerateJacobian("eps = 0 stage requested with p < 2")
        return sched


@dataclass
class NewtonResult:
    u: np.ndarray
    eps: float
    iterations: int
    residual: float
    energies: list = field(default_factory=list)   # per accepted step, per stage


@dataclass
class TorsionSolution:
    field: np.ndarray
    final_eps: float
    newton_iterations: int
    residual_norm: float
    mesh_id: str = ""
    energy_history: list = field(default_factory=list)


def _roundoff(*vals):
    return 1e-13 * max(1.0, *(abs(v) for v in vals))


def minimize_energy(mesh, p, b, u0, settings: SolverSettings, stages=None,
                    tol=None) -> NewtonResult:
    """Damped Newton on the regularized energy for a fixed load vector ``b``.

    ``stages`` is the eps continuation (defaults to ``settings.stages(p)``);
    every stage is driven to relative residual ``tol``.
    """
    V = fem.space(mesh)
    tol = settings.tol if tol is None else tol
    stages = settings.stages(p) if stages is None else list(stages)
    u = np.array(u0, dtype=float)
    u[mesh.boundary_mask] = 0.0
    bnorm = np.linalg.norm(b[V.free])
    if bnorm == 0.0:
        bnorm = 1.0
    total_its = 0
    energies = []
    rel = np.inf
    for eps in stages:
        stage_energies = []
        J0 = fem.discrete_energy(mesh, u, p, eps, b)
        stage_energies.append(J0)
        for it in range(settings.max_newton_per_eps + 1):
            r, A = fem.residual_and_jacobian(mesh, u, p, eps, b)
            rel = np.linalg.norm(r) / bnorm
            if rel <= tol:
                break
            if it == settings.max_newton_per_eps:
                raise NonConvergence(
                    f"Newton budget exhausted at eps={eps:g} (residual {rel:.3e})",
                    best=u, residual=rel)
            lin_tol = min(1e-2, max(1e-13, 1e-3 * rel))
            try:
                step = fem.solve_spd(A, -r, lin_tol)
            except LinearSolveFailure as exc:
                raise NonConvergence(str(exc), best=u, residual=rel) from exc
            full = np.zeros_like(u)
            full[V.free] = step
            slope = float(r @ step)
            t = 1.0
            accepted = False
            for _bt in range(settings.max_backtracks + 1):
                trial = u + t * full
                J1 = fem.discrete_energy(mesh, trial, p, eps, b)
                if J1 <= J0 + settings.armijo_c * t * slope + _roundoff(J0):
                    accepted = True
                    break
                t *= settings.armijo_shrink
            if not accepted:
                raise NonConvergence(
                    f"line search failed at eps={eps:g} (residual {rel:.3e})",
                    best=u, residual=rel)
            u, J0 = trial, J1
            stage_energies.append(J0)
            total_its += 1
        energies.append(stage_energies)
        log.debug("eps=%g converged: residual %.2e after %d steps", eps, rel,
                  len(stage_energies) - 1)
    return NewtonResult(u=u, eps=stages[-1], iterations=total_its, residual=rel,
                        energies=energies)


def linear_initial_guess(mesh, b):
    """Solution of the p = 2 problem for load ``b``: one exact Newton step."""
    V = fem.space(mesh)
    zeros = np.zeros(mesh.n_vertices)
    r, A = fem.residual_and_jacobian(mesh, zeros, 2.0, 0.0, b)
    u = zeros.copy()
    u[V.free] = fem.solve_spd(A, -r, 1e-13)
    return u


def solve_torsion(mesh, p, settings: SolverSettings | None = None) -> TorsionSolution:
    """Discrete p-torsion function on ``mesh``.

    Parameters
    ----------
    mesh : TriMesh
    p : float
        Exponent in [1.05, 10].
    settings : SolverSettings, optional

    Returns
    -------
    TorsionSolution
        Minimizer at the last eps of the continuation (eps = 0 when p >= 2).

    Raises
    ------
    NonConvergence
        Iteration budget exhausted; ``exc.best`` holds the last iterate.
    """
    p = check_p(p)
    settings = settings or SolverSettings()
    stages = settings.stages(p)
    b = fem.load_vector(mesh, 1.0)
    u0 = linear_initial_guess(mesh, b)
    res = minimize_energy(mesh, p, b, u0, settings, stages)
    return TorsionSolution(field=res.u, final_eps=res.eps, newton_iterations=res.iterations,
                           residual_norm=res.residual, mesh_id=mesh.mesh_id,
                           energy_history=res.energies)


def torsional_rigidity(mesh, sol, p):
    """(E_grad, E_load) = (int |grad y|^p, int y); equal for the exact solution."""
    V = fem.space(mesh)
    y = sol.field if hasattr(sol, "field") else sol
    g = fem.p1_gradient(mesh, y)
    e_grad = float(np.sum(V.areas * np.einsum("td,td->t", g, g) ** (0.5 * p)))
    return e_grad, fem.integral(mesh, y)
