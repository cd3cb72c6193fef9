"""Finite element p-Laplacian torsion and eigenvalue solvers on punctured
disks, with shape-derivative and monotonicity checks for offset holes."""
from .errors import (BracketFailure, ConfigError, DegenerateJacobian, GeometryError,
                     InsufficientRecords, LinearSolveFailure, MeshQualityError,
                     NonConvergence, PlapError, PointLocationFailure, TagNotFound, ZeroField)
from .geometry import AnnularDomain, TriMesh, build_annulus_mesh, mirror_mesh
from .torsion import SolverSettings, solve_torsion, torsional_rigidity
from .eigen import rayleigh_quotient, solve_first_eigenpair
from .sweep import SweepConfig, SweepRecord, run_sweep, verify_theorems

__version__ = "0.1.0"
