"""Offset sweeps over Omega(s) = B(0, r1) minus B(s e1, r0) and the
verification of the monotonicity theorems on the resulting records."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import eigen, shape, torsion
from .errors import ConfigError, InsufficientRecords, PlapError
from .geometry import INNER, MAX_OFFSET_FRACTION, OUTER, AnnularDomain, build_annulus_mesh, mirror_mesh
from .operator import P_MAX, P_MIN

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepConfig:
    """One sweep of the hole offset.

    ``s_values`` is the uniform grid ``linspace(s_start, s_end, s_steps)``.
    ``direction = -1`` moves the hole along -e1 by mirroring every mesh; the
    records keep the offset magnitude in ``s``.
    """
    p: float = 2.0
    r0: float = 0.3
    r1: float = 1.0
    s_start: float = 0.0
    s_end: float = 0.6
    s_steps: int = 7
    n_theta: int = 128
    n_layers: int = 48
    tol: float = 1e-10
    eig_tol: float = 1e-8
    fd_step: float | None = None        # default 0.01 (r1 - r0)
    mono_rel: float = 1e-6
    symmetry_rel: float = 1e-3
    direction: int = 1
    out: str | None = None
    format: str = "csv"
    timing: bool = False                # record wall times (breaks byte-identical output)

    def __post_init__(self):
        if self.fd_step is None:
            object.__setattr__(self, "fd_step", 0.01 * (self.r1 - self.r0))
        self.validate()

    def validate(self):
        if not (P_MIN <= self.p <= P_MAX):
            raise ConfigError(f"p must lie in [{P_MIN}, {P_MAX}], got {self.p}")
        if not (0.0 < self.r0 < self.r1):
            raise ConfigError("need 0 < r0 < r1")
        if int(self.s_steps) != self.s_steps or self.s_steps < 1:
            raise ConfigError("s_steps must be a positive integer")
        if not (0.0 <= self.s_start <= self.s_end):
            raise ConfigError("need 0 <= s_start <= s_end")
        if self.s_steps > 1 and self.s_end == self.s_start:
            raise ConfigError("s_end must exceed s_start when s_steps > 1")
        if not self.s_end < self.r1 - self.r0:
            raise ConfigError("s_end must be below r1 - r0")
        if not self.fd_step > 0:
            raise ConfigError("fd_step must be positive")
        if self.s_steps > 1 and not self.fd_step < self.spacing:
            raise ConfigError(f"fd_step {self.fd_step} must be below the grid spacing {self.spacing}")
        if self.s_end + self.fd_step > MAX_OFFSET_FRACTION * (self.r1 - self.r0):
            raise ConfigError("s_end + fd_step exceeds the meshable offset range")
        if self.n_theta < 8 or self.n_theta % 4 or self.n_layers < 2:
            raise ConfigError("need n_theta >= 8 divisible by 4 and n_layers >= 2")
        if not (self.tol > 0 and self.eig_tol > 0 and self.mono_rel >= 0 and self.symmetry_rel >= 0):
            raise ConfigError("tolerances must be positive")
        if self.direction not in (1, -1):
            raise ConfigError("direction must be +1 or -1")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")

    @property
    def spacing(self):
        return (self.s_end - self.s_start) / (self.s_steps - 1) if self.s_steps > 1 else math.inf

    @property
    def s_values(self):
        # rounded so that 0.1 prints as 0.1 rather than 0.09999999999999999
        return [round(float(s), 12) for s in np.linspace(self.s_start, self.s_end, int(self.s_steps))]

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class SweepRecord:
    """Everything measured at one offset.

    Reflection gaps are relative to the maximum of the field.  The inner
    flux entries hold the largest (closest to zero) normal derivative on the
    hole boundary, so a negative value means every edge flux is negative.
    At s = 0 the finite differences are zero by evenness and are not solved,
    and the Pucci-Serrin ratio is ill-conditioned there because all four
    terms vanish by symmetry.
    """
    s: float
    E: float
    lambda1: float
    dE_hadamard: float
    dE_fd: float
    dlam_hadamard: float
    dlam_fd: float
    E_grad_load_gap: float
    pucci_serrin_rel_residual: float
    reflection_min_gap_torsion: float
    reflection_min_gap_eigen: float
    min_inner_flux_torsion: float
    min_inner_flux_eigen: float
    solver_iterations: int
    wall_time: float


FIELDS = [f.name for f in dataclasses.fields(SweepRecord)]


@dataclass
class Check:
    passed: bool
    witness: str


@dataclass
class VerificationSummary:
    monotone_torsion: Check
    monotone_eigen: Check
    argmin_j: Check
    argmax_j1: Check
    derivative_sign_torsion: Check
    derivative_sign_eigen: Check
    symmetry_at_zero: Check
    inconclusive: bool = False
    failures: list = field(default_factory=list)

    CHECKS = ("monotone_torsion", "monotone_eigen", "argmin_j", "argmax_j1",
              "derivative_sign_torsion", "derivative_sign_eigen", "symmetry_at_zero")

    @property
    def passed(self):
        return not self.inconclusive and all(getattr(self, c).passed for c in self.CHECKS)

    def lines(self):
        out = [f"{c}: {'PASS' if getattr(self, c).passed else 'FAIL'} ({getattr(self, c).witness})"
               for c in self.CHECKS]
        if self.failures:
            out.append("sweep incomplete: " + "; ".join(self.failures))
        out.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return out

    def to_dict(self):
        d = {c: dataclasses.asdict(getattr(self, c)) for c in self.CHECKS}
        d.update(inconclusive=self.inconclusive, failures=list(self.failures), passed=self.passed)
        return d


# --------------------------------------------------------------------------- solves

def _mesh(cfg: SweepConfig, s):
    mesh = build_annulus_mesh(AnnularDomain(cfg.r0, cfg.r1, s), cfg.n_theta, cfg.n_layers)
    return mirror_mesh(mesh, axis=0) if cfg.direction < 0 else mesh


def _solve_pair(cfg, s, settings):
    mesh = _mesh(cfg, s)
    tors = torsion.solve_torsion(mesh, cfg.p, settings)
    eig = eigen.solve_first_eigenpair(mesh, cfg.p, settings, tol=cfg.eig_tol)
    return mesh, tors, eig


def compute_record(cfg: SweepConfig, s) -> SweepRecord:
    t0 = time.perf_counter()
    settings = torsion.SolverSettings(tol=cfg.tol)
    p, d = cfg.p, float(cfg.direction)
    mesh, tors, eig = _solve_pair(cfg, s, settings)
    iters = tors.newton_iterations + eig.newton_iterations
    y, y1 = tors.field, eig.field
    e_grad, e_load = torsion.torsional_rigidity(mesh, tors, p)

    eps_t, eps_e = tors.final_eps, settings.stages(p)[-1]
    ft = shape.torsion_flux(mesh, y, p, eps=eps_t)
    fe = shape.eigen_flux(mesh, y1, eig.lambda1, p, eps=eps_e)
    ft_out = shape.torsion_flux(mesh, y, p, eps=eps_t, tag=OUTER)
    res, scale = shape.pucci_serrin_residual(mesh, y, p, 1.0, flux=[ft, ft_out])

    c = float(mesh.hole_center[0])
    loc = shape.PointLocator(mesh)
    gap_t, _ = shape.reflection_comparison(mesh, y, c, loc, direction=d)
    gap_e, _ = shape.reflection_comparison(mesh, y1, c, loc, direction=d)

    if s > 0.0:
        h = cfg.fd_step
        m_plus, tp, ep = _solve_pair(cfg, s + h, settings)
        m_minus, tm, em = _solve_pair(cfg, s - h, settings)
        dE_fd = (torsion.torsional_rigidity(m_plus, tp, p)[1]
                 - torsion.torsional_rigidity(m_minus, tm, p)[1]) / (2 * h)
        dlam_fd = (ep.lambda1 - em.lambda1) / (2 * h)
        iters += tp.newton_iterations + ep.newton_iterations + tm.newton_iterations + em.newton_iterations
    else:
        dE_fd = dlam_fd = 0.0

    return SweepRecord(
        s=float(s), E=e_load, lambda1=eig.lambda1,
        dE_hadamard=shape.hadamard_torsion_derivative(ft, p, d),
        dE_fd=float(dE_fd),
        dlam_hadamard=shape.hadamard_eigen_derivative(fe, p, d),
        dlam_fd=float(dlam_fd),
        E_grad_load_gap=abs(e_grad - e_load) / e_load,
        pucci_serrin_rel_residual=res / scale,
        reflection_min_gap_torsion=gap_t / float(np.max(y)),
        reflection_min_gap_eigen=gap_e / float(np.max(y1)),
        min_inner_flux_torsion=float(np.max(ft.values)),
        min_inner_flux_eigen=float(np.max(fe.values)),
        solver_iterations=int(iters),
        wall_time=time.perf_counter() - t0 if cfg.timing else 0.0,
    )


def _worker(args):
    cfg, s = args
    try:
        return s, compute_record(cfg, s), None
    except PlapError as exc:
        return s, None, f"s={s:g}: {type(exc).__name__}: {exc}"


def worker_count():
    raw = os.environ.get("PLAP_THREADS", "").strip()
    if not raw:
        return 0
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"PLAP_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigError("PLAP_THREADS must be >= 0")
    return n


def run_sweep(config: SweepConfig):
    """Solve every offset of the sweep and verify the theorems.

    Parameters
    ----------
    config : SweepConfig

    Returns
    -------
    records : list of SweepRecord
        Sorted by s.  Offsets whose solves failed are missing.
    summary : VerificationSummary
        Marked inconclusive when any offset failed.
    """
    config.validate()
    jobs = [(config, s) for s in config.s_values]
    n = worker_count()
    if n > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as pool:
            results = list(pool.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]
    records = sorted((r for _, r, err in results if r is not None), key=lambda r: r.s)
    failures = [err for _, _, err in results if err is not None]
    for err in failures:
        log.warning("sweep point failed: %s", err)
    try:
        summary = verify_theorems(records, config)
    except InsufficientRecords as exc:
        summary = _empty_summary(str(exc))
    if failures:
        summary.inconclusive = True
        summary.failures = failures
    return records, summary


def _empty_summary(reason):
    c = Check(False, reason)
    return VerificationSummary(c, c, c, c, c, c, c, inconclusive=True)


# --------------------------------------------------------------------------- theorems

def verify_theorems(records, tolerances=None) -> VerificationSummary:
    """Check the monotonicity and optimality statements on sweep records.

    ``tolerances`` is anything with ``mono_rel`` and ``symmetry_rel``
    attributes (a SweepConfig works); defaults are 1e-6 and 1e-3.
    """
    records = list(records)
    if len(records) < 3:
        raise InsufficientRecords(f"need at least 3 records, got {len(records)}")
    s = np.array([r.s for r in records])
    if np.any(np.diff(s) <= 0):
        raise InsufficientRecords("records must be sorted by strictly increasing s")
    if s[0] != 0.0:
        raise InsufficientRecords("first record must sit at s = 0")
    mono_rel = getattr(tolerances, "mono_rel", 1e-6)
    sym_rel = getattr(tolerances, "symmetry_rel", 1e-3)
    j = np.array([r.E for r in records])
    j1 = np.array([r.lambda1 for r in records])
    dj = np.array([r.dE_hadamard for r in records])
    dj1 = np.array([r.dlam_hadamard for r in records])

    tol_j = mono_rel * abs(j[-1] - j[0])
    tol_j1 = mono_rel * abs(j1[-1] - j1[0])
    inc = np.diff(j)
    dec = np.diff(j1)
    mono_t = Check(bool(np.all(inc > -tol_j)),
                   f"min increment {inc.min():.3e} > -{tol_j:.3e}")
    mono_e = Check(bool(np.all(dec < tol_j1)),
                   f"max increment {dec.max():.3e} < {tol_j1:.3e}")
    k_min, k_max = int(np.argmin(j)), int(np.argmax(j1))
    argmin = Check(k_min == 0, f"argmin j at s={s[k_min]:g}")
    argmax = Check(k_max == 0, f"argmax j1 at s={s[k_max]:g}")
    pos = s > 0
    sign_t = Check(bool(np.all(dj[pos] >= 0)), f"min dE_hadamard {dj[pos].min():.3e} >= 0")
    sign_e = Check(bool(np.all(dj1[pos] <= 0)), f"max dlam_hadamard {dj1[pos].max():.3e} <= 0")
    lim_t = sym_rel * np.max(np.abs(dj[pos]))
    lim_e = sym_rel * np.max(np.abs(dj1[pos]))
    sym = Check(bool(abs(dj[0]) <= lim_t and abs(dj1[0]) <= lim_e),
                f"|dE(0)| {abs(dj[0]):.3e} <= {lim_t:.3e}, |dlam(0)| {abs(dj1[0]):.3e} <= {lim_e:.3e}")
    return VerificationSummary(mono_t, mono_e, argmin, argmax, sign_t, sign_e, sym)


# --------------------------------------------------------------------------- IO

def _fmt(value):
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for r in records:
        w.writerow([_fmt(getattr(r, f)) for f in FIELDS])
    return buf.getvalue()


def records_from_csv(text) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != FIELDS:
        raise ValueError("CSV header does not match the SweepRecord columns")
    out = []
    for row in rows[1:]:
        vals = {f: (int(v) if f == "solver_iterations" else float(v)) for f, v in zip(FIELDS, row)}
        out.append(SweepRecord(**vals))
    return out


def records_to_json(records, config=None, summary=None) -> str:
    doc = {"records": [dataclasses.asdict(r) for r in records]}
    if config is not None:
        doc["config"] = config.to_dict()
    if summary is not None:
        doc["summary"] = summary.to_dict()
    return json.dumps(doc, indent=2) + "\n"


def records_from_json(text) -> list:
    return [SweepRecord(**r) for r in json.loads(text)["records"]]


def write_report(records, config: SweepConfig, summary=None, path=None):
    """Serialize in ``config.format``; writes to ``path`` (or config.out) if given."""
    text = (records_to_csv(records) if config.format == "csv"
            else records_to_json(records, config, summary))
    path = path or config.out
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
