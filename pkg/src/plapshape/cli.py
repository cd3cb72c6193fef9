"""Command-line interface: ``plapshape {mesh,solve,eigen,oracle,sweep,verify}``.

Exit codes: 0 ok, 1 verification failed, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import eigen, radial, shape, sweep, torsion
from .errors import ConfigError, GeometryError, MeshQualityError, PlapError
from .geometry import AnnularDomain, build_annulus_mesh, write_mesh

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("plapshape")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _geometry_args(p, with_s=True):
    p.add_argument("--config", help="JSON file with option values; flags override it")
    p.add_argument("--p", type=float)
    p.add_argument("--r0", type=float)
    p.add_argument("--r1", type=float)
    if with_s:
        p.add_argument("--s", type=float)
    p.add_argument("--n-theta", dest="n_theta", type=int)
    p.add_argument("--n-layers", dest="n_layers", type=int)
    p.add_argument("--tol", type=float)


def build_parser():
    ap = _Parser(prog="plapshape", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("mesh", help="write the mesh dump of one Omega(s)")
    _geometry_args(m)
    m.add_argument("--out")

    for name, help_ in (("solve", "torsion problem on one Omega(s)"),
                        ("eigen", "first eigenpair on one Omega(s)")):
        c = sub.add_parser(name, help=help_)
        _geometry_args(c)

    o = sub.add_parser("oracle", help="radial profiles and constants as CSV")
    o.add_argument("--config")
    o.add_argument("--what", choices=["torsion", "eigen", "ball", "constants"])
    o.add_argument("--p", type=float)
    o.add_argument("--r0", type=float)
    o.add_argument("--r1", type=float)
    o.add_argument("--N", type=int)
    o.add_argument("--n-grid", dest="n_grid", type=int)
    o.add_argument("--out")

    for name, help_ in (("sweep", "full offset sweep, CSV or JSON report"),
                        ("verify", "sweep, then check the monotonicity theorems")):
        c = sub.add_parser(name, help=help_)
        _geometry_args(c, with_s=False)
        c.add_argument("--s-start", dest="s_start", type=float)
        c.add_argument("--s-end", dest="s_end", type=float)
        c.add_argument("--s-steps", dest="s_steps", type=int)
        c.add_argument("--fd-step", dest="fd_step", type=float)
        c.add_argument("--eig-tol", dest="eig_tol", type=float)
        c.add_argument("--direction", type=int, choices=[1, -1])
        c.add_argument("--out")
        c.add_argument("--format", choices=["csv", "json"])
        c.add_argument("--timing", action="store_true", default=None,
                       help="record wall times (output is then not reproducible)")
    return ap


_POINT_DEFAULTS = dict(p=2.0, r0=0.3, r1=1.0, s=0.0, n_theta=128, n_layers=48, tol=1e-10)
_ORACLE_DEFAULTS = dict(what="constants", p=2.0, r0=0.3, r1=1.0, N=2, n_grid=4001)


def merged_options(args, keys, defaults=None):
    """Values from ``--config`` overridden by explicit flags, then defaults."""
    opts = dict(defaults or {})
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        opts.update(data)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    return opts


def _point_mesh(opts):
    unknown = set(opts) - set(_POINT_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        dom = AnnularDomain(opts["r0"], opts["r1"], opts["s"])
        return build_annulus_mesh(dom, opts["n_theta"], opts["n_layers"])
    except (GeometryError, MeshQualityError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _emit(text, path, out):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)


def _kv(out, pairs):
    w = max(len(k) for k, _ in pairs)
    for k, v in pairs:
        v = format(v, ".12g") if isinstance(v, float) else v
        out.write(f"{k:<{w}}  {v}\n")


def cmd_mesh(args, out):
    opts = merged_options(args, _POINT_DEFAULTS, _POINT_DEFAULTS)
    path = opts.pop("out", None) or args.out
    mesh = _point_mesh(opts)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            write_mesh(mesh, fh)
    else:
        write_mesh(mesh, out)
    return EXIT_OK


def _settings(opts):
    try:
        return torsion.SolverSettings(tol=opts["tol"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _check_p(p):
    from .operator import check_p
    try:
        return check_p(p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_solve(args, out):
    opts = merged_options(args, _POINT_DEFAULTS, _POINT_DEFAULTS)
    p = _check_p(opts["p"])
    mesh = _point_mesh(opts)
    sol = torsion.solve_torsion(mesh, p, _settings(opts))
    e_grad, e_load = torsion.torsional_rigidity(mesh, sol, p)
    flux = shape.torsion_flux(mesh, sol.field, p, eps=sol.final_eps)
    _kv(out, [("E", e_load), ("E_grad", e_grad),
              ("E_grad_load_gap", abs(e_grad - e_load) / e_load),
              ("max_y", float(np.max(sol.field))),
              ("dE_hadamard", shape.hadamard_torsion_derivative(flux, p)),
              ("min_inner_flux", float(np.max(flux.values))),
              ("newton_iterations", sol.newton_iterations),
              ("residual", sol.residual_norm), ("final_eps", sol.final_eps),
              ("mesh_id", mesh.mesh_id)])
    return EXIT_OK


def cmd_eigen(args, out):
    opts = merged_options(args, _POINT_DEFAULTS, _POINT_DEFAULTS)
    p = _check_p(opts["p"])
    mesh = _point_mesh(opts)
    settings = _settings(opts)
    pair = eigen.solve_first_eigenpair(mesh, p, settings)
    flux = shape.eigen_flux(mesh, pair.field, pair.lambda1, p, eps=settings.stages(p)[-1])
    _kv(out, [("lambda1", pair.lambda1),
              ("dlam_hadamard", shape.hadamard_eigen_derivative(flux, p)),
              ("min_inner_flux", float(np.max(flux.values))),
              ("outer_iterations", pair.iterations),
              ("newton_iterations", pair.newton_iterations),
              ("lambda_change", pair.rq_residual), ("mesh_id", mesh.mesh_id)])
    return EXIT_OK


def cmd_oracle(args, out):
    opts = merged_options(args, _ORACLE_DEFAULTS, _ORACLE_DEFAULTS)
    path = opts.pop("out", None) or args.out
    unknown = set(opts) - set(_ORACLE_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    p, r0, r1, N = _check_p(opts["p"]), opts["r0"], opts["r1"], opts["N"]
    what = opts["what"]
    try:
        if what == "constants":
            rows = ["name,value"]
            if r0 > 0:
                rows.append(f"annulus_E,{radial.annulus_torsion_profile(p, N, r0, r1).E:.17g}")
                rows.append(f"annulus_lambda1,{radial.radial_eigen(p, N, r0, r1, opts['n_grid'])[0]:.17g}")
                if p == 2.0 and N == 2:
                    rows.append(f"bessel_lambda1,{radial.bessel_annulus_eigenvalue(r0, r1):.17g}")
            rows.append(f"ball_E,{radial.ball_torsion_rigidity(p, N, r1):.17g}")
            rows.append(f"ball_lambda1,{radial.radial_eigen(p, N, 0.0, r1, opts['n_grid'])[0]:.17g}")
            text = "\n".join(rows) + "\n"
        else:
            if what == "torsion":
                prof = radial.annulus_torsion_profile(p, N, r0, r1, opts["n_grid"])
            elif what == "ball":
                prof = radial.ball_torsion_profile(p, N, r1, opts["n_grid"])
            else:
                prof = radial.radial_eigen(p, N, r0, r1, opts["n_grid"])[1]
            lines = ["r,y,dy"] + [f"{a:.17g},{b:.17g},{c:.17g}"
                                  for a, b, c in zip(prof.r, prof.values, prof.slope)]
            text = "\n".join(lines) + "\n"
    except GeometryError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(text, path, out)
    return EXIT_OK


_SWEEP_KEYS = [f for f in sweep.SweepConfig.__dataclass_fields__]


def sweep_config(args):
    opts = merged_options(args, _SWEEP_KEYS)
    return sweep.SweepConfig.from_dict(opts)


def cmd_sweep(args, out):
    cfg = sweep_config(args)
    records, summary = sweep.run_sweep(cfg)
    text = sweep.write_report(records, cfg, summary)
    if not cfg.out:
        out.write(text)
    if summary.failures:
        for line in summary.failures:
            sys.stderr.write(f"solver failure: {line}\n")
        return EXIT_SOLVER
    return EXIT_OK


def cmd_verify(args, out):
    cfg = sweep_config(args)
    if cfg.s_steps < 3:
        raise ConfigError("verify needs at least 3 offsets")
    records, summary = sweep.run_sweep(cfg)
    if cfg.out:
        sweep.write_report(records, cfg, summary)
    out.write("\n".join(summary.lines()) + "\n")
    if summary.failures:
        return EXIT_SOLVER
    return EXIT_OK if summary.passed else EXIT_VERIFY


COMMANDS = {"mesh": cmd_mesh, "solve": cmd_solve, "eigen": cmd_eigen,
            "oracle": cmd_oracle, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None, out=None):
    """Run the CLI and return its exit code."""
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        sys.stderr.write(f"plapshape: {exc}\n")
        return EXIT_CONFIG
    except SystemExit as exc:          # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        sys.stderr.write(f"plapshape: configuration error: {exc}\n")
        return EXIT_CONFIG
    except PlapError as exc:
        sys.stderr.write(f"plapshape: solver failure: {type(exc).__name__}: {exc}\n")
        return EXIT_SOLVER


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
