import numpy as np
import pytest

from plapshape import geometry, torsion, eigen

R0, R1 = 0.3, 1.0

_MESHES = {}
_SOLUTIONS = {}


def annulus(s=0.0, n_theta=64, n_layers=24, r0=R0, r1=R1):
    key = (s, n_theta, n_layers, r0, r1)
    if key not in _MESHES:
        _MESHES[key] = geometry.build_annulus_mesh(geometry.AnnularDomain(r0, r1, s),
                                                   n_theta, n_layers)
    return _MESHES[key]


def torsion_solution(p, s=0.0, n_theta=64, n_layers=24):
    key = ("t", p, s, n_theta, n_layers)
    if key not in _SOLUTIONS:
        _SOLUTIONS[key] = torsion.solve_torsion(annulus(s, n_theta, n_layers), p)
    return _SOLUTIONS[key]


def eigen_solution(p, s=0.0, n_theta=64, n_layers=24):
    key = ("e", p, s, n_theta, n_layers)
    if key not in _SOLUTIONS:
        _SOLUTIONS[key] = eigen.solve_first_eigenpair(annulus(s, n_theta, n_layers), p)
    return _SOLUTIONS[key]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def coarse():
    return annulus(0.0, 8, 2)


# ---------------------------------------------------------------- acceptance report

import time

CRITERIA = []          # (number, title, passed, detail), filled by test_acceptance
SUITE_BUDGET = 20 * 60.0
_T0 = [time.perf_counter()]


def pytest_sessionstart(session):
    _T0[0] = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num, title, ok, detail in sorted(CRITERIA, key=lambda c: (c[0], c[1])):
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  [{num:>2}] {title}: {detail}")
    elapsed = time.perf_counter() - _T0[0]
    ok = elapsed <= SUITE_BUDGET
    tr.write_line(f"{'PASS' if ok else 'FAIL'}  [12] suite wall time: {elapsed:.1f} s "
                  f"(budget {SUITE_BUDGET:.0f} s)")


def pytest_sessionfinish(session, exitstatus):
    if CRITERIA and time.perf_counter() - _T0[0] > SUITE_BUDGET and exitstatus == 0:
        session.exitstatus = 1
