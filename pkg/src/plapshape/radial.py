"""Radially symmetric solutions in dimension N, used as ground truth for the
concentric configuration.

* ball torsion: closed form;
* annulus torsion: quadrature of the first integral
  ``r^(N-1) |y'|^(p-2) y' = (c^N - r^N) / N`` with ``c`` fixed by bisection;
* first eigenpair: nonlinear inverse power iteration on the three-point
  conservative scheme, each step solved exactly through its flux recursion.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.optimize import brentq
from scipy.special import gamma, j0, y0

from .errors import BracketFailure, GeometryError, NonConvergence
from .operator import check_p


def sphere_area(N):
    """Surface measure of the unit sphere in R^N (2*pi for N = 2)."""
    return 2.0 * np.pi ** (N / 2.0) / gamma(N / 2.0)


@dataclass
class RadialProfile:
    N: int
    r: np.ndarray
    values: np.ndarray
    E: float
    slope: np.ndarray | None = None     # y'(r) on the grid
    c: float | None = None              # radius of the ridge y' = 0
    ode_residual: float = 0.0

    def __call__(self, r):
        return np.interp(r, self.r, self.values)

    def slope_at(self, r):
        return float(np.interp(r, self.r, self.slope))


def _phi_inv(x, p):
    """Inverse of t -> |t|^(p-2) t."""
    return np.sign(x) * np.abs(x) ** (1.0 / (p - 1.0))


def ball_torsion_profile(p, N, R, n_grid=2001):
    """Closed-form torsion function of the ball B(0, R)."""
    p = check_p(p)
    if R <= 0 or N < 2:
        raise GeometryError("need R > 0 and N >= 2")
    q = p / (p - 1.0)
    k = (p - 1.0) / p * N ** (-1.0 / (p - 1.0))
    r = np.linspace(0.0, R, n_grid)
    y = k * (R ** q - r ** q)
    slope = -N ** (-1.0 / (p - 1.0)) * r ** (1.0 / (p - 1.0))

    def radial_flux(rr):
        d = -N ** (-1.0 / (p - 1.0)) * rr ** (1.0 / (p - 1.0))
        return rr ** (N - 1) * np.abs(d) ** (p - 2.0) * d

    # -(r^(N-1) phi(y'))' = r^(N-1), checked by central differences
    ri = r[1:-1]
    dr = 1e-5 * R
    lhs = -(radial_flux(ri + dr) - radial_flux(ri - dr)) / (2 * dr)
    resid = float(np.max(np.abs(lhs - ri ** (N - 1)))) if len(ri) else 0.0
    E = sphere_area(N) * simpson(y * r ** (N - 1), x=r)
    return RadialProfile(N=N, r=r, values=y, E=float(E), slope=slope, c=0.0,
                         ode_residual=resid)


def ball_torsion_rigidity(p, N, R):
    """Exact E of the ball: |S^(N-1)| k R^(q+N) q / (N (q+N))."""
    q = p / (p - 1.0)
    k = (p - 1.0) / p * N ** (-1.0 / (p - 1.0))
    return sphere_area(N) * k * R ** (q + N) * q / (N * (q + N))


def _annulus_pieces(p, N, r0, r1, c, n_half):
    """Grids clustered at the ridge c, on [r0, c] and [c, r1], with slopes."""
    sig = np.linspace(0.0, 1.0, n_half)
    left = c - (c - r0) * (1.0 - sig) ** 2       # r0 -> c, dense near c
    right = c + (r1 - c) * sig ** 2              # c -> r1, dense near c

    def slope(r):
        return np.sign(c - r) * (np.abs(c ** N - r ** N) / (N * r ** (N - 1))) ** (1.0 / (p - 1.0))

    return sig, left, right, slope


def _annulus_end_value(p, N, r0, r1, c, n_half):
    sig, left, right, slope = _annulus_pieces(p, N, r0, r1, c, n_half)
    dl = 2.0 * (c - r0) * (1.0 - sig)
    dr = 2.0 * (r1 - c) * sig
    return simpson(slope(left) * dl, x=sig) + simpson(slope(right) * dr, x=sig)


def annulus_torsion_profile(p, N, r0, r1, n_grid=4001):
    """Torsion function of the annulus r0 < |x| < r1 in R^N."""
    p = check_p(p)
    if not (0.0 < r0 < r1):
        raise GeometryError("need 0 < r0 < r1")
    n_grid = max(int(n_grid), 1001)
    n_half = n_grid // 2 + 1
    if n_half % 2 == 0:
        n_half += 1
    f_lo = _annulus_end_value(p, N, r0, r1, r0 * (1 + 1e-15), n_half)
    f_hi = _annulus_end_value(p, N, r0, r1, r1 * (1 - 1e-15), n_half)
    if not (f_lo < 0.0 < f_hi):
        raise BracketFailure("y(r1) does not change sign over c in (r0, r1)")
    lo, hi = r0, r1
    xtol = 1e-12 * (r1 - r0)
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if _annulus_end_value(p, N, r0, r1, mid, n_half) < 0.0:
            lo = mid
        else:
            hi = mid
    c = 0.5 * (lo + hi)

    sig, left, right, slope = _annulus_pieces(p, N, r0, r1, c, n_half)
    dl = 2.0 * (c - r0) * (1.0 - sig)
    dr = 2.0 * (r1 - c) * sig
    yl = np.concatenate([[0.0], cumulative_simpson(slope(left) * dl, x=sig)])
    yr = yl[-1] + np.concatenate([[0.0], cumulative_simpson(slope(right) * dr, x=sig)])
    r = np.concatenate([left, right[1:]])
    y = np.concatenate([yl, yr[1:]])
    s = np.concatenate([slope(left), slope(right[1:])])
    area = sphere_area(N)
    E = area * (simpson(yl * left ** (N - 1) * dl, x=sig)
                + simpson(yr * right ** (N - 1) * dr, x=sig))
    return RadialProfile(N=N, r=r, values=y, E=float(E), slope=s, c=c)


def annulus_torsion_p2(r0, r1, r):
    """Closed form for p = 2, N = 2:  -r^2/4 + a log r + b."""
    a = (r1 ** 2 - r0 ** 2) / (4.0 * np.log(r1 / r0))
    b = r0 ** 2 / 4.0 - a * np.log(r0)
    return -np.asarray(r) ** 2 / 4.0 + a * np.log(r) + b


def _radial_stiff(p, N, r, y, h):
    d = np.diff(y) / h
    w = (0.5 * (r[1:] + r[:-1])) ** (N - 1)
    return float(np.sum(w * np.abs(d) ** p) * h)


def radial_eigen(p, N, r0, r1, n_grid=4001, tol=1e-13, max_iter=2000):
    """First Dirichlet eigenpair of the radial p-Laplacian on r0 < r < r1.

    ``r0 = 0`` gives the ball (regularity instead of a Dirichlet condition at
    the centre).  Returns ``(lambda1, profile)`` with the profile normalized
    to unit L^p norm over the N-dimensional domain.
    """
    p = check_p(p)
    if not (0.0 <= r0 < r1):
        raise GeometryError("need 0 <= r0 < r1")
    if n_grid < 500:
        raise ValueError("n_grid must be >= 500")
    ball = r0 == 0.0
    r = np.linspace(r0, r1, n_grid)
    h = r[1] - r[0]
    w_mid = (0.5 * (r[1:] + r[:-1])) ** (N - 1)
    mass = r ** (N - 1) * h
    mass[-1] = 0.0
    if not ball:
        mass[0] = 0.0
    area = sphere_area(N)

    def lp_norm_p(y):
        return float(np.sum(mass * np.abs(y) ** p))

    def solve(g):
        # flux F_{i+1/2} = C - sum_{j<=i} m_j g_j ; D = phi^{-1}(F / w)
        cum = np.cumsum(mass[:-1] * g[:-1])

        def end_value(C):
            d = _phi_inv((C - cum) / w_mid, p)
            return float(np.sum(d) * h)

        if ball:
            C = 0.0
        else:
            hi = float(cum[-1]) * (1.0 + 1e-12) + 1e-300
            if not (end_value(0.0) <= 0.0 <= end_value(hi)):
                raise BracketFailure("flux constant not bracketed")
            C = brentq(end_value, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                       maxiter=500)
        d = _phi_inv((C - cum) / w_mid, p)
        if ball:
            y = np.concatenate([-np.cumsum(d[::-1])[::-1] * h, [0.0]])
        else:
            y = np.concatenate([[0.0], np.cumsum(d) * h])
            y[-1] = 0.0
        return y

    y = np.sin(np.pi * (r - r0) / (r1 - r0)) if not ball else np.cos(0.5 * np.pi * r / r1)
    y[-1] = 0.0
    y /= lp_norm_p(y) ** (1.0 / p)
    lam = _radial_stiff(p, N, r, y, h) / lp_norm_p(y)
    for _ in range(max_iter):
        g = lam * np.sign(y) * np.abs(y) ** (p - 1.0)
        y_new = solve(g)
        y_new /= lp_norm_p(y_new) ** (1.0 / p)
        lam_new = _radial_stiff(p, N, r, y_new, h) / lp_norm_p(y_new)
        done = abs(lam_new - lam) <= tol * lam_new
        y, lam = y_new, lam_new
        if done:
            break
    else:
        raise NonConvergence("radial inverse power iteration did not converge",
                             best=(lam, y), residual=abs(lam_new - lam))
    y = y / area ** (1.0 / p)
    slope = np.gradient(y, r)
    return lam, RadialProfile(N=N, r=r, values=y, E=float("nan"), slope=slope)


def bessel_annulus_eigenvalue(r0, r1, kmax=None):
    """lambda = k^2 with k the first root of J0(k r0) Y0(k r1) - J0(k r1) Y0(k r0)."""
    def cross(k):
        return j0(k * r0) * y0(k * r1) - j0(k * r1) * y0(k * r0)

    kmax = kmax or 4.0 * np.pi / (r1 - r0)
    ks = np.linspace(1e-3, kmax, 4000)
    vals = cross(ks)
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if not len(idx):
        raise BracketFailure("no root of the Bessel cross product below kmax")
    k = brentq(cross, ks[idx[0]], ks[idx[0] + 1], xtol=1e-15, rtol=1e-15)
    return k * k
