"""Algebraic kernel of the p-Laplacian.

All functions accept gradients of shape ``(2,)`` or ``(..., 2)`` and use the
smooth regularization ``|g|^2 -> eps^2 + |g|^2``.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateJacobian

P_MIN, P_MAX = 1.05, 10.0


def check_p(p):
    p = float(p)
    if not (P_MIN <= p <= P_MAX):
        raise ValueError(f"p must lie in [{P_MIN}, {P_MAX}], got {p}")
    return p


def check_eps(eps):
    eps = float(eps)
    if not eps >= 0.0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    return eps


def _sq(g):
    return np.einsum("...i,...i->...", g, g)


def _power(base, expo):
    """base**expo with 0**negative := 0 (only hit when multiplied by g = 0)."""
    base = np.asarray(base, dtype=float)
    if expo == 0:
        return np.ones_like(base)
    pos = base > 0.0
    return np.where(pos, np.power(np.where(pos, base, 1.0), expo), 0.0)


def diffusivity(p, eps, g):
    """(eps^2 + |g|^2)^((p-2)/2), the scalar coefficient of the flux."""
    g = np.asarray(g, dtype=float)
    return _power(eps * eps + _sq(g), 0.5 * (p - 2.0))


def flux(p, eps, g):
    """Regularized A(g) = (eps^2 + |g|^2)^((p-2)/2) g; A(0) = 0 at eps = 0."""
    g = np.asarray(g, dtype=float)
    return diffusivity(p, eps, g)[..., None] * g


def flux_jacobian(p, eps, g):
    """Jacobian of :func:`flux`, a symmetric 2x2 matrix (batched on leading axes)."""
    g = np.asarray(g, dtype=float)
    q = eps * eps + _sq(g)
    if p < 2.0 and eps == 0.0 and np.any(q == 0.0):
        raise DegenerateJacobian("flux Jacobian unbounded at g = 0 for p < 2, eps = 0")
    a = _power(q, 0.5 * (p - 2.0))
    b = (p - 2.0) * _power(q, 0.5 * (p - 4.0))
    eye = np.eye(2)
    return a[..., None, None] * eye + b[..., None, None] * g[..., :, None] * g[..., None, :]


def energy_density(p, eps, g):
    """((eps^2 + |g|^2)^(p/2) - eps^p) / p; equals |g|^p / p at eps = 0."""
    g = np.asarray(g, dtype=float)
    g2 = _sq(g)
    if eps == 0.0:
        return np.power(g2, 0.5 * p) / p
    # eps^p ((1 + |g|^2/eps^2)^(p/2) - 1) without cancellation for small g
    return eps ** p * np.expm1(0.5 * p * np.log1p(g2 / (eps * eps))) / p
