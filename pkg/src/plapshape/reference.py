"""Frozen oracle constants for the reference annulus r0 = 0.3, r1 = 1 (N = 2).

Provenance (10 significant digits, regenerated by ``tests/test_reference.py``):

* ``TORSION_E[p]``: ``radial.annulus_torsion_profile(p, 2, 0.3, 1.0, 16001).E``;
  agrees with the 4001-point value to 1e-11.
* ``EIGEN_LAMBDA1[p]``: Richardson extrapolation ``l3 + (l3 - l2) / 3`` of
  ``radial.radial_eigen`` on 8001 and 16001 points (observed order 2).
  For p = 2 it equals the Bessel cross-product root 19.469226924844623 to 4e-13.
"""

R0, R1 = 0.3, 1.0

TORSION_E = {
    1.5: 0.03196614241,
    2.0: 0.1194173428,
    3.0: 0.2394876204,
}

EIGEN_LAMBDA1 = {
    1.5: 8.837147044,
    2.0: 19.46922692,
    3.0: 79.24973715,
}

# default reference sweep: an artifact choice, since no numerical experiment is prescribed
REFERENCE_P = (1.5, 2.0, 3.0)
REFERENCE_S = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
REFERENCE_MESH = (128, 48)
