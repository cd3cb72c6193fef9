"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--n-theta 128] [--n-layers 48] [--repeat 5]

Times residual/Jacobian assembly and one Jacobi-PCG solve per backend in this
process, then a full torsion solve per backend in a subprocess (the backend
is fixed at import through PLAPSHAPE_KERNELS).
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np
import scipy.sparse as sp

from plapshape import fem, geometry, kernels

FULL_SOLVE = """
import time
from plapshape import geometry, kernels, torsion
mesh = geometry.build_annulus_mesh(geometry.AnnularDomain(0.3, 1.0, {s}), {nt}, {nl})
t0 = time.perf_counter()
sol = torsion.solve_torsion(mesh, {p})
print(kernels.BACKEND, time.perf_counter() - t0, sol.newton_iterations)
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_in_process(mesh, p, repeat):
    V = fem.space(mesh)
    rng = np.random.default_rng(0)
    u = rng.random(mesh.n_vertices)
    u[~V.free] = 0.0
    _, J = fem.residual_and_jacobian(mesh, u, p, 1e-3, np.zeros(mesh.n_vertices))
    A = sp.csr_matrix(J)
    A.sort_indices()
    rhs = rng.random(A.shape[0])
    rows = {}
    for name in ("python", "cython"):
        try:
            k = kernels.get_backend(name)
        except ImportError:
            print(f"{name}: not available")
            continue
        t_asm = best_of(lambda: k.residual_and_jacobian(u, V.tri, V.grads, V.areas, p, 1e-3,
                                                        mesh.n_vertices, V.pos, V.nnz), repeat)
        t_en = best_of(lambda: k.energy(u, V.tri, V.grads, V.areas, p, 1e-3), repeat)
        t_cg = best_of(lambda: k.pcg(A.indptr.astype(np.intp), A.indices.astype(np.intp), A.data,
                                     rhs, np.zeros_like(rhs), 1e-10, 10 * len(rhs)), repeat)
        rows[name] = (t_asm, t_en, t_cg)
    return rows


def bench_full(args):
    out = {}
    for name in ("python", "cython"):
        env = dict(os.environ, PLAPSHAPE_KERNELS=name)
        code = FULL_SOLVE.format(s=0.3, nt=args.n_theta, nl=args.n_layers, p=args.p)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        if res.returncode != 0:
            print(f"{name}: full solve failed\n{res.stderr.strip()}")
            continue
        backend, t, it = res.stdout.split()
        out[name] = (backend, float(t), int(it))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-theta", type=int, default=128)
    ap.add_argument("--n-layers", type=int, default=48)
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    mesh = geometry.build_annulus_mesh(geometry.AnnularDomain(0.3, 1.0, 0.3),
                                       args.n_theta, args.n_layers)
    print(f"mesh {args.n_theta}x{args.n_layers}: {mesh.n_vertices} vertices, "
          f"{len(mesh.triangles)} triangles, p = {args.p}")
    rows = bench_in_process(mesh, args.p, args.repeat)
    print(f"{'backend':<8} {'assembly ms':>12} {'energy ms':>10} {'pcg ms':>10}")
    for name, (a, e, c) in rows.items():
        print(f"{name:<8} {1e3 * a:12.2f} {1e3 * e:10.2f} {1e3 * c:10.2f}")
    if len(rows) == 2:
        py, cy = rows["python"], rows["cython"]
        print(f"{'speedup':<8} {py[0] / cy[0]:12.1f} {py[1] / cy[1]:10.1f} {py[2] / cy[2]:10.1f}")
    full = bench_full(args)
    print("\nfull torsion solve at s = 0.3")
    for name, (backend, t, it) in full.items():
        print(f"{name:<8} {t:8.3f} s  ({it} Newton steps, backend {backend})")
    if len(full) == 2:
        print(f"{'speedup':<8} {full['python'][1] / full['cython'][1]:8.1f}")


if __name__ == "__main__":
    main()
