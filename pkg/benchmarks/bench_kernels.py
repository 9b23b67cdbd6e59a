"""Time the compiled and numpy kernels on the same inputs.

Usage: ``python3 benchmarks/bench_kernels.py [n]`` where ``n`` is the cube
subdivision count (default 24, i.e. 82944 elements).  Prints one line per
kernel and backend plus the speed-up of the compiled version.
"""
import sys
import timeit

import numpy as np

from anisoadapt import _kernels
from anisoadapt.recovery import build_stencils
from anisoadapt.tetmesh import uniform_cube_mesh


def cases(mesh):
    rng = np.random.default_rng(0)
    X, T = mesh.vertices, mesh.tets
    vol, grads = _kernels.implementations()["numpy"].tet_geometry(X, T)
    A = rng.normal(size=(mesh.n_elements, 3, 3))
    D = A @ np.swapaxes(A, 1, 2) + np.eye(3)
    st = build_stencils(mesh)
    u = rng.normal(size=mesh.n_vertices)
    pts = rng.uniform(0, 1, size=(20000, 3))
    cand = rng.integers(0, mesh.n_elements, size=(len(pts), 16))
    return {
        "tet_geometry": lambda k: k.tet_geometry(X, T),
        "local_stiffness": lambda k: k.local_stiffness(grads, vol, D),
        "lsq_normal_systems": lambda k: k.lsq_normal_systems(X, u, st.indptr, st.indices, 2),
        "locate_points": lambda k: k.locate_points(pts, X, T, cand),
    }


def main(argv):
    n = int(argv[1]) if len(argv) > 1 else 24
    mesh = uniform_cube_mesh(n)
    impls = _kernels.implementations()
    print(f"mesh n={n} N={mesh.n_elements} vertices={mesh.n_vertices} active={_kernels.BACKEND}")
    print(f"{'kernel':<20}{'backend':<10}{'best of 5 (ms)':>16}{'speed-up':>10}")
    for name, fn in cases(mesh).items():
        times = {}
        for backend, mod in impls.items():
            times[backend] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=5)) * 1e3
        for backend, t in times.items():
            gain = f"{times['numpy'] / t:.2f}x" if backend != "numpy" else ""
            print(f"{name:<20}{backend:<10}{t:>16.2f}{gain:>10}")


if __name__ == "__main__":
    main(sys.argv)
