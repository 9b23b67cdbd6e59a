"""Least-squares recovery of nodal gradients and Hessians of a P1 field.

Two passes over vertex stencils:

1. gradient pass: fit ``u(x) - u(x0) ~ g.(x - x0) + (x - x0)^T C (x - x0) / 2``
   and keep ``g`` (the quadratic terms only absorb curvature, so ``g`` is
   exact for quadratic ``u``);
2. Hessian pass: fit each recovered gradient component affinely,
   ``g(x) - g(x0) ~ J (x - x0)``, and return ``H = (J + J^T) / 2``.

Stencils are the hop-1 vertex neighbours, grown to hop-2 where fewer than
nine neighbours exist and one hop further when the fit is ill-conditioned.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .errors import SingularFit

MIN_STENCIL = 9
COND_LIMIT = 1e12


@dataclass
class Stencils:
    indptr: np.ndarray
    indices: np.ndarray
    hops: np.ndarray

    def sizes(self):
        return np.diff(self.indptr)

    def of(self, v):
        return self.indices[self.indptr[v]:self.indptr[v + 1]]


def _rows(A, rows):
    return [A.indices[A.indptr[r]:A.indptr[r + 1]] for r in rows]


def build_stencils(mesh, min_size=MIN_STENCIL):
    """Hop-1 neighbourhoods, extended to hop-2 for vertices with too few neighbours."""
    A = mesh.vertex_adjacency
    sizes = np.diff(A.indptr)
    hops = np.ones(mesh.n_vertices, dtype=np.int64)
    small = np.flatnonzero(sizes < min_size)
    if len(small) == 0:
        return Stencils(A.indptr.astype(np.int64), A.indices.astype(np.int64), hops)
    A2 = (A @ A + A).tocsr()
    A2.setdiag(0)
    A2.eliminate_zeros()
    A2.sort_indices()
    rows = [A.indices[A.indptr[v]:A.indptr[v + 1]] for v in range(mesh.n_vertices)]
    for v, r in zip(small, _rows(A2, small)):
        rows[v] = r
        hops[v] = 2
    return _pack(rows, hops)


def _pack(rows, hops):
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.concatenate(rows).astype(np.int64) if rows else np.zeros(0, dtype=np.int64)
    return Stencils(indptr, indices, np.asarray(hops, dtype=np.int64))


def _extend(mesh, st, bad):
    A = mesh.vertex_adjacency
    rows = [st.of(v) for v in range(mesh.n_vertices)]
    hops = st.hops.copy()
    for v in bad:
        cur = np.union1d(rows[v], [v])
        grown = np.unique(np.concatenate([A.indices[A.indptr[w]:A.indptr[w + 1]] for w in cur]))
        rows[v] = grown[grown != v]
        hops[v] += 1
    return _pack(rows, hops)


def _ill_conditioned(N):
    with np.errstate(all="ignore"):
        c = np.linalg.cond(N)
    return ~np.isfinite(c) | (c > COND_LIMIT)


def _solve_fits(mesh, values, order, stencils):
    """Solve all per-vertex fits; grow failing stencils once, then borrow from the nearest good vertex."""
    X = mesh.vertices
    N, R, scale = _kernels.lsq_normal_systems(X, values, stencils.indptr, stencils.indices, order)
    bad = np.flatnonzero(_ill_conditioned(N))
    if len(bad):
        stencils = _extend(mesh, stencils, bad)
        N2, R2, s2 = _kernels.lsq_normal_systems(X, values, stencils.indptr, stencils.indices, order)
        N[bad], R[bad], scale[bad] = N2[bad], R2[bad], s2[bad]
        bad = bad[_ill_conditioned(N[bad])]
    good = np.ones(len(N), dtype=bool)
    good[bad] = False
    if not np.any(good):
        raise SingularFit("every least-squares stencil is rank deficient")
    Nsafe = N.copy()
    Nsafe[bad] = np.eye(N.shape[1])
    coef = np.linalg.solve(Nsafe, R)
    coef[:, :3, :] /= scale[:, None, None]
    if len(bad):
        donors = np.flatnonzero(good & ~mesh.boundary_vertices)
        if len(donors) == 0:
            donors = np.flatnonzero(good)
        _, nearest = cKDTree(X[donors]).query(X[bad])
        coef[bad] = coef[donors[nearest]]
    return coef[:, :3, :], bad


def recover_gradient(mesh, u, stencils=None):
    """Nodal gradients, shape (nv, 3)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise ValueError(f"expected one value per vertex ({mesh.n_vertices}), got shape {u.shape}")
    st = stencils or build_stencils(mesh)
    g, _ = _solve_fits(mesh, u, 2, st)
    return g[:, :, 0]


def recover_hessian(mesh, u, gradient=None, stencils=None):
    """Symmetric nodal Hessians, shape (nv, 3, 3)."""
    st = stencils or build_stencils(mesh)
    g = recover_gradient(mesh, u, st) if gradient is None else np.asarray(gradient, dtype=float)
    J, _ = _solve_fits(mesh, g, 1, st)
    # J[v, a, c] = d g_c / d x_a
    return 0.5 * (J + np.swapaxes(J, 1, 2))


def element_hessians(mesh, nodal_H):
    """Arithmetic mean of the four vertex Hessians of each element."""
    return np.asarray(nodal_H)[mesh.tets].mean(axis=1)
