"""Meshes that are exactly uniform in a constant metric.

A Kuhn mesh is built in the metric eigenframe with cell counts proportional
to ``sqrt(lambda_i) * L_i`` and mapped back.  Element by element, the
alignment measure in ``M`` of the result equals the Euclidean alignment of
the pre-image Kuhn element.  For a diagonal ``M`` the domain is the given
box itself; otherwise it is that box rotated about its center onto the
eigenvectors of ``M``.
"""
import numpy as np

from ..errors import GridMismatch, UnsupportedGeometry
from ..geometry import check_spd
from ..tetmesh import TetMesh, cube_with_hole_mesh, uniform_cube_mesh


def _constant_tensor(metric):
    t = getattr(metric, "tensors", metric)
    t = np.asarray(t, dtype=float)
    if t.ndim == 3:
        if not np.allclose(t, t[0], rtol=1e-10, atol=0.0):
            raise UnsupportedGeometry("the affine backend needs a constant metric; use bisection instead")
        t = t[0]
    return check_spd(t, "metric")


def eigenframe(M):
    """Right-handed eigenvectors (columns) and eigenvalues; identity frame for diagonal ``M``."""
    off = M - np.diag(np.diag(M))
    if np.all(off == 0.0):
        return np.eye(3), np.diag(M).copy()
    lam, Q = np.linalg.eigh(M)
    if np.linalg.det(Q) < 0:
        Q[:, 2] = -Q[:, 2]
    return Q, lam


def cell_counts(lam, lengths, target_N, multiple=1):
    w = np.sqrt(lam) * lengths
    c = (target_N / (6.0 * np.prod(w))) ** (1.0 / 3.0)
    n = np.maximum(np.rint(c * w / multiple), 1).astype(int) * multiple
    return tuple(int(k) for k in n)


def generate_affine_mapped(metric, target_N, box=None, hole=None):
    """Kuhn mesh uniform in the constant metric ``metric`` with about ``target_N`` elements.

    ``box`` is ``(lo, hi)``; ``hole`` an optional inner box whose faces must
    fall on grid planes of the pre-image grid (counts are rounded to
    multiples that make this possible for holes at fifths of the box).
    """
    if box is None:
        raise UnsupportedGeometry("the affine backend needs a box domain")
    M = _constant_tensor(metric)
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    L = hi - lo
    Q, lam = eigenframe(M)
    multiple = 1
    if hole is not None:
        rel = (np.asarray(hole, dtype=float) - lo) / L
        multiple = _grid_multiple(rel)
    n = cell_counts(lam, L, target_N, multiple)
    center = 0.5 * (lo + hi)
    if np.array_equal(Q, np.eye(3)):
        mesh = uniform_cube_mesh(n, (lo, hi)) if hole is None else cube_with_hole_mesh(n, hole, (lo, hi))
        mesh.meta.update(frame=np.eye(3).tolist())
        return mesh
    plo, phi = -0.5 * L, 0.5 * L
    if hole is None:
        pre = uniform_cube_mesh(n, (plo, phi))
    else:
        hole_pre = tuple(np.asarray(hb, dtype=float) - center for hb in hole)
        pre = cube_with_hole_mesh(n, hole_pre, (plo, phi))
    verts = center + pre.vertices @ Q.T
    meta = dict(pre.meta)
    meta.update(generator="affine", box=[lo.tolist(), hi.tolist()], frame=Q.tolist(), rotated=True)
    if hole is not None:
        meta["hole"] = [np.asarray(hb, dtype=float).tolist() for hb in hole]
    return TetMesh(verts, pre.tets, pre.tet_tags, pre.facets, pre.facet_tags, meta)


def _grid_multiple(rel, max_multiple=64):
    for m in range(1, max_multiple + 1):
        if np.all(np.abs(rel * m - np.rint(rel * m)) < 1e-9):
            return m
    raise GridMismatch("hole position is not a simple fraction of the box")
