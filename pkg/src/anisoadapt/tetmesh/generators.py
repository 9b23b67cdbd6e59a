"""Structured tetrahedral mesh generators.

* :func:`uniform_cube_mesh` - Kuhn subdivision of a hexahedral grid, six
  tetrahedra per cell sharing the cell's (0,0,0)-(1,1,1) diagonal.
* :func:`cube_with_hole_mesh` - the same grid with the cells of a box hole removed.
* :func:`diagonal_orthoscheme_mesh` - crossed-diagonal triangulation of the
  xy-plane extruded in z, every tetrahedron an orthoscheme whose legs follow
  (1,1,0), (1,-1,0) and (0,0,1).
"""
import itertools

import numpy as np

from ..errors import GridMismatch
from .mesh import TetMesh, tag_boundary_by_box

UNIT_BOX = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
HOLE_TAG = 7


def _counts(n):
    if np.isscalar(n):
        n = (int(n),) * 3
    n = tuple(int(k) for k in n)
    if len(n) != 3 or min(n) < 1:
        raise ValueError(f"need three positive subdivision counts, got {n}")
    return n


def _kuhn_cell_tets():
    """Local corner indices (bit i <-> axis i) of the six Kuhn tetrahedra."""
    out = []
    for perm in itertools.permutations(range(3)):
        corner = 0
        path = [corner]
        for axis in perm:
            corner |= 1 << axis
            path.append(corner)
        out.append(path)
    return np.array(out)


KUHN = _kuhn_cell_tets()


def _grid_vertices(n, box):
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    axes = [np.linspace(lo[a], hi[a], n[a] + 1) for a in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])


def _kuhn_tets(n, keep=None):
    nx, ny, nz = n
    ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    cells = np.column_stack([ii.ravel(), jj.ravel(), kk.ravel()])
    if keep is not None:
        cells = cells[keep(cells)]
    vid = lambda i, j, k: (i * (ny + 1) + j) * (nz + 1) + k
    corners = np.empty((len(cells), 8), dtype=np.int64)
    for c in range(8):
        corners[:, c] = vid(cells[:, 0] + (c & 1), cells[:, 1] + ((c >> 1) & 1), cells[:, 2] + ((c >> 2) & 1))
    return corners[:, KUHN].reshape(-1, 4)


def _finish(vertices, tets, lo, hi, inner_tag=None, meta=None):
    used = np.unique(tets)
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    vertices = vertices[used]
    tets = remap[tets]
    provisional = TetMesh(vertices, tets)
    faces = provisional.boundary_faces()
    tags = tag_boundary_by_box(faces, vertices, lo, hi, inner_tag=inner_tag)
    return TetMesh(vertices, provisional.tets, None, faces, tags, meta or {})


def uniform_cube_mesh(n, box=UNIT_BOX):
    """Kuhn mesh of an axis-aligned box with ``6 * nx * ny * nz`` elements.

    ``n`` is a single subdivision count or a triple (nx, ny, nz).  Boundary
    facets are tagged x-=1, x+=2, y-=3, y+=4, z-=5, z+=6.
    """
    n = _counts(n)
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    verts = _grid_vertices(n, (lo, hi))
    tets = _kuhn_tets(n)
    meta = {"generator": "cube", "n": list(n), "box": [lo.tolist(), hi.tolist()]}
    return _finish(verts, tets, lo, hi, meta=meta)


def cube_with_hole_mesh(n, hole=((0.4, 0.4, 0.4), (0.6, 0.6, 0.6)), box=UNIT_BOX):
    """Kuhn mesh of a box with a box-shaped hole; the hole surface is tagged 7.

    The hole faces must lie on grid planes, otherwise :class:`GridMismatch`.
    """
    n = _counts(n)
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    hlo, hhi = (np.asarray(b, dtype=float) for b in hole)
    h = (hi - lo) / np.array(n)
    start = (hlo - lo) / h
    stop = (hhi - lo) / h
    for a in range(3):
        for val in (start[a], stop[a]):
            if abs(val - round(val)) > 1e-8:
                raise GridMismatch(
                    f"hole face at {lo[a] + val * h[a]:g} is not on the {n[a]}-cell grid along axis {a}")
    start = np.rint(start).astype(int)
    stop = np.rint(stop).astype(int)
    if np.any(start < 1) or np.any(stop > np.array(n) - 1) or np.any(stop <= start):
        raise GridMismatch("hole must lie strictly inside the box and cover at least one cell")

    def keep(cells):
        inside = np.all((cells >= start) & (cells < stop), axis=1)
        return ~inside

    verts = _grid_vertices(n, (lo, hi))
    tets = _kuhn_tets(n, keep)
    meta = {"generator": "hole", "n": list(n), "box": [lo.tolist(), hi.tolist()],
            "hole": [hlo.tolist(), hhi.tolist()]}
    return _finish(verts, tets, lo, hi, inner_tag=HOLE_TAG, meta=meta)


def diagonal_orthoscheme_mesh(n_xy, nz, box):
    """Orthoscheme mesh of a box whose xy cells are squares.

    Each square cell gets a center vertex and four right triangles whose legs
    run along the cell diagonals; each triangular prism of a z-layer is split
    into three tetrahedra along a global vertex order (even-parity corners,
    then centers, then odd-parity corners) which keeps faces conforming and
    makes every tetrahedron a path simplex with steps along (1,1,0)/sqrt2,
    (1,-1,0)/sqrt2 and (0,0,1).  Such elements satisfy the anisotropic
    non-obtuse condition for every diffusion tensor diagonal in that frame.
    """
    nx, ny = (int(k) for k in n_xy)
    nz = int(nz)
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    hx = (hi[0] - lo[0]) / nx
    hy = (hi[1] - lo[1]) / ny
    if abs(hx - hy) > 1e-9 * max(hx, hy):
        raise GridMismatch(f"xy cells must be square (hx={hx:g}, hy={hy:g})")
    zs = np.linspace(lo[2], hi[2], nz + 1)

    # planar vertices: corners then centers
    ci, cj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    corner_xy = np.column_stack([lo[0] + ci.ravel() * hx, lo[1] + cj.ravel() * hy])
    corner_id = lambda i, j: i * (ny + 1) + j
    si, sj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    si, sj = si.ravel(), sj.ravel()
    n_corner = (nx + 1) * (ny + 1)
    center_xy = np.column_stack([lo[0] + (si + 0.5) * hx, lo[1] + (sj + 0.5) * hy])
    center_id = n_corner + np.arange(len(si))
    plane_xy = np.vstack([corner_xy, center_xy])
    n_plane = len(plane_xy)

    parity = np.concatenate([(ci.ravel() + cj.ravel()) % 2, np.full(len(si), -1)])
    rank = np.where(parity == 0, 0, np.where(parity == -1, 1, 2))

    tris = []
    around = [(0, 0), (1, 0), (1, 1), (0, 1)]
    for k in range(4):
        a = corner_id(si + around[k][0], sj + around[k][1])
        b = corner_id(si + around[(k + 1) % 4][0], sj + around[(k + 1) % 4][1])
        tris.append(np.column_stack([a, center_id, b]))
    tris = np.vstack(tris)
    # order each triangle low-rank corner, center, high-rank corner
    swap = rank[tris[:, 0]] > rank[tris[:, 2]]
    tris[swap] = tris[swap][:, [2, 1, 0]]

    verts = np.vstack([np.column_stack([plane_xy, np.full(n_plane, z)]) for z in zs])
    tets = []
    for layer in range(nz):
        bot = tris + layer * n_plane
        top = tris + (layer + 1) * n_plane
        a0, b0, c0 = bot.T
        a1, b1, c1 = top.T
        tets.append(np.column_stack([a0, b0, c0, c1]))
        tets.append(np.column_stack([a0, b0, b1, c1]))
        tets.append(np.column_stack([a0, a1, b1, c1]))
    tets = np.vstack(tets)
    meta = {"generator": "orthoscheme", "n": [nx, ny, nz], "box": [lo.tolist(), hi.tolist()]}
    return _finish(verts, tets, lo, hi, meta=meta)
