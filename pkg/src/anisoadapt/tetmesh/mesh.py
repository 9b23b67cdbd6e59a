from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .. import _kernels
from ..errors import DegenerateElement, SizeMismatch, TopologyError

# local face k of a tet is opposite local vertex k
TET_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])
TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TetMesh:
    """Conforming tetrahedral mesh with region and boundary tags.

    Indices are 0-based.  Elements with negative orientation are fixed on
    construction by swapping their last two vertices.  ``meta`` records how
    the mesh was generated (box, hole, grid counts) when a built-in
    generator made it.
    """

    vertices: np.ndarray
    tets: np.ndarray
    tet_tags: np.ndarray = None
    facets: np.ndarray = None
    facet_tags: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        tets = np.array(self.tets, dtype=np.int64, copy=True).reshape(-1, 4)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise TopologyError(f"vertices must have shape (n, 3), got {verts.shape}")
        nv = len(verts)
        if tets.size and (tets.min() < 0 or tets.max() >= nv):
            raise TopologyError("tetrahedron vertex index out of range")
        facets = np.zeros((0, 3), dtype=np.int64) if self.facets is None else np.asarray(self.facets, dtype=np.int64).reshape(-1, 3)
        if facets.size and (facets.min() < 0 or facets.max() >= nv):
            raise TopologyError("facet vertex index out of range")
        tet_tags = np.zeros(len(tets), dtype=np.int64) if self.tet_tags is None else np.asarray(self.tet_tags, dtype=np.int64)
        facet_tags = np.zeros(len(facets), dtype=np.int64) if self.facet_tags is None else np.asarray(self.facet_tags, dtype=np.int64)
        if len(tet_tags) != len(tets) or len(facet_tags) != len(facets):
            raise TopologyError("tag arrays must match element/facet counts")
        if len(tets):
            vol, _ = _kernels.tet_geometry(verts, tets)
            lo, hi = verts.min(axis=0), verts.max(axis=0)
            floor = 1e-30 * float(np.linalg.norm(hi - lo)) ** 3 / 6.0
            bad = np.abs(vol) < floor
            if np.any(bad):
                idx = int(np.flatnonzero(bad)[0])
                raise DegenerateElement(f"element {idx} is degenerate (volume {vol[idx]:.3e})", idx)
            neg = vol < 0
            tets[neg] = tets[neg][:, [0, 1, 3, 2]]
        object.__setattr__(self, "vertices", _frozen(verts, np.float64))
        object.__setattr__(self, "tets", _frozen(tets, np.int64))
        object.__setattr__(self, "facets", _frozen(facets, np.int64))
        object.__setattr__(self, "tet_tags", _frozen(tet_tags, np.int64))
        object.__setattr__(self, "facet_tags", _frozen(facet_tags, np.int64))

    @property
    def n_elements(self):
        return len(self.tets)

    N = n_elements

    @property
    def n_vertices(self):
        return len(self.vertices)

    @cached_property
    def geometry(self):
        return _kernels.tet_geometry(self.vertices, self.tets)

    @property
    def volumes(self):
        return self.geometry[0]

    @property
    def basis_gradients(self):
        return self.geometry[1]

    @cached_property
    def volume(self):
        return float(np.sum(self.volumes))

    @cached_property
    def barycenters(self):
        return self.vertices[self.tets].mean(axis=1)

    @cached_property
    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @cached_property
    def _faces(self):
        faces = self.tets[:, TET_FACES].reshape(-1, 3)
        key = np.sort(faces, axis=1)
        uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return faces, uniq, inverse.reshape(-1), counts

    def boundary_faces(self):
        """Faces belonging to exactly one element, outward oriented, as (nf, 3)."""
        faces, _, inverse, counts = self._faces
        return faces[counts[inverse] == 1]

    @cached_property
    def vertex_adjacency(self):
        """Symmetric CSR pattern of the vertex graph (no diagonal)."""
        e = self.tets[:, TET_EDGES].reshape(-1, 2)
        n = self.n_vertices
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        A = sp.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
        A.data[:] = 1
        A.sort_indices()
        return A

    def edges(self):
        """Unique edges as sorted vertex pairs, shape (ne, 2)."""
        e = np.sort(self.tets[:, TET_EDGES].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def boundary_vertices(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_faces().ravel()] = True
        return mask

    def check_topology(self):
        """Raise :class:`TopologyError` when a mesh invariant fails."""
        faces, uniq, inverse, counts = self._faces
        if np.any(counts > 2):
            raise TopologyError("a face is shared by more than two elements")
        if len(self.facets):
            fkey = np.sort(self.facets, axis=1)
            bkey = uniq[counts == 1]
            as_rows = lambda a: {tuple(r) for r in a.tolist()}
            missing = as_rows(fkey) - as_rows(bkey)
            if missing:
                raise TopologyError(f"{len(missing)} boundary facets are not faces of exactly one element")
        if np.any(self.volumes <= 0):
            raise TopologyError("non-positive element volume")
        return True

    def with_facet_tags(self, facet_tags):
        return TetMesh(self.vertices, self.tets, self.tet_tags, self.facets, facet_tags, dict(self.meta))

    def with_tet_tags(self, tet_tags):
        return TetMesh(self.vertices, self.tets, tet_tags, self.facets, self.facet_tags, dict(self.meta))

    def __repr__(self):
        return f"TetMesh(n_vertices={self.n_vertices}, n_elements={self.n_elements}, n_facets={len(self.facets)})"


@dataclass(frozen=True)
class Field:
    """One value (scalar, vector or 3x3 tensor) per vertex or per element."""

    values: np.ndarray
    location: str = "vertices"

    def __post_init__(self):
        if self.location not in ("vertices", "elements"):
            raise ValueError("location must be 'vertices' or 'elements'")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def __len__(self):
        return len(self.values)

    @property
    def kind(self):
        shape = self.values.shape[1:]
        if shape == ():
            return "scalar"
        if shape == (3,):
            return "vector"
        if shape == (3, 3):
            return "tensor"
        raise ValueError(f"unsupported field shape {self.values.shape}")

    def check(self, mesh):
        n = mesh.n_vertices if self.location == "vertices" else mesh.n_elements
        if len(self.values) != n:
            raise SizeMismatch(f"field has {len(self.values)} entries, mesh has {n} {self.location}")
        return self


def NodalField(values):
    return Field(values, "vertices")


def ElementField(values):
    return Field(values, "elements")


def tag_boundary_by_box(mesh_faces, vertices, lo, hi, inner_tag=None, tol=1e-9):
    """Tag boundary faces of a box domain: x-=1, x+=2, y-=3, y+=4, z-=5, z+=6.

    Faces not on the outer box get ``inner_tag`` (used for the hole surface).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    c = vertices[mesh_faces].mean(axis=1)
    span = np.max(hi - lo)
    tags = np.full(len(mesh_faces), -1, dtype=np.int64)
    for axis in range(3):
        tags[np.abs(c[:, axis] - lo[axis]) <= tol * span] = 2 * axis + 1
        tags[np.abs(c[:, axis] - hi[axis]) <= tol * span] = 2 * axis + 2
    if np.any(tags < 0):
        if inner_tag is None:
            raise TopologyError("boundary face off the bounding box")
        tags[tags < 0] = inner_tag
    return tags
