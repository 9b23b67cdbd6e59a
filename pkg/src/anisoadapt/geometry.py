"""Reference tetrahedron, affine element maps and the matrix kernel behind
every mesh condition.

All functions broadcast over a leading element axis: an :class:`ElementMap`
may describe one element (``jacobian`` of shape (3, 3)) or a whole mesh
(shape (N, 3, 3)).
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateElement, NotSpd

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)
SQRT6 = np.sqrt(6.0)


@dataclass(frozen=True)
class ReferenceTet:
    vertices: np.ndarray
    inward_normals: np.ndarray

    @property
    def volume(self):
        return SQRT2 / 12.0

    @property
    def edge_matrix(self):
        """Columns are the edges from vertex 0 to vertices 1, 2, 3."""
        return (self.vertices[1:] - self.vertices[0]).T


def _build_reference():
    v = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.5, SQRT3 / 2.0, 0.0],
            [0.5, SQRT3 / 6.0, SQRT6 / 3.0],
        ]
    )
    E = (v[1:] - v[0]).T
    Einv = np.linalg.inv(E)
    # gradients of the barycentric coordinates point from the opposite face toward the vertex
    grads = np.vstack([-Einv.sum(axis=0), Einv])
    normals = grads / np.linalg.norm(grads, axis=1, keepdims=True)
    v.setflags(write=False)
    normals.setflags(write=False)
    return ReferenceTet(v, normals)


REFERENCE = _build_reference()
_REF_EDGES_INV = np.linalg.inv(REFERENCE.edge_matrix)


@dataclass(frozen=True)
class ElementMap:
    """Affine map ``x = jacobian @ xi + translation`` from the reference element."""

    jacobian: np.ndarray
    translation: np.ndarray
    volume: np.ndarray

    def __call__(self, xi):
        return np.einsum("...ij,...j->...i", self.jacobian, xi) + self.translation

    @property
    def inverse_jacobian(self):
        return np.linalg.inv(self.jacobian)

    def __len__(self):
        return 1 if self.jacobian.ndim == 2 else self.jacobian.shape[0]


def _degeneracy_floor(vertices):
    lo = vertices.min(axis=0)
    hi = vertices.max(axis=0)
    diag = float(np.linalg.norm(hi - lo))
    return 1e-30 * diag**3


def maps_from_points(p, floor=None):
    """Element maps from vertex coordinates of shape (..., 4, 3)."""
    p = np.asarray(p, dtype=float)
    E = np.swapaxes(p[..., 1:, :] - p[..., :1, :], -1, -2)
    J = E @ _REF_EDGES_INV
    det = np.linalg.det(J)
    if floor is None:
        floor = _degeneracy_floor(p.reshape(-1, 3))
    bad = np.abs(det) < floor
    if np.any(bad):
        idx = int(np.flatnonzero(np.atleast_1d(bad))[0])
        raise DegenerateElement(f"element {idx} is degenerate (|det F'| = {np.atleast_1d(det)[idx]:.3e})", idx)
    vol = np.abs(det) * REFERENCE.volume
    return ElementMap(J, p[..., 0, :].copy(), vol)


def element_map(mesh, element_id):
    """Affine map of one stored element; vertex order follows the mesh."""
    p = mesh.vertices[mesh.tets[element_id]]
    try:
        return maps_from_points(p, floor=_degeneracy_floor(mesh.vertices))
    except DegenerateElement as exc:
        raise DegenerateElement(f"element {element_id} is degenerate", element_id) from exc


def element_maps(mesh):
    """Affine maps of all elements at once."""
    return maps_from_points(mesh.vertices[mesh.tets], floor=_degeneracy_floor(mesh.vertices))


def condition_matrix(emap, T):
    """``(F')^{-1} T (F')^{-T}``, symmetrized against round-off."""
    Jinv = emap.inverse_jacobian
    A = Jinv @ np.asarray(T, dtype=float) @ np.swapaxes(Jinv, -1, -2)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def check_spd(T, what="tensor"):
    """Raise :class:`NotSpd` unless every matrix in ``T`` is symmetric positive definite."""
    T = np.asarray(T, dtype=float)
    if T.shape[-2:] != (3, 3):
        raise NotSpd(f"{what} must be 3x3, got shape {T.shape}")
    scale = np.max(np.abs(T), axis=(-1, -2), keepdims=True)
    scale = np.where(scale == 0, 1.0, scale)
    if np.any(np.abs(T - np.swapaxes(T, -1, -2)) > 1e-12 * scale):
        raise NotSpd(f"{what} is not symmetric")
    lam = np.linalg.eigvalsh(T)
    if np.any(lam[..., 0] <= 0):
        bad = np.flatnonzero(np.atleast_2d(lam)[:, 0] <= 0)
        raise NotSpd(f"{what} is not positive definite (first offending index {int(bad[0])}, "
                     f"smallest eigenvalue {np.atleast_2d(lam)[bad[0], 0]:.3e})")
    return T


def spd_power(T, power):
    """Matrix power of SPD matrices via the symmetric eigendecomposition."""
    lam, Q = np.linalg.eigh(T)
    return (Q * lam[..., None, :] ** power) @ np.swapaxes(Q, -1, -2)


def spd_inverse(T):
    T = np.asarray(T, dtype=float)
    inv = np.linalg.inv(T)
    return 0.5 * (inv + np.swapaxes(inv, -1, -2))
