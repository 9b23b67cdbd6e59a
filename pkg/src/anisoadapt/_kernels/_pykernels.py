"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors every function
with the same signature and must agree to round-off.
"""
import numpy as np

__all__ = ["tet_geometry", "local_stiffness", "lsq_normal_systems", "locate_points"]


def tet_geometry(coords, tets):
    """Signed volumes and barycentric-coordinate gradients of every tetrahedron.

    Returns ``(vol, grads)`` with ``vol`` of shape (N,) (signed, positive for
    right-handed vertex order) and ``grads`` of shape (N, 4, 3).
    """
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    tets = np.ascontiguousarray(tets, dtype=np.int64)
    p = coords[tets]
    E = np.transpose(p[:, 1:, :] - p[:, :1, :], (0, 2, 1))
    det = np.linalg.det(E)
    vol = det / 6.0
    safe = np.where(det == 0.0, 1.0, det)
    # cofactor-based inverse keeps degenerate rows finite (they are rejected upstream)
    a, b, c = E[:, :, 0], E[:, :, 1], E[:, :, 2]
    inv_rows = np.stack([np.cross(b, c), np.cross(c, a), np.cross(a, b)], axis=1) / safe[:, None, None]
    grads = np.empty((len(tets), 4, 3))
    grads[:, 1:, :] = inv_rows
    grads[:, 0, :] = -inv_rows.sum(axis=1)
    return vol, grads


def local_stiffness(grads, vol, diff):
    """Element matrices ``|K| * grad(phi_i)^T D_K grad(phi_j)``, shape (N, 4, 4)."""
    vol = np.abs(np.asarray(vol, dtype=np.float64))
    return np.einsum("n,nia,nab,njb->nij", vol, grads, diff, grads, optimize=True)


def _monomials(d, order):
    if order == 1:
        return d
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    quad = np.stack([0.5 * x * x, 0.5 * y * y, 0.5 * z * z, x * y, y * z, x * z], axis=-1)
    return np.concatenate([d, quad], axis=-1)


def lsq_normal_systems(coords, values, indptr, indices, order):
    """Normal equations of the per-vertex least-squares fits.

    For vertex ``v`` with stencil ``indices[indptr[v]:indptr[v+1]]`` the model
    ``values[j] - values[v] ~ c . m((x_j - x_v) / s_v)`` is fitted, where ``m``
    is the affine (order 1, 3 terms) or quadratic (order 2, 9 terms) monomial
    vector and ``s_v`` the largest stencil offset.  Returns ``(N, R, s)`` with
    ``N`` of shape (nv, p, p), ``R`` of shape (nv, p, m) and ``s`` of shape (nv,).
    """
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    nv = len(indptr) - 1
    p = 3 if order == 1 else 9
    counts = np.diff(indptr)
    centers = np.repeat(np.arange(nv), counts)
    d = coords[indices] - coords[centers]
    dist = np.sqrt((d * d).sum(axis=1))
    scale = np.zeros(nv)
    np.maximum.at(scale, centers, dist)
    scale[scale == 0.0] = 1.0
    d = d / scale[centers, None]
    a = _monomials(d, order)
    du = values[indices] - values[centers]
    N = np.zeros((nv, p, p))
    R = np.zeros((nv, p, values.shape[1]))
    np.add.at(N, centers, a[:, :, None] * a[:, None, :])
    np.add.at(R, centers, a[:, :, None] * du[:, None, :])
    return N, R, scale


def locate_points(points, coords, tets, candidates, tol=1e-10):
    """Find, for every point, the first candidate tetrahedron containing it.

    ``candidates`` has shape (npts, k).  Returns ``(elem, bary, found)``.  When
    no candidate contains a point, ``found`` is False and ``elem``/``bary``
    refer to the candidate whose smallest barycentric coordinate is least
    negative.
    """
    points = np.asarray(points, dtype=np.float64)
    candidates = np.asarray(candidates, dtype=np.int64)
    npts, k = candidates.shape
    p = coords[tets[candidates]]  # (npts, k, 4, 3)
    E = np.transpose(p[:, :, 1:, :] - p[:, :, :1, :], (0, 1, 3, 2))
    rhs = points[:, None, :] - p[:, :, 0, :]
    lam = np.linalg.solve(E, rhs[..., None])[..., 0]
    bary = np.concatenate([1.0 - lam.sum(axis=-1, keepdims=True), lam], axis=-1)
    worst = bary.min(axis=-1)
    inside = worst >= -tol
    first = np.where(inside.any(axis=1), inside.argmax(axis=1), worst.argmax(axis=1))
    rows = np.arange(npts)
    return candidates[rows, first], bary[rows, first], inside[rows, first]
