"""Point evaluation of element metric fields through a P1 vertex interpolant."""
import numpy as np
from scipy.spatial import cKDTree

from .. import _kernels
from ..metric import vertex_average


class MetricSampler:
    """Evaluate the volume-weighted vertex average of an element metric at arbitrary points.

    Points are located by testing the elements whose barycenters are
    nearest; points outside every candidate take the clamped barycentric
    coordinates of the closest candidate.
    """

    def __init__(self, mesh, metric, k=16):
        tensors = np.asarray(getattr(metric, "tensors", metric), dtype=float)
        tensors = np.broadcast_to(tensors, (mesh.n_elements, 3, 3))
        self.mesh = mesh
        self.vertex_tensors = vertex_average(mesh, tensors)
        self.sigma_h = float(np.sum(np.abs(mesh.volumes) * np.sqrt(np.linalg.det(tensors))))
        self.k = min(k, mesh.n_elements)
        self._tree = cKDTree(mesh.barycenters)

    def locate(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = self.mesh
        _, cand = self._tree.query(points, k=self.k)
        cand = np.asarray(cand, dtype=np.int64).reshape(len(points), -1)
        elem, bary, found = _kernels.locate_points(points, m.vertices, m.tets, cand)
        miss = np.flatnonzero(~found)
        if len(miss) and self.k < m.n_elements:
            k2 = min(8 * self.k, m.n_elements)
            _, cand2 = self._tree.query(points[miss], k=k2)
            cand2 = np.asarray(cand2, dtype=np.int64).reshape(len(miss), -1)
            e2, b2, f2 = _kernels.locate_points(points[miss], m.vertices, m.tets, cand2)
            elem[miss], bary[miss], found[miss] = e2, b2, f2
        bary = np.clip(bary, 0.0, None)
        bary /= bary.sum(axis=1, keepdims=True)
        return elem, bary, found

    def __call__(self, points):
        elem, bary, _ = self.locate(points)
        Mv = self.vertex_tensors[self.mesh.tets[elem]]  # (n, 4, 3, 3)
        return np.einsum("nk,nkab->nab", bary, Mv)

