import numpy as np
import pytest

from anisoadapt import _kernels
from anisoadapt.tetmesh import cube_with_hole_mesh

IMPLS = _kernels.implementations()


@pytest.fixture(scope="module")
def mesh():
    return cube_with_hole_mesh(5)


def _perturbed(mesh, rng):
    return mesh.vertices + 0.02 * rng.uniform(-1, 1, size=mesh.vertices.shape)


def test_backend_is_named():
    assert _kernels.BACKEND in IMPLS
    assert "numpy" in IMPLS


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_tet_geometry(name, mesh, rng):
    coords = _perturbed(mesh, rng)
    vol, grads = IMPLS[name].tet_geometry(coords, mesh.tets)
    ref_vol, ref_grads = IMPLS["numpy"].tet_geometry(coords, mesh.tets)
    np.testing.assert_allclose(vol, ref_vol, rtol=1e-12)
    np.testing.assert_allclose(grads, ref_grads, rtol=1e-10, atol=1e-10)
    # barycentric gradients against the dense inverse
    C = np.concatenate([np.ones((mesh.n_elements, 4, 1)), coords[mesh.tets]], axis=2)
    dense = np.transpose(np.linalg.inv(C)[:, 1:, :], (0, 2, 1))
    np.testing.assert_allclose(grads, dense, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_local_stiffness(name, mesh, rng):
    vol, grads = IMPLS["numpy"].tet_geometry(mesh.vertices, mesh.tets)
    A = rng.normal(size=(mesh.n_elements, 3, 3))
    D = A @ np.swapaxes(A, 1, 2) + np.eye(3)
    K = IMPLS[name].local_stiffness(grads, vol, D)
    ref = IMPLS["numpy"].local_stiffness(grads, vol, D)
    np.testing.assert_allclose(K, ref, rtol=1e-11, atol=1e-14)
    np.testing.assert_allclose(K.sum(axis=2), 0.0, atol=1e-11)


@pytest.mark.parametrize("name", sorted(IMPLS))
@pytest.mark.parametrize("order", [1, 2])
def test_lsq_normal_systems(name, order, mesh, rng):
    adj = mesh.vertex_adjacency
    values = rng.normal(size=(mesh.n_vertices, 2))
    got = IMPLS[name].lsq_normal_systems(mesh.vertices, values, adj.indptr, adj.indices, order)
    ref = IMPLS["numpy"].lsq_normal_systems(mesh.vertices, values, adj.indptr, adj.indices, order)
    for g, r in zip(got, ref):
        np.testing.assert_allclose(g, r, rtol=1e-11, atol=1e-12)


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_locate_points(name, mesh, rng):
    elems = rng.integers(0, mesh.n_elements, size=50)
    w = rng.dirichlet(np.ones(4), size=50)
    pts = np.einsum("nk,nka->na", w, mesh.vertices[mesh.tets[elems]])
    cand = np.stack([(elems + 7) % mesh.n_elements, elems], axis=1)
    e, bary, found = IMPLS[name].locate_points(pts, mesh.vertices, mesh.tets, cand)
    assert found.all()
    np.testing.assert_array_equal(e, elems)
    np.testing.assert_allclose(bary, w, atol=1e-10)
