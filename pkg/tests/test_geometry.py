import numpy as np
import pytest

from conftest import random_spd
from anisoadapt.errors import DegenerateElement, NotSpd
from anisoadapt.geometry import (REFERENCE, check_spd, condition_matrix, element_map, element_maps,
                                 maps_from_points, spd_inverse, spd_power)
from anisoadapt.tetmesh import TetMesh


def test_reference_tet_is_regular():
    v = REFERENCE.vertices
    d = [np.linalg.norm(v[i] - v[j]) for i in range(4) for j in range(i + 1, 4)]
    np.testing.assert_allclose(d, 1.0, rtol=1e-14)
    assert REFERENCE.volume == pytest.approx(abs(np.linalg.det(REFERENCE.edge_matrix)) / 6)


def test_inward_normals_pairwise_products():
    q = REFERENCE.inward_normals
    G = q @ q.T
    np.testing.assert_allclose(np.diag(G), 1.0, rtol=1e-14)
    off = G[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, -1.0 / 3.0, atol=1e-14)
    # inward: normal i points from face i toward vertex i
    c = REFERENCE.vertices.mean(axis=0)
    for i in range(4):
        assert np.dot(q[i], REFERENCE.vertices[i] - c) > 0


def test_map_sends_reference_vertices_to_element():
    P = np.array([[0.1, 0.0, 0.2], [1.0, 0.3, 0.0], [0.2, 1.1, 0.1], [0.0, 0.2, 0.9]])
    emap = maps_from_points(P)
    np.testing.assert_allclose(emap(REFERENCE.vertices), P, atol=1e-14)
    vol = abs(np.linalg.det(np.column_stack([P[1] - P[0], P[2] - P[0], P[3] - P[0]]))) / 6
    assert emap.volume == pytest.approx(vol)


def test_reference_map_is_identity():
    emap = maps_from_points(REFERENCE.vertices)
    np.testing.assert_allclose(emap.jacobian, np.eye(3), atol=1e-14)


def test_degenerate_element_reports_id():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0]], dtype=float)
    tets = np.array([[0, 1, 2, 3], [0, 1, 4, 2]])  # second one is flat
    with pytest.raises(DegenerateElement) as err:
        TetMesh(verts, tets)
    assert err.value.element_id == 1
    with pytest.raises(DegenerateElement):
        maps_from_points(verts[[0, 1, 4, 2]])


def test_condition_matrix_cancellation(rng):
    # with T = F' F'^T the condition matrix is the identity
    J = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    P = REFERENCE.vertices @ J.T
    emap = maps_from_points(P)
    A = condition_matrix(emap, emap.jacobian @ emap.jacobian.T)
    np.testing.assert_allclose(A, np.eye(3), atol=1e-12)


def test_element_maps_batch_matches_single(cube4):
    maps = element_maps(cube4)
    one = element_map(cube4, 17)
    np.testing.assert_allclose(maps.jacobian[17], one.jacobian)
    np.testing.assert_allclose(maps.volume.sum(), 1.0, rtol=1e-12)


def test_spd_helpers(rng):
    T = random_spd(rng, size=5)
    np.testing.assert_allclose(spd_inverse(T) @ T, np.broadcast_to(np.eye(3), (5, 3, 3)), atol=1e-9)
    S = spd_power(T, 0.5)
    np.testing.assert_allclose(S @ S, T, rtol=1e-10, atol=1e-10)


def test_check_spd_rejects():
    with pytest.raises(NotSpd):
        check_spd(np.diag([1.0, -1.0, 2.0]))
    with pytest.raises(NotSpd):
        check_spd(np.array([[1.0, 0.5, 0], [0, 1, 0], [0, 0, 1]]))
    with pytest.raises(NotSpd):
        check_spd(np.eye(2))
