import numpy as np
import pytest

from conftest import random_spd
from anisoadapt.errors import SingularFit
from anisoadapt.problems import RING_RADIUS, example1_exact, example1_hessian
from anisoadapt.recovery import build_stencils, element_hessians, recover_gradient, recover_hessian
from anisoadapt.tetmesh import TetMesh, cube_with_hole_mesh, uniform_cube_mesh


@pytest.fixture(scope="module")
def cube():
    return uniform_cube_mesh(4)


def interior(mesh):
    return ~mesh.boundary_vertices


def test_stencils_large_enough(cube):
    st = build_stencils(cube)
    assert st.sizes().min() >= 9
    assert set(np.unique(st.hops)) <= {1, 2}


@pytest.mark.parametrize("mesh", [uniform_cube_mesh(4), cube_with_hole_mesh(5)], ids=["cube", "hole"])
def test_affine_exactness(mesh, rng):
    a, b = rng.normal(), rng.normal(size=3)
    u = a + mesh.vertices @ b
    g = recover_gradient(mesh, u)
    np.testing.assert_allclose(g, np.broadcast_to(b, g.shape), atol=1e-10)
    H = recover_hessian(mesh, u)
    assert np.abs(H).max() <= 1e-10


def test_constant_gives_zero(cube):
    g = recover_gradient(cube, np.full(cube.n_vertices, 3.5))
    assert np.abs(g).max() <= 1e-12


def test_x_squared_gradient(cube):
    x = cube.vertices[:, 0]
    g = recover_gradient(cube, x * x)
    np.testing.assert_allclose(g[:, 0], 2 * x, atol=1e-8)
    np.testing.assert_allclose(g[:, 1:], 0.0, atol=1e-8)


def test_quadratic_hessian_exact(cube, rng):
    Q = random_spd(rng, 10) - 2 * np.eye(3)
    c = rng.normal(size=3)
    X = cube.vertices
    u = 0.5 * np.einsum("na,ab,nb->n", X, Q, X) + X @ c
    H = recover_hessian(cube, u)
    err = np.abs(H - Q).max(axis=(1, 2))
    assert err[interior(cube)].max() <= 1e-8
    # boundary vertices are checked too, not assumed
    assert err.max() <= 1e-8
    np.testing.assert_array_equal(H, np.swapaxes(H, 1, 2))


def test_cubic_hessian_converges():
    errs = []
    for n in (4, 8, 16):
        m = uniform_cube_mesh(n)
        x, y, z = m.vertices.T
        u = x ** 3 + x * y * z + np.sin(z)
        H = recover_hessian(m, u)
        exact = np.zeros_like(H)
        exact[:, 0, 0] = 6 * x
        exact[:, 2, 2] = -np.sin(z)
        exact[:, 0, 1] = exact[:, 1, 0] = z
        exact[:, 0, 2] = exact[:, 2, 0] = y
        exact[:, 1, 2] = exact[:, 2, 1] = x
        errs.append(np.abs(H - exact)[interior(m)].max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates >= 0.9)


def _ring_error(n):
    m = uniform_cube_mesh(n)
    H = recover_hessian(m, example1_exact(m.vertices))
    Hx = example1_hessian(m.vertices)
    return m, H, float(np.sqrt(np.sum((H - Hx) ** 2) / np.sum(Hx ** 2)))


def test_ring_hessian_trend():
    errs = [_ring_error(n)[2] for n in (8, 16, 32)]
    assert errs[0] > errs[1] > errs[2]
    m, H, _ = _ring_error(16)
    big = np.linalg.norm(H, axis=(1, 2))
    r = np.hypot(m.vertices[:, 0] - 0.5, m.vertices[:, 1] - 0.5)
    assert np.abs(r[np.argmax(big)] - RING_RADIUS) <= 0.1


@pytest.mark.xfail(strict=True, reason="16 cells per axis under-resolve the ring; error is about 59%, 23% at n=32")
def test_ring_hessian_accuracy_n16():
    assert _ring_error(16)[2] <= 0.30


def test_element_hessian_is_vertex_mean(cube, rng):
    Hn = rng.normal(size=(cube.n_vertices, 3, 3))
    He = element_hessians(cube, Hn)
    np.testing.assert_allclose(He[7], Hn[cube.tets[7]].mean(axis=0))


def test_singular_everywhere():
    # a lone tetrahedron gives every vertex three neighbours, too few for any fit
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    m = TetMesh(v, [[0, 1, 2, 3]])
    with pytest.raises(SingularFit):
        recover_hessian(m, v[:, 0])


def test_bad_shape(cube):
    with pytest.raises(ValueError):
        recover_gradient(cube, np.zeros(3))
