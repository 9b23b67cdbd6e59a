import sys

import numpy as np
import pytest

from conftest import random_spd
from anisoadapt.adapt import (AdaptConfig, Backend, MetricSampler, adapt_loop, external_mesher_roundtrip,
                              format_command, generate_affine_mapped, generate_bisection)
from anisoadapt.errors import ExternalFailure, InputError, MissingOutput, UnsupportedGeometry
from anisoadapt.femsolve import Problem
from anisoadapt.geometry import element_maps
from anisoadapt.metric import MetricKind
from anisoadapt.problems import example1_problem, example2_problem
from anisoadapt.quality import check_nonobtuse, l2_norm, mp_bound, q_ali, q_eq
from anisoadapt.tetmesh import cube_with_hole_mesh, uniform_cube_mesh, write_medit


def same_mesh(a, b):
    return (np.array_equal(a.tets, b.tets) and np.allclose(a.vertices, b.vertices, rtol=0, atol=1e-14)
            and np.array_equal(a.facets, b.facets) and np.array_equal(a.facet_tags, b.facet_tags))


# --- affine-mapped -----------------------------------------------------------------------

def test_affine_identity_is_uniform():
    m = generate_affine_mapped(np.eye(3), 384, ((0, 0, 0), (1, 1, 1)))
    assert same_mesh(m, uniform_cube_mesh(4))


def test_affine_rejects_varying_metric():
    M = np.broadcast_to(np.eye(3), (6, 3, 3)).copy()
    M[3] *= 2
    with pytest.raises(UnsupportedGeometry):
        generate_affine_mapped(M, 100, ((0, 0, 0), (1, 1, 1)))
    with pytest.raises(UnsupportedGeometry):
        generate_affine_mapped(np.eye(3), 100, None)


def test_affine_axis_ratios():
    D = np.diag([100.0, 10.0, 1.0])
    m = generate_affine_mapped(np.linalg.inv(D), 50_000, ((0, 0, 0), (1, 1, 1)))
    n = np.array(m.meta["n"])
    h = 1.0 / n
    assert h[0] / h[2] == pytest.approx(10.0, rel=0.15)
    assert h[1] / h[2] == pytest.approx(np.sqrt(10.0), rel=0.15)
    assert m.n_elements == pytest.approx(50_000, rel=0.3)


def test_affine_alignment_matches_preimage(rng):
    M = random_spd(rng, 50)
    m = generate_affine_mapped(M, 3000, ((0, 0, 0), (1, 2, 1)))
    assert m.meta["rotated"]
    q = q_ali(element_maps(m), M)
    # the pre-image is a Kuhn mesh with cells of aspect close to one
    assert q.max() <= 2.151 * 1.6
    assert np.ptp(q_eq(m, np.broadcast_to(M, (m.n_elements, 3, 3)))[0]) <= 1e-8


def test_affine_dmp_mesh_nonobtuse():
    prob = example2_problem(2)
    D = np.asarray(prob.diffusion)
    m = generate_affine_mapped(np.linalg.inv(D), 5000, ((0, 0, 0), (1, 1, 1)))
    _, ok = check_nonobtuse(element_maps(m), D)
    assert ok.all()


def test_affine_hole_multiples():
    m = generate_affine_mapped(np.diag([1.0, 4.0, 1.0]), 6000, ((0, 0, 0), (1, 1, 1)),
                               ((0.4, 0.4, 0.4), (0.6, 0.6, 0.6)))
    assert all(k % 5 == 0 for k in m.meta["n"])
    assert m.volume == pytest.approx(0.992)
    assert 7 in m.facet_tags


# --- bisection ---------------------------------------------------------------------------

def test_bisection_noop():
    m = uniform_cube_mesh(3)
    assert same_mesh(generate_bisection(m, np.eye(3), m.n_elements), m)


def test_bisection_eightfold():
    m = uniform_cube_mesh(3)
    new = generate_bisection(m, np.eye(3), 8 * m.n_elements)
    assert new.n_elements >= 8 * m.n_elements
    assert new.n_elements <= 10 * m.n_elements
    assert new.volume == pytest.approx(1.0, rel=1e-10)
    assert np.all(new.volumes > 0)
    new.check_topology()
    # boundary tags keep covering the same faces
    areas = {t: 0.0 for t in range(1, 7)}
    tri = new.vertices[new.facets]
    a = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    for t in areas:
        assert a[new.facet_tags == t].sum() == pytest.approx(1.0, rel=1e-12)


def test_bisection_hole_conserves_volume():
    m = cube_with_hole_mesh(5)
    new = generate_bisection(m, np.diag([1.0, 25.0, 1.0]), 3 * m.n_elements)
    assert new.volume == pytest.approx(0.992, rel=1e-10)
    new.check_topology()
    assert set(np.unique(new.facet_tags)) == set(range(1, 8))


def _random_metric(rng):
    c = rng.uniform(0.2, 0.8, 3)
    s = rng.uniform(0.1, 0.3)
    a = rng.uniform(5, 200)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    A = (Q * rng.uniform(0.2, 1.0, 3)) @ Q.T

    def M(p):
        d = p - c
        g = a * np.exp(-np.einsum("na,ab,nb->n", d, A, d) / s ** 2)
        return (1 + g)[:, None, None] * np.eye(3)

    return M


def test_bisection_improves_equidistribution():
    m0 = uniform_cube_mesh(4)
    wins = 0
    trials = 20
    for seed in range(trials):
        M = _random_metric(np.random.default_rng(seed))
        new = generate_bisection(m0, M(m0.barycenters), 4 * m0.n_elements)
        assert new.n_elements >= m0.n_elements and np.all(new.volumes > 0)
        before = l2_norm(m0.volumes, q_eq(m0, M(m0.barycenters))[0])
        after = l2_norm(new.volumes, q_eq(new, M(new.barycenters))[0])
        wins += after <= before
    assert wins >= 0.8 * trials


def test_sampler_reproduces_linear_field():
    m = uniform_cube_mesh(3)
    s = MetricSampler(m, np.broadcast_to(np.diag([1.0, 2.0, 3.0]), (m.n_elements, 3, 3)))
    pts = np.random.default_rng(0).uniform(0, 1, size=(30, 3))
    np.testing.assert_allclose(s(pts), np.broadcast_to(np.diag([1.0, 2.0, 3.0]), (30, 3, 3)), rtol=1e-12)
    assert s.sigma_h == pytest.approx(np.sqrt(6.0))


# --- external mesher ---------------------------------------------------------------------

def test_format_command_quotes(tmp_path):
    cmd = format_command("mesher -in {in_mesh} -sol {in_sol} -out {out_mesh}",
                         in_mesh=tmp_path / "a b.mesh", in_sol=tmp_path / "a.sol", out_mesh=tmp_path / "o.mesh")
    assert "'" in cmd and "{" not in cmd


def test_external_identity_stub():
    m = cube_with_hole_mesh(5)
    out = external_mesher_roundtrip(m, np.eye(3), "cp {in_mesh} {out_mesh}")
    assert same_mesh(out, m)


def test_external_python_stub(tmp_path):
    script = tmp_path / "stub.py"
    script.write_text("import shutil, sys\nassert open(sys.argv[2]).read().count('SolAtVertices') == 1\n"
                      "shutil.copy(sys.argv[1], sys.argv[3])\n")
    m = uniform_cube_mesh(2)
    out = external_mesher_roundtrip(m, np.eye(3), f"{sys.executable} {script} {{in_mesh}} {{in_sol}} {{out_mesh}}")
    assert same_mesh(out, m)


@pytest.mark.parametrize("command, exc", [
    ("false", ExternalFailure),
    ("true", MissingOutput),
    ("echo 'Vertices nonsense' > {out_mesh}", ExternalFailure),
])
def test_external_failures(command, exc):
    with pytest.raises(exc) as err:
        external_mesher_roundtrip(uniform_cube_mesh(1), np.eye(3), command)
    assert err.value.exit_code == 5


def test_external_bad_topology(tmp_path):
    bad = tmp_path / "bad.mesh"
    write_medit(uniform_cube_mesh(1), bad)
    head, tail = bad.read_text().split("Tetrahedra\n6\n")
    bad.write_text(head + "Tetrahedra\n6\n1 2 4 99 0" + tail[tail.index("\n"):])
    with pytest.raises(ExternalFailure):
        external_mesher_roundtrip(uniform_cube_mesh(1), np.eye(3), f"cp {bad} {{out_mesh}}")


# --- loop --------------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(InputError):
        AdaptConfig(iterations=0)
    with pytest.raises(InputError):
        AdaptConfig(target_N=3)
    with pytest.raises(InputError):
        AdaptConfig(backend="external")
    assert AdaptConfig("dmp", backend="affine").backend is Backend.AffineMapped


def test_identity_affine_fixed_point():
    prob = example2_problem(1)
    m0 = uniform_cube_mesh(4)
    p = Problem(prob.diffusion, 0.0, {t: 0.0 for t in range(1, 6)} | {6: 1.0}, set())
    res = adapt_loop(p, m0, AdaptConfig(MetricKind.Identity, 3, backend=Backend.AffineMapped))
    assert same_mesh(res.mesh, m0)
    assert len(res.history) == 4
    assert len({r.n_elements for r in res.history}) == 1


def test_dmp_affine_loop_never_violates():
    prob = example2_problem(2)
    m0 = cube_with_hole_mesh(5)
    res = adapt_loop(prob, m0, AdaptConfig(MetricKind.Dmp, 2, target_N=4000, backend=Backend.AffineMapped))
    for rec in res.history[1:]:
        assert not rec.mp_violated
        assert rec.quality.mp_condition_ok.all()
    # the starting Kuhn mesh is misaligned with D
    assert res.history[0].quality.q_ali_linf > mp_bound(3)


def test_loop_falls_back_for_varying_metric():
    m0 = uniform_cube_mesh(4)
    with pytest.warns(RuntimeWarning, match="falling back"):
        res = adapt_loop(example1_problem(), m0, AdaptConfig("adap", 1, target_N=800, backend="affine"))
    assert res.history[1].backend == "bisect"


def test_loop_deterministic_and_partial_history():
    cfg = AdaptConfig("adap", 2, target_N=1500)
    a = adapt_loop(example1_problem(), uniform_cube_mesh(4), cfg)
    b = adapt_loop(example1_problem(), uniform_cube_mesh(4), cfg)
    assert [r.summary() for r in a.history] == [r.summary() for r in b.history]
    seen = []

    def boom(rec, mesh, metric):
        seen.append(rec)
        if rec.iteration == 1:
            raise RuntimeError("stop")

    with pytest.raises(RuntimeError):
        adapt_loop(example1_problem(), uniform_cube_mesh(4), cfg, callback=boom)
    assert [r.iteration for r in seen] == [0, 1]
