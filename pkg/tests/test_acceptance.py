"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line (printed in the pytest terminal
summary by ``conftest.py``) before asserting, so a failing criterion still
reports what was measured.
"""
import time

import numpy as np

import oracles
from conftest import random_spd
from frozen_values import (EX1_L2, EX1_UMIN, EX2_PUBLISHED_QALI, EX2_QALI, KUHN_MAX_QALI, MP_BOUND_3,
                           P_RESERVOIR, P_WELL)
from anisoadapt.adapt import AdaptConfig, adapt_loop, external_mesher_roundtrip, generate_affine_mapped
from anisoadapt.femsolve import l2_error, mp_report, solve_problem
from anisoadapt.geometry import REFERENCE, element_maps, maps_from_points
from anisoadapt.metric import metric_adap
from anisoadapt.problems import (HOLE, RING_RADIUS, desk_scale_spec, example1_mesh, example1_problem,
                                 example2_mesh, example2_problem, reservoir_aligned_mesh, reservoir_kuhn_mesh,
                                 reservoir_problem)
from anisoadapt.quality import check_cond4, check_cond5, check_nonobtuse, mp_bound, q_ali, q_ali_trace, q_eq, report
from anisoadapt.recovery import recover_gradient, recover_hessian
from anisoadapt.tetmesh import (ElementField, cube_with_hole_mesh, read_medit, read_sol, uniform_cube_mesh,
                                write_medit, write_sol, write_vtk)

RESULTS = {}


class Criterion:
    """Collect named checks; record one summary line, then fail if any check failed."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []
        self.start = time.perf_counter()

    def check(self, label, ok, detail=""):
        self.checks.append((label, bool(ok), detail))
        return ok

    def finish(self):
        failed = [c for c in self.checks if not c[1]]
        took = time.perf_counter() - self.start
        parts = "; ".join(f"{label} {detail}".strip() + ("" if ok else " [FAIL]") for label, ok, detail in self.checks)
        status = "FAIL" if failed else "PASS"
        RESULTS[self.number] = f"criterion {self.number} {status}: {self.title} ({took:.1f} s): {parts}"
        assert not failed, RESULTS[self.number]

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self.checks.append(("error", False, f"{exc_type.__name__}: {exc}"))
        self.finish()
        return False


def test_criterion_1_bounds():
    with Criterion(1, "MP eigenvalue-ratio bounds") as c:
        c.check("d=2", mp_bound(2) == 1.5, f"{mp_bound(2)!r}")
        c.check("d=3", abs(mp_bound(3) - 1.224744871) <= 1e-9, f"{mp_bound(3):.12f}")
        c.check("d=3 oracle", abs(mp_bound(3) - MP_BOUND_3) <= 1e-15)


def test_criterion_2_implications():
    with Criterion(2, "cond5 => cond4 => nonobtuse") as c:
        rng = np.random.default_rng(2)
        n = 10_000
        D = random_spd(rng, 1e3, size=n)
        J = rng.normal(size=(n, 3, 3))
        # half the maps are perturbations of D^(1/2) so cond5 is exercised
        near = np.arange(n) < n // 2
        lam, Q = np.linalg.eigh(D[near])
        J[near] = ((Q * np.sqrt(lam)[:, None, :]) @ np.swapaxes(Q, 1, 2)) @ \
            (np.eye(3) + rng.uniform(0, 0.4, (near.sum(), 1, 1)) * rng.normal(size=(near.sum(), 3, 3)))
        J[np.linalg.det(J) < 0] = J[np.linalg.det(J) < 0][:, :, [1, 0, 2]]
        maps = maps_from_points(np.einsum("nab,kb->nka", J, REFERENCE.vertices))
        c5, c4 = check_cond5(maps, D), check_cond4(maps, D)
        _, ok = check_nonobtuse(maps, D)
        c.check("samples", c5.sum() > 0, f"n={n} cond5_true={int(c5.sum())} cond4_true={int(c4.sum())}")
        c.check("cond5=>cond4", not np.any(c5 & ~c4), f"counterexamples={int(np.sum(c5 & ~c4))}")
        c.check("cond4=>nonobtuse", not np.any(c4 & ~ok), f"counterexamples={int(np.sum(c4 & ~ok))}")
        kuhn = maps_from_points(np.array(oracles.kuhn_cube_tets()))
        I6 = np.broadcast_to(np.eye(3), (6, 3, 3))
        q = q_ali(kuhn, I6).max()
        c.check("kuhn nonobtuse", check_nonobtuse(kuhn, I6)[1].all())
        c.check("kuhn cond5 false", not check_cond5(kuhn, I6).any())
        c.check("kuhn q_ali", abs(q - 2.151) <= 0.01 and abs(q - KUHN_MAX_QALI) <= 1e-10, f"{q:.6f}")


def test_criterion_3_example1_convergence():
    with Criterion(3, "Example 1 uniform convergence") as c:
        prob = example1_problem()
        hs, errs = [], []
        for i, n in enumerate((4, 8, 16)):
            mesh = example1_mesh(n)
            sol = solve_problem(mesh, prob)
            err = l2_error(mesh, sol.u, prob.exact_solution)
            hs.append(1.0 / n)
            errs.append(err)
            c.check(f"N{n}", mesh.n_elements == 6 * n ** 3, str(mesh.n_elements))
            c.check(f"L2[{n}]", abs(err / EX1_L2[i] - 1) <= 0.5, f"{err:.4g} vs {EX1_L2[i]:.3g}")
            ratio = sol.u_min / EX1_UMIN[i]
            c.check(f"u_min[{n}]", sol.u_min < 0 and 0.1 <= ratio <= 10, f"{sol.u_min:.3g} vs {EX1_UMIN[i]:.3g}")
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        c.check("slope", abs(slope - 2.0) <= 0.3, f"{slope:.3f} (target 2.0+-0.3)")


def test_criterion_4_mp_end_to_end():
    with Criterion(4, "DMP on the affine-mapped metric mesh") as c:
        prob = example2_problem(2)
        D = np.asarray(prob.diffusion)
        mesh = generate_affine_mapped(np.linalg.inv(D), 12_000, ((0, 0, 0), (1, 1, 1)), HOLE)
        _, ok = check_nonobtuse(element_maps(mesh), D)
        sol = solve_problem(mesh, prob)
        rep = mp_report(sol, prob)
        c.check("nonobtuse", ok.all(), f"{ok.mean() * 100:.1f}% of N={mesh.n_elements}")
        c.check("mp", not rep.violated and not rep.overshoot, f"u in [{sol.u_min:.3g}, {sol.u_max:.3g}]")
        uni = example2_mesh(10)
        M = np.broadcast_to(np.linalg.inv(D), (uni.n_elements, 3, 3))
        qr = report(uni, M, D)
        c.check("uniform q_ali_linf", qr.q_ali_linf > mp_bound(3), f"{qr.q_ali_linf:.4f} > {mp_bound(3):.4f}")
        c.check("uniform q_ali oracle", abs(qr.q_ali_l2 - EX2_QALI[2][0]) <= 1e-8 * EX2_QALI[2][0]
                and abs(qr.q_ali_linf - EX2_QALI[2][1]) <= 1e-8 * EX2_QALI[2][1],
                f"({qr.q_ali_l2:.4f}, {qr.q_ali_linf:.4f}) published {EX2_PUBLISHED_QALI[2]}")
        usol = solve_problem(uni, prob)
        c.check("uniform undershoot", mp_report(usol, prob).violated, f"u_min={usol.u_min:.3g}")


def test_criterion_5_quality_identities():
    with Criterion(5, "quality-measure identities") as c:
        rng = np.random.default_rng(5)
        worst_sum, worst_lo, worst_hi = 0.0, 0.0, 0.0
        for mesh in (uniform_cube_mesh(4), cube_with_hole_mesh(5), example2_mesh(10)):
            M = random_spd(rng, 1e3, size=mesh.n_elements)
            qe, _ = q_eq(mesh, M)
            worst_sum = max(worst_sum, abs(qe.sum() / mesh.n_elements - 1))
            maps = element_maps(mesh)
            qa, qt = q_ali(maps, M), q_ali_trace(maps, M)
            worst_lo = max(worst_lo, np.max(qt / qa - 1))
            worst_hi = max(worst_hi, np.max(qa / (3 * qt) - 1))
        c.check("sum q_eq = N", worst_sum <= 1e-8, f"rel {worst_sum:.1e}")
        c.check("trace <= q_ali", worst_lo <= 1e-12, f"max excess {worst_lo:.1e}")
        c.check("q_ali <= 3 trace", worst_hi <= 1e-12, f"max excess {worst_hi:.1e}")
        rep = report(uniform_cube_mesh(8), np.eye(3), np.eye(3))
        c.check("uniform Q_eq", abs(rep.q_eq_l2 - 1) <= 1e-8 and abs(rep.q_eq.max() - 1) <= 1e-8,
                f"L2 {rep.q_eq_l2:.10f}")


def test_criterion_6_recovery():
    with Criterion(6, "recovery exactness and alpha_h") as c:
        mesh = uniform_cube_mesh(4)
        X = mesh.vertices
        rng = np.random.default_rng(6)
        b = rng.normal(size=3)
        u = 0.7 + X @ b
        g = recover_gradient(mesh, u)
        H = recover_hessian(mesh, u)
        c.check("affine gradient", np.abs(g - b).max() <= 1e-10, f"{np.abs(g - b).max():.1e}")
        c.check("affine Hessian", np.abs(H).max() <= 1e-10, f"{np.abs(H).max():.1e}")
        Q = random_spd(rng, 10) - 3 * np.eye(3)
        uq = 0.5 * np.einsum("na,ab,nb->n", X, Q, X) + X @ b
        err = np.abs(recover_hessian(mesh, uq) - Q).max(axis=(1, 2))[~mesh.boundary_vertices].max()
        c.check("quadratic Hessian", err <= 1e-8, f"{err:.1e}")
        Hr = random_spd(rng, 1e3, size=mesh.n_elements) - random_spd(rng, 10, size=mesh.n_elements)
        f = metric_adap(mesh, Hr)
        total = np.sum(mesh.volumes * f.sqrt_det())
        rel = abs(total - 2 * mesh.volume) / (2 * mesh.volume)
        c.check("alpha_h equation", not f.fallback and rel <= 1e-8, f"rel {rel:.1e}")
        h = 3.0
        fi = metric_adap(mesh, np.broadcast_to(h * np.eye(3), (mesh.n_elements, 3, 3)))
        rel_a = abs(fi.alpha_h / oracles.isotropic_alpha(h) - 1)
        c.check("isotropic closed form", rel_a <= 1e-8, f"rel {rel_a:.1e}")


def test_criterion_7_adaptation():
    with Criterion(7, "adaptive Example 1 with bisection") as c:
        prob = example1_problem()
        uniform = example1_mesh(16)
        usol = solve_problem(uniform, prob)
        uerr = l2_error(uniform, usol.u, prob.exact_solution)
        res = adapt_loop(prob, example1_mesh(8), AdaptConfig("adap", 5, target_N=17_000, backend="bisect"))
        last = res.history[-1]
        ratio = last.l2_error / uerr
        c.check("N", abs(last.n_elements / 17_000 - 1) <= 0.15, str(last.n_elements))
        c.check("error ratio", ratio < 0.6, f"{last.l2_error:.3g} / {uerr:.3g} = {ratio:.2f}")
        b = res.mesh.barycenters
        r = np.hypot(b[:, 0] - 0.5, b[:, 1] - 0.5)
        frac = np.mean(np.abs(r - RING_RADIUS) <= 0.1)
        c.check("ring concentration", frac >= 0.4, f"{frac * 100:.1f}%")


def test_criterion_8_reservoir():
    with Criterion(8, "desk-scale reservoir") as c:
        spec = desk_scale_spec()
        prob = reservoir_problem(spec)
        aligned = prob.prepare(reservoir_aligned_mesh(spec, 10.0, 3))
        sol = solve_problem(aligned, prob)
        tol = 1e-9 * P_RESERVOIR
        D = prob.element_diffusion(aligned)
        _, ok = check_nonobtuse(element_maps(aligned), D)
        c.check("aligned nonobtuse", ok.all(), f"{ok.mean() * 100:.1f}% of N={aligned.n_elements}")
        c.check("aligned range", P_WELL - tol <= sol.u_min and sol.u_max <= P_RESERVOIR + tol,
                f"P in [{sol.u_min:.2f}, {sol.u_max:.6f}]")
        coarse = reservoir_kuhn_mesh(spec, (30, 10, 3))
        csol = solve_problem(coarse, prob)
        c.check("misaligned overshoot", csol.u_max > P_RESERVOIR + tol, f"P_max={csol.u_max:.2f}")


def test_criterion_9_formats(tmp_path):
    with Criterion(9, "file formats and external harness") as c:
        mesh = cube_with_hole_mesh(5)
        a, b = tmp_path / "a.mesh", tmp_path / "b.mesh"
        write_medit(mesh, a)
        back = read_medit(a)
        write_medit(back, b)
        c.check("mesh bytes", a.read_bytes() == b.read_bytes(), f"{len(a.read_bytes())} bytes")
        c.check("mesh data", np.array_equal(back.tets, mesh.tets) and np.array_equal(back.facet_tags, mesh.facet_tags)
                and np.allclose(back.vertices, mesh.vertices, rtol=1e-11, atol=0))
        rng = np.random.default_rng(9)
        T = random_spd(rng, 1e3, size=mesh.n_elements)
        s1, s2 = tmp_path / "a.sol", tmp_path / "b.sol"
        write_sol(ElementField(T), s1)
        write_sol(read_sol(s1, mesh), s2)
        c.check("sol bytes", s1.read_bytes() == s2.read_bytes())
        c.check("sol values", np.allclose(read_sol(s1, mesh).values, T, rtol=1e-11, atol=0))
        v = tmp_path / "u.vtk"
        write_vtk(mesh, {"u": mesh.vertices[:, 0]}, v)
        lines = v.read_text().splitlines()
        c.check("vtk structure", f"POINTS {mesh.n_vertices} double" in lines
                and f"CELLS {mesh.n_elements} {5 * mesh.n_elements}" in lines
                and f"POINT_DATA {mesh.n_vertices}" in lines
                and lines.count("10") >= mesh.n_elements)
        out = external_mesher_roundtrip(mesh, np.eye(3), "cp {in_mesh} {out_mesh}")
        c.check("identity stub", np.array_equal(out.tets, mesh.tets) and np.array_equal(out.facets, mesh.facets)
                and np.allclose(out.vertices, mesh.vertices, rtol=1e-11, atol=0))
