"""P1 finite elements for ``-div(D grad u) = f`` with Dirichlet and zero-flux boundaries.

Coefficient callables take an (n, 3) array of points and return values for
all of them; constants are accepted wherever a callable is.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from . import _kernels
from .errors import EmptyDirichlet, InputError, NoConvergence
from .geometry import check_spd

CG_RTOL = 1e-15


def _evaluate(fn, points, shape):
    if callable(fn):
        out = np.asarray(fn(points), dtype=float)
    else:
        out = np.asarray(fn, dtype=float)
    return np.broadcast_to(out, (len(points),) + shape).copy()


@dataclass
class Problem:
    """Boundary value problem definition.

    ``dirichlet`` maps a facet tag to its boundary value (callable or
    constant).  ``neumann_zero_tags=None`` makes every other tag zero-flux.
    ``facet_tagger`` (mesh -> mesh) lets a problem add its own facet tags to
    meshes produced by generic generators; it must be idempotent.
    """

    diffusion: object
    source: object = 0.0
    dirichlet: dict = field(default_factory=dict)
    neumann_zero_tags: Optional[set] = None
    exact_solution: Optional[Callable] = None
    facet_tagger: Optional[Callable] = None
    name: str = "problem"
    info: dict = field(default_factory=dict)

    def prepare(self, mesh):
        return self.facet_tagger(mesh) if self.facet_tagger is not None else mesh

    def element_diffusion(self, mesh):
        """``D_K`` sampled at element barycenters, shape (N, 3, 3)."""
        D = _evaluate(self.diffusion, mesh.barycenters, (3, 3))
        return check_spd(D, "diffusion tensor")

    def check_tags(self, mesh):
        tags = set(np.unique(mesh.facet_tags).tolist())
        dtags = set(self.dirichlet)
        if self.neumann_zero_tags is not None:
            ntags = set(self.neumann_zero_tags)
            both = dtags & ntags
            if both:
                raise InputError(f"tags {sorted(both)} have both Dirichlet and zero-flux conditions")
            loose = tags - dtags - ntags
            if loose:
                raise InputError(f"boundary tags {sorted(loose)} have no boundary condition")
        if not (dtags & tags):
            raise EmptyDirichlet(f"no facet carries a Dirichlet tag (mesh tags {sorted(tags)}, "
                                 f"Dirichlet tags {sorted(dtags)})")


@dataclass
class System:
    """Reduced SPD system on the free nodes plus what is needed to expand it."""

    mesh: object
    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray
    full_matrix: sp.csr_matrix
    full_load: np.ndarray

    @property
    def n_unknowns(self):
        return len(self.free)

    def expand(self, x):
        u = np.empty(self.mesh.n_vertices)
        u[self.free] = x
        u[self.dirichlet_nodes] = self.dirichlet_values
        return u


@dataclass
class FemSolution:
    u: np.ndarray
    u_min: float
    u_max: float
    iterations: int
    residual: float
    system: System = None

    @property
    def mesh(self):
        return self.system.mesh if self.system is not None else None


def element_stiffness(mesh, D_K):
    vol, grads = mesh.geometry
    return _kernels.local_stiffness(grads, vol, np.ascontiguousarray(D_K, dtype=float))


def stiffness_matrix(mesh, D_K):
    """Global stiffness matrix before boundary conditions."""
    Ke = element_stiffness(mesh, D_K)
    rows = np.repeat(mesh.tets, 4, axis=1).ravel()
    cols = np.tile(mesh.tets, (1, 4)).ravel()
    n = mesh.n_vertices
    # coo -> csr sums duplicates in a fixed order
    A = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def load_vector(mesh, source, rule=None):
    """``int f phi_i`` by element quadrature; ``rule="barycenter"`` gives ``f(x_K)|K|/4``."""
    lam, w = QUADRATURE[rule or LOAD_RULE]
    vol = np.abs(mesh.volumes)
    if not callable(source):
        contrib = np.broadcast_to(float(source) * vol[:, None] / 4.0, (mesh.n_elements, 4))
    else:
        pts = np.einsum("qi,nia->nqa", lam, mesh.vertices[mesh.tets]).reshape(-1, 3)
        f = _evaluate(source, pts, ()).reshape(mesh.n_elements, -1)
        contrib = vol[:, None] * ((f * w) @ lam)
    b = np.zeros(mesh.n_vertices)
    for k in range(4):
        np.add.at(b, mesh.tets[:, k], contrib[:, k])
    return b


def dirichlet_data(mesh, problem):
    """Dirichlet nodes and values; a node on several Dirichlet tags takes the smallest tag."""
    node_tag = np.full(mesh.n_vertices, np.iinfo(np.int64).max)
    for tag in sorted(problem.dirichlet):
        sel = mesh.facets[mesh.facet_tags == tag].ravel()
        node_tag[sel] = np.minimum(node_tag[sel], tag)
    nodes = np.flatnonzero(node_tag != np.iinfo(np.int64).max)
    values = np.empty(len(nodes))
    for tag in sorted(problem.dirichlet):
        sel = node_tag[nodes] == tag
        values[sel] = _evaluate(problem.dirichlet[tag], mesh.vertices[nodes[sel]], ())
    return nodes, values


def assemble(mesh, problem, load_rule=None):
    """Stiffness system with Dirichlet nodes eliminated symmetrically."""
    mesh = problem.prepare(mesh)
    problem.check_tags(mesh)
    D_K = problem.element_diffusion(mesh)
    A = stiffness_matrix(mesh, D_K)
    b = load_vector(mesh, problem.source, load_rule)
    nodes, values = dirichlet_data(mesh, problem)
    if len(nodes) == 0:
        raise EmptyDirichlet("Dirichlet facets carry no vertices")
    mask = np.ones(mesh.n_vertices, dtype=bool)
    mask[nodes] = False
    free = np.flatnonzero(mask)
    A_ff = A[free][:, free].tocsr()
    A_fd = A[free][:, nodes]
    rhs = b[free] - A_fd @ values
    return System(mesh, A_ff, rhs, free, nodes, values, A, b)


def _dot(a, b):
    # numpy's pairwise summation does not depend on the BLAS thread count
    return float(np.sum(a * b))


def conjugate_gradient(A, b, rtol=CG_RTOL, max_iter=None, x0=None, window=50):
    """Jacobi-preconditioned CG.

    Stops at relative residual ``rtol`` or when the residual has not improved
    for ``window`` iterations after dropping below ``1e-10``.  Returns
    ``(x, iterations, relative residual)``.
    """
    n = len(b)
    if max_iter is None:
        max_iter = 20 * max(n, 1)
    bnorm = np.sqrt(_dot(b, b))
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    dinv = 1.0 / A.diagonal()
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = _dot(r, z)
    best, best_it, best_x = np.inf, 0, x.copy()
    rel = np.sqrt(_dot(r, r)) / bnorm
    it = 0
    while it < max_iter:
        if rel <= rtol:
            return x, it, rel
        Ap = A @ p
        pAp = _dot(p, Ap)
        if pAp <= 0.0:
            break
        a = rz / pAp
        x += a * p
        r -= a * Ap
        it += 1
        rel = np.sqrt(_dot(r, r)) / bnorm
        if rel < best:
            best, best_it = rel, it
            best_x[:] = x
        elif best < 1e-10 and it - best_it >= window:
            true = np.sqrt(_dot(b - A @ best_x, b - A @ best_x)) / bnorm
            return best_x, it, true
        z = dinv * r
        rz_new = _dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if rel <= rtol:
        return x, it, rel
    true = np.sqrt(_dot(b - A @ best_x, b - A @ best_x)) / bnorm
    if true < 1e-10 and pAp <= 0.0:
        return best_x, it, true
    raise NoConvergence(f"CG stopped after {it} iterations at relative residual {true:.3e}", true, it)


def solve(system, rtol=CG_RTOL):
    if system.n_unknowns:
        x, it, res = conjugate_gradient(system.matrix, system.rhs, rtol=rtol)
    else:
        x, it, res = np.zeros(0), 0, 0.0
    u = system.expand(x)
    return FemSolution(u, float(u.min()), float(u.max()), it, res, system)


def solve_problem(mesh, problem, rtol=CG_RTOL, load_rule=None):
    return solve(assemble(mesh, problem, load_rule), rtol=rtol)


def conical_rule(k):
    """Collapsed Gauss-Jacobi product rule with ``k**3`` points, exact to degree ``2k - 1``."""
    nodes = []
    for alpha in (2, 1, 0):
        x, w = roots_jacobi(k, alpha, 0)
        nodes.append(((x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)))
    (x0, w0), (x1, w1), (x2, w2) = nodes
    a = np.repeat(x0, k * k)
    b = np.tile(np.repeat(x1, k), k) * (1.0 - a)
    c = np.tile(x2, k * k) * (1.0 - a - b)
    w = np.repeat(w0, k * k) * np.tile(np.repeat(w1, k), k) * np.tile(w2, k * k)
    lam = np.column_stack([1.0 - a - b - c, a, b, c])
    return lam, w / w.sum()


# barycentric quadrature rules on the tetrahedron (weights sum to 1)
_A, _B = 0.5854101966249685, 0.1381966011250105
QUADRATURE = {
    "barycenter": (np.full((1, 4), 0.25), np.ones(1)),
    "vertex": (np.eye(4), np.full(4, 0.25)),
    "gauss4": (np.array([[_A, _B, _B, _B], [_B, _A, _B, _B], [_B, _B, _A, _B], [_B, _B, _B, _A]]),
               np.full(4, 0.25)),
    "gauss5": (np.array([[0.25] * 4, [0.5, 1 / 6, 1 / 6, 1 / 6], [1 / 6, 0.5, 1 / 6, 1 / 6],
                         [1 / 6, 1 / 6, 0.5, 1 / 6], [1 / 6, 1 / 6, 1 / 6, 0.5]]),
               np.array([-0.8, 0.45, 0.45, 0.45, 0.45])),
    "conical3": conical_rule(3),
}
LOAD_RULE = "conical3"
ERROR_RULE = "gauss5"


def l2_error(mesh, u_h, exact, rule=None):
    """``||u_h - u||_{L2}`` by element quadrature.

    The default 5-point rule is exact for cubics; any key of ``QUADRATURE``
    may be passed.
    """
    lam, w = QUADRATURE[rule or ERROR_RULE]
    u_h = np.asarray(u_h, dtype=float)
    P = mesh.vertices[mesh.tets]  # (N, 4, 3)
    pts = np.einsum("qi,nia->nqa", lam, P).reshape(-1, 3)
    uh_q = (u_h[mesh.tets] @ lam.T).reshape(-1)
    ue = _evaluate(exact, pts, ())
    e2 = ((uh_q - ue) ** 2).reshape(mesh.n_elements, -1) @ w
    return float(np.sqrt(np.sum(np.abs(mesh.volumes) * e2)))


@dataclass
class MpReport:
    violated: bool
    u_min: float
    u_max: float
    boundary_min: float
    boundary_max: float
    overshoot: bool

    def as_dict(self):
        return {"violated": self.violated, "u_min": self.u_min, "boundary_min": self.boundary_min,
                "u_max": self.u_max, "boundary_max": self.boundary_max, "overshoot": self.overshoot}

    def __getitem__(self, key):
        return self.as_dict()[key]


def mp_report(solution, problem=None):
    """Compare the solution range with its Dirichlet data.

    ``violated`` flags an undershoot below the smallest Dirichlet value,
    ``overshoot`` an excess above the largest one; both with tolerance
    ``1e-12 (u_max - u_min)``.
    """
    s = solution.system
    u = solution.u
    bvals = u[s.dirichlet_nodes]
    bmin, bmax = float(bvals.min()), float(bvals.max())
    tol = 1e-12 * (solution.u_max - solution.u_min)
    return MpReport(
        violated=bool(solution.u_min < bmin - tol), u_min=solution.u_min, u_max=solution.u_max,
        boundary_min=bmin, boundary_max=bmax, overshoot=bool(solution.u_max > bmax + tol),
    )
