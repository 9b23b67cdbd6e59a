"""Benchmark problems: a smooth anisotropic test with known solution, a cube
with a hole, and a fractured-reservoir pressure model.
"""
import ast
import configparser
import math
import operator
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .femsolve import Problem
from .geometry import check_spd
from .tetmesh import HOLE_TAG, cube_with_hole_mesh, diagonal_orthoscheme_mesh, read_medit, uniform_cube_mesh

OUTER_TAGS = (1, 2, 3, 4, 5, 6)


@dataclass(frozen=True)
class AngleDiffusionSpec:
    """Diffusion tensor with dominant direction (sin phi cos theta, sin phi sin theta, cos phi)."""

    phi: float
    theta: float
    k1: float
    k2: float
    k3: float

    def __post_init__(self):
        if min(self.k1, self.k2, self.k3) <= 0:
            raise ValueError("eigenvalues k1, k2, k3 must be positive")


def rotation_from_angles(phi, theta):
    sp_, cp = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    return np.array([
        [sp_ * ct, -st, cp * ct],
        [sp_ * st, ct, cp * st],
        [cp, 0.0, -sp_],
    ])


def diffusion_from_angles(spec):
    R = rotation_from_angles(spec.phi, spec.theta)
    D = (R * np.array([spec.k1, spec.k2, spec.k3])) @ R.T
    return 0.5 * (D + D.T)


# --- smooth problem with a Gaussian ring --------------------------------------------------

EXAMPLE1_SPEC = AngleDiffusionSpec(-math.pi / 4, 5 * math.pi / 6, 100.0, 10.0, 1.0)
RING_RADIUS = 0.1


def example1_exact(p):
    p = np.atleast_2d(p)
    x, y, z = p[:, 0] - 0.5, p[:, 1] - 0.5, p[:, 2]
    return np.exp(-100.0 * (x * x + y * y - RING_RADIUS ** 2)) + z * z


def example1_hessian(p):
    p = np.atleast_2d(p)
    x, y = p[:, 0] - 0.5, p[:, 1] - 0.5
    G = np.exp(-100.0 * (x * x + y * y - RING_RADIUS ** 2))
    H = np.zeros((len(p), 3, 3))
    H[:, 0, 0] = (-200.0 + 40000.0 * x * x) * G
    H[:, 1, 1] = (-200.0 + 40000.0 * y * y) * G
    H[:, 0, 1] = H[:, 1, 0] = 40000.0 * x * y * G
    H[:, 2, 2] = 2.0
    return H


def example1_problem():
    D = diffusion_from_angles(EXAMPLE1_SPEC)

    def source(p):
        # constant D: -div(D grad u) = -tr(D Hess u)
        return -np.einsum("ab,nab->n", D, example1_hessian(p))

    return Problem(
        diffusion=D, source=source, dirichlet={t: example1_exact for t in OUTER_TAGS},
        neumann_zero_tags=set(), exact_solution=example1_exact, name="example1",
        info={"spec": EXAMPLE1_SPEC},
    )


def example1_mesh(n):
    return uniform_cube_mesh(n)


# --- cube with a hole -------------------------------------------------------------------

HOLE = ((0.4, 0.4, 0.4), (0.6, 0.6, 0.6))
EXAMPLE2_SPECS = {
    1: AngleDiffusionSpec(math.pi / 4, math.pi / 4, 100.0, 10.0, 10.0),
    2: AngleDiffusionSpec(math.pi / 4, 3 * math.pi / 4, 100.0, 10.0, 10.0),
    3: AngleDiffusionSpec(math.pi / 4, math.pi / 4, 1000.0, 1.0, 1.0),
}


def example2_problem(case):
    if case not in EXAMPLE2_SPECS:
        raise ValueError(f"case must be 1, 2 or 3, got {case!r}")
    spec = EXAMPLE2_SPECS[case]
    dirichlet = {t: 0.0 for t in OUTER_TAGS}
    dirichlet[HOLE_TAG] = 4.0
    return Problem(diffusion=diffusion_from_angles(spec), source=0.0, dirichlet=dirichlet,
                   neumann_zero_tags=set(), name=f"example2-case{case}", info={"spec": spec, "case": case})


def example2_mesh(n):
    """Cube-with-hole mesh; ``n`` must be a multiple of 5 for the hole to sit on grid planes."""
    return cube_with_hole_mesh(n, HOLE)


# --- fractured reservoir ----------------------------------------------------------------

K_FRACTURE = np.array([[7.5, 2.5, 0.0], [2.5, 7.5, 0.0], [0.0, 0.0, 0.1]])
K_MATRIX = np.array([[2.55, -2.45, 0.0], [-2.45, 2.55, 0.0], [0.0, 0.0, 0.1]])
WELL_TAG = 8


@dataclass(frozen=True)
class Fracture:
    center_x: float
    half_length: float
    width: float
    angle: float = math.pi / 4

    @property
    def tangent(self):
        return np.array([math.cos(self.angle), math.sin(self.angle), 0.0])

    @property
    def normal(self):
        return np.array([math.sin(self.angle), -math.cos(self.angle), 0.0])

    def contains(self, p, y0=0.0):
        """Slab predicate: mid-plane distance <= W_f/2 and tangential offset <= L_f."""
        d = np.atleast_2d(p)[:, :2] - np.array([self.center_x, y0])
        return (np.abs(d @ self.normal[:2]) <= 0.5 * self.width + 1e-12) & \
            (np.abs(d @ self.tangent[:2]) <= self.half_length + 1e-12)


@dataclass(frozen=True)
class ReservoirSpec:
    """Box (ft), fractures rooted on the y=0 wall, permeabilities (mD), pressures (psi).

    ``width_scale`` widens every fracture while dividing its permeability by
    the same factor, so ``K_pf * W_f`` stays fixed.
    """

    box: tuple = (3000.0, 500.0, 300.0)
    fractures: tuple = (Fracture(800.0, 400.0, 0.01), Fracture(1500.0, 400.0, 0.01), Fracture(2200.0, 400.0, 0.01))
    k_fracture: np.ndarray = field(default_factory=lambda: K_FRACTURE.copy())
    k_matrix: np.ndarray = field(default_factory=lambda: K_MATRIX.copy())
    conductivity: float = 100.0
    p_reservoir: float = 3800.0
    p_well: float = 1000.0
    width_scale: float = 1000.0

    def __post_init__(self):
        if not self.p_well < self.p_reservoir:
            raise ValueError("well pressure must be below reservoir pressure")

    def scaled_fractures(self):
        return tuple(replace(f, width=f.width * self.width_scale) for f in self.fractures)

    def fracture_permeability(self):
        """Fracture permeability after width scaling (conductivity preserved)."""
        return self.conductivity / (self.fractures[0].width * self.width_scale)

    def in_fracture(self, p):
        p = np.atleast_2d(p)
        mask = np.zeros(len(p), dtype=bool)
        for f in self.scaled_fractures():
            mask |= f.contains(p)
        return mask


def desk_scale_spec():
    """Small panel 300 x 100 x 30 ft with one fracture in the middle.

    Lengths are one tenth of the full half-panel; the scaled fracture width
    stays 10 ft so the slab is resolvable on coarse meshes.
    """
    return ReservoirSpec(box=(300.0, 100.0, 30.0), fractures=(Fracture(150.0, 40.0, 0.01),))


def reservoir_diffusion(spec):
    def diffusion(p):
        inside = spec.in_fracture(p)
        return np.where(inside[:, None, None], spec.k_fracture, spec.k_matrix)
    return diffusion


def well_tagger(spec):
    """Retag y=0 facets (tag 3) whose centroid lies inside a fracture slab as the well boundary."""

    def tag(mesh):
        c = mesh.vertices[mesh.facets].mean(axis=1)
        sel = (mesh.facet_tags == 3) & spec.in_fracture(c)
        if not np.any(sel):
            return mesh
        tags = mesh.facet_tags.copy()
        tags[sel] = WELL_TAG
        return mesh.with_facet_tags(tags)

    return tag


def reservoir_problem(spec=None, desk_scale=True):
    """Pressure problem: P_r on x-, x+, y+; P_w where a fracture meets y=0; zero flux elsewhere."""
    if spec is None:
        spec = desk_scale_spec() if desk_scale else ReservoirSpec()
    dirichlet = {1: spec.p_reservoir, 2: spec.p_reservoir, 4: spec.p_reservoir, WELL_TAG: spec.p_well}
    return Problem(diffusion=reservoir_diffusion(spec), source=0.0, dirichlet=dirichlet,
                   neumann_zero_tags={3, 5, 6}, facet_tagger=well_tagger(spec), name="reservoir",
                   info={"spec": spec})


def reservoir_box(spec):
    return ((0.0, 0.0, 0.0), tuple(float(v) for v in spec.box))


def reservoir_aligned_mesh(spec, h_xy, nz):
    """Orthoscheme mesh whose element frame matches both permeability tensors."""
    nx = int(round(spec.box[0] / h_xy))
    ny = int(round(spec.box[1] / h_xy))
    return diagonal_orthoscheme_mesh((nx, ny), nz, reservoir_box(spec))


def reservoir_kuhn_mesh(spec, n):
    return uniform_cube_mesh(n, reservoir_box(spec))


# --- configuration files ----------------------------------------------------------------

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
        ast.Pow: operator.pow, ast.USub: operator.neg, ast.UAdd: operator.pos}
_NAMES = {"pi": math.pi, "e": math.e}


def eval_number(text):
    """Evaluate a plain arithmetic expression such as ``-pi/4`` or ``5*pi/6``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"unsupported expression {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc


def _numbers(text, count=None, what="value"):
    vals = [eval_number(t) for t in text.replace(",", " ").split()]
    if count is not None and len(vals) != count:
        raise ConfigError(f"{what} needs {count} numbers, got {len(vals)}")
    return vals


@dataclass
class MeshSpec:
    generator: str = "cube"
    n: tuple = (8, 8, 8)
    box: tuple = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    hole: tuple = None
    h: float = None
    nz: int = None
    path: str = None

    def build(self, n=None):
        n = self.n if n is None else n
        if self.generator == "file":
            return read_medit(self.path)
        if self.generator == "cube":
            return uniform_cube_mesh(n, self.box)
        if self.generator == "hole":
            return cube_with_hole_mesh(n, self.hole or HOLE, self.box)
        if self.generator == "orthoscheme":
            lo, hi = (np.asarray(b) for b in self.box)
            nx, ny = (int(round(v)) for v in (hi[:2] - lo[:2]) / self.h)
            return diagonal_orthoscheme_mesh((nx, ny), self.nz, self.box)
        raise ConfigError(f"unknown mesh generator {self.generator!r}")


@dataclass
class RunConfig:
    problem: Problem
    mesh: MeshSpec
    path: str = None


def _linear_exact(coef):
    a, b, c, d = coef

    def u(p):
        p = np.atleast_2d(p)
        return a + b * p[:, 0] + c * p[:, 1] + d * p[:, 2]

    return u


def _diffusion_section(sec):
    if "matrix" in sec:
        D = np.array(_numbers(sec["matrix"], 9, "diffusion matrix")).reshape(3, 3)
        return check_spd(D, "diffusion matrix")
    try:
        phi, theta = eval_number(sec["phi"]), eval_number(sec["theta"])
    except KeyError as exc:
        raise ConfigError(f"[diffusion] needs 'matrix' or 'phi', 'theta' and 'k' (missing {exc})") from exc
    k = _numbers(sec.get("k", ""), 3, "k")
    try:
        return diffusion_from_angles(AngleDiffusionSpec(phi, theta, *k))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _dirichlet(text, exact):
    out = {}
    for item in text.replace(",", " ").split():
        if ":" not in item:
            raise ConfigError(f"Dirichlet entry {item!r} is not tag:value")
        tag, val = item.split(":", 1)
        if val == "exact":
            if exact is None:
                raise ConfigError("Dirichlet value 'exact' needs an [exact] section")
            out[int(tag)] = exact
        else:
            out[int(tag)] = eval_number(val)
    return out


def _mesh_section(sec, default):
    spec = default
    if sec is None:
        return spec
    gen = sec.get("generator", spec.generator)
    n = spec.n
    if "n" in sec:
        vals = [int(v) for v in _numbers(sec["n"])]
        if len(vals) == 1:
            vals *= 3
        if len(vals) != 3:
            raise ConfigError(f"[mesh] n needs one or three counts, got {len(vals)}")
        n = tuple(vals)
    box = spec.box
    if "box" in sec:
        b = _numbers(sec["box"], 6, "box")
        box = (tuple(b[:3]), tuple(b[3:]))
    hole = spec.hole
    if "hole" in sec:
        b = _numbers(sec["hole"], 6, "hole")
        hole = (tuple(b[:3]), tuple(b[3:]))
    h = eval_number(sec["h"]) if "h" in sec else spec.h
    nz = int(eval_number(sec["nz"])) if "nz" in sec else spec.nz
    return MeshSpec(gen, n, box, hole, h, nz, sec.get("path", spec.path))


def load_config(path):
    """Read an INI problem description; see the README for the schema."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not cp.has_section("problem"):
        raise ConfigError(f"{path}: missing [problem] section")
    name = cp["problem"].get("name", "custom").strip().lower()
    mesh_sec = cp["mesh"] if cp.has_section("mesh") else None
    if name == "example1":
        problem, mesh = example1_problem(), MeshSpec("cube", (8, 8, 8))
    elif name == "example2":
        case = int(eval_number(cp["problem"].get("case", "1")))
        problem, mesh = example2_problem(case), MeshSpec("hole", (10, 10, 10), hole=HOLE)
    elif name == "reservoir":
        desk = cp["problem"].getboolean("desk_scale", True)
        spec = desk_scale_spec() if desk else ReservoirSpec()
        problem = reservoir_problem(spec)
        mesh = MeshSpec("orthoscheme", box=reservoir_box(spec), h=spec.box[1] / 10.0, nz=3)
    elif name == "custom":
        if not cp.has_section("diffusion"):
            raise ConfigError(f"{path}: a custom problem needs a [diffusion] section")
        D = _diffusion_section(cp["diffusion"])
        exact = None
        if cp.has_section("exact") and "linear" in cp["exact"]:
            exact = _linear_exact(_numbers(cp["exact"]["linear"], 4, "linear exact solution"))
        source = eval_number(cp["source"].get("value", "0")) if cp.has_section("source") else 0.0
        bsec = cp["boundary"] if cp.has_section("boundary") else {}
        dirichlet = _dirichlet(bsec.get("dirichlet", ""), exact)
        if not dirichlet:
            raise ConfigError(f"{path}: [boundary] dirichlet must name at least one tag")
        neumann = {int(t) for t in bsec.get("neumann", "").replace(",", " ").split()} if "neumann" in bsec else None
        problem = Problem(diffusion=D, source=source, dirichlet=dirichlet, neumann_zero_tags=neumann,
                          exact_solution=exact, name=cp["problem"].get("label", "custom"))
        mesh = MeshSpec()
    else:
        raise ConfigError(f"{path}: unknown problem {name!r}")
    return RunConfig(problem, _mesh_section(mesh_sec, mesh), str(path))
