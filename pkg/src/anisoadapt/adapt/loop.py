"""Solve, recover, build the metric, regenerate the mesh; repeat."""
import enum
import warnings
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional


from .. import quality
from ..errors import InputError, UnsupportedGeometry
from ..femsolve import FemSolution, assemble, l2_error, mp_report, solve
from ..metric import MetricKind, build_metric
from ..recovery import element_hessians, recover_hessian
from .affine import generate_affine_mapped
from .bisect import generate_bisection
from .external import external_mesher_roundtrip


class Backend(enum.Enum):
    AffineMapped = "affine"
    Bisection = "bisect"
    ExternalMesher = "external"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for b in cls:
            if value in (b.value, b.name, b.name.lower()):
                return b
        raise ValueError(f"unknown backend {value!r}; choose from {[b.value for b in cls]}")


@dataclass
class AdaptConfig:
    metric_kind: MetricKind = MetricKind.Adap
    iterations: int = 5
    target_N: Optional[int] = None
    backend: Backend = Backend.Bisection
    mesher_command: Optional[str] = None

    def __post_init__(self):
        self.metric_kind = MetricKind.parse(self.metric_kind)
        self.backend = Backend.parse(self.backend)
        if self.iterations < 1:
            raise InputError("iterations must be at least 1")
        if self.target_N is not None and self.target_N < 6:
            raise InputError("target_N must be at least 6")
        if self.backend is Backend.ExternalMesher and not self.mesher_command:
            raise InputError("the external backend needs a mesher command template")


@dataclass
class IterationRecord:
    """Diagnostics of one mesh: its solution and its quality in the metric computed from it."""

    iteration: int
    n_elements: int
    u_min: float
    u_max: float
    mp_violated: bool
    overshoot: bool
    l2_error: Optional[float]
    quality: quality.QualityReport
    backend: str = ""
    notes: list = field(default_factory=list)

    def summary(self):
        out = {"iteration": self.iteration, "N": self.n_elements, "u_min": self.u_min, "u_max": self.u_max,
               "mp_violated": self.mp_violated, "overshoot": self.overshoot}
        if self.l2_error is not None:
            out["l2_error"] = self.l2_error
        q = self.quality.summary()
        for key in ("q_eq_l2", "q_eq_linf", "q_ali_l2", "q_ali_linf", "mp_pass"):
            out[key] = q[key]
        return out


class AdaptResult(NamedTuple):
    mesh: object
    solution: FemSolution
    history: List[IterationRecord]
    metrics: list


def compute_metric(kind, mesh, solution, problem):
    kind = MetricKind.parse(kind)
    D = problem.element_diffusion(mesh)
    H = None
    if kind in (MetricKind.Adap, MetricKind.DmpAdap):
        H = element_hessians(mesh, recover_hessian(mesh, solution.u))
    return build_metric(kind, mesh, D, H)


def _record(it, mesh, solution, problem, metric, backend=""):
    rep = mp_report(solution, problem)
    err = l2_error(mesh, solution.u, problem.exact_solution) if problem.exact_solution else None
    D = problem.element_diffusion(mesh)
    q = quality.report(mesh, metric, D)
    return IterationRecord(it, mesh.n_elements, solution.u_min, solution.u_max, rep.violated, rep.overshoot,
                           err, q, backend)


def regenerate(config, initial_mesh, mesh, metric, target_N):
    """New mesh from ``metric`` (an element field on ``mesh``) with the configured backend."""
    backend = config.backend
    if backend is Backend.AffineMapped:
        box = initial_mesh.meta.get("box")
        if box is None:
            raise UnsupportedGeometry("the affine backend needs a mesh made by a box generator")
        try:
            return generate_affine_mapped(metric, target_N, box, initial_mesh.meta.get("hole")), backend
        except UnsupportedGeometry as exc:
            warnings.warn(f"{exc}; falling back to bisection", RuntimeWarning, stacklevel=3)
            backend = Backend.Bisection
    if backend is Backend.Bisection:
        return generate_bisection(initial_mesh, metric, target_N, source_mesh=mesh), backend
    return external_mesher_roundtrip(mesh, metric, config.mesher_command), backend


def adapt_loop(problem, initial_mesh, config, callback=None):
    """Run ``config.iterations`` adaptation steps and a final solve.

    Every new mesh is generated from ``initial_mesh`` (bisection restarts
    from it, so the element count tracks ``target_N`` instead of growing).
    ``history[k]`` describes the k-th mesh; the last entry is the final mesh.
    Errors propagate; ``callback(record, mesh, metric)`` sees each record as
    soon as it exists, so partial histories survive a failure.
    """
    target = config.target_N or initial_mesh.n_elements
    mesh = problem.prepare(initial_mesh)
    history, metrics = [], []
    used = ""
    for it in range(config.iterations + 1):
        solution = solve(assemble(mesh, problem))
        metric = compute_metric(config.metric_kind, mesh, solution, problem)
        rec = _record(it, mesh, solution, problem, metric, used)
        if metric.fallback:
            rec.notes.append("metric normalization unattainable; identity metric used")
        history.append(rec)
        metrics.append(metric)
        if callback is not None:
            callback(rec, mesh, metric)
        if it == config.iterations:
            break
        new_mesh, backend = regenerate(config, initial_mesh, mesh, metric, target)
        used = backend.value
        mesh = problem.prepare(new_mesh)
    return AdaptResult(mesh, solution, history, metrics)
