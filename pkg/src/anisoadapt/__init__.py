"""Anisotropic mesh adaptation for 3D anisotropic diffusion with P1 finite elements."""
from . import adapt, femsolve, geometry, metric, problems, quality, recovery, tetmesh
from ._kernels import BACKEND
from .errors import AnisoError
from .femsolve import Problem, assemble, l2_error, mp_report, solve, solve_problem
from .metric import MetricField, MetricKind, build_metric
from .tetmesh import TetMesh

__version__ = "0.1.0"

__all__ = [
    "adapt", "femsolve", "geometry", "metric", "problems", "quality", "recovery", "tetmesh",
    "BACKEND", "AnisoError", "Problem", "assemble", "solve", "solve_problem", "l2_error", "mp_report",
    "MetricField", "MetricKind", "build_metric", "TetMesh",
]
