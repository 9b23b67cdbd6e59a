"""The four metric tensors driving mesh adaptation.

``Identity``  M = I
``Adap``      H^1-seminorm interpolation-error metric from the recovered Hessian,
              normalized so that sum |K| sqrt(det M_K) = 2 |Omega|
``Dmp``       M_K = D_K^{-1}
``DmpAdap``   M_K = (1 + B_K / alpha_h)^(2/5) det(D_K)^(1/3) D_K^{-1}
"""
import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NormalizationUnattainable
from .geometry import check_spd, spd_inverse


class MetricKind(enum.Enum):
    Identity = "id"
    Adap = "adap"
    Dmp = "dmp"
    DmpAdap = "dmpadap"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for kind in cls:
            if value in (kind.value, kind.name, kind.name.lower()):
                return kind
        raise ValueError(f"unknown metric kind {value!r}; choose from {[k.value for k in cls]}")


@dataclass
class MetricField:
    tensors: np.ndarray
    kind: MetricKind
    alpha_h: float = None
    fallback: bool = False
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.tensors)

    def sqrt_det(self):
        return np.sqrt(np.linalg.det(self.tensors))

    def is_constant(self, rtol=1e-10):
        t = self.tensors
        scale = np.max(np.abs(t))
        return bool(np.all(np.abs(t - t[0]) <= rtol * scale))

    def vertex_tensors(self, mesh):
        return vertex_average(mesh, self.tensors)


def vertex_average(mesh, tensors):
    """Volume-weighted average of adjacent element tensors at every vertex."""
    w = np.abs(mesh.volumes)
    out = np.zeros((mesh.n_vertices, 3, 3))
    wsum = np.zeros(mesh.n_vertices)
    for k in range(4):
        np.add.at(out, mesh.tets[:, k], w[:, None, None] * tensors)
        np.add.at(wsum, mesh.tets[:, k], w)
    return out / wsum[:, None, None]


def _ordered_sum(x):
    # math.fsum is exact-rounded, hence independent of summation order
    return math.fsum(np.ravel(x).tolist())


def abs_eig(H):
    """``|H|``: symmetric eigendecomposition with absolute eigenvalues."""
    H = 0.5 * (H + np.swapaxes(H, -1, -2))
    lam, Q = np.linalg.eigh(H)
    return (Q * np.abs(lam)[..., None, :]) @ np.swapaxes(Q, -1, -2), np.abs(lam), Q


def metric_identity(mesh):
    return MetricField(np.broadcast_to(np.eye(3), (mesh.n_elements, 3, 3)).copy(), MetricKind.Identity)


def metric_dmp(mesh, D):
    D = check_spd(np.broadcast_to(D, (mesh.n_elements, 3, 3)), "diffusion tensor")
    return MetricField(spd_inverse(D), MetricKind.Dmp)


def _adap_sqrt_det(mu, vol, alpha):
    """sum |K| sqrt(det M_adap) for eigenvalues |lambda| of |H_K| (rows of ``mu``)."""
    m = 1.0 + mu / alpha
    # det M = ||I+|H|/a||^(6/5) det(I+|H|/a)^(2/5)
    return np.sum(vol * m.max(axis=1) ** 0.6 * np.prod(m, axis=1) ** 0.2)


def solve_alpha_h(mu, vol, target, max_iter=200, rtol=1e-12):
    """Bisection (in log alpha) for the normalization of the Adap metric.

    ``mu`` holds the absolute Hessian eigenvalues per element.  Returns
    ``None`` when no root exists in ``[1e-12 hbar, 1e12 hbar]``.
    """
    hbar = float(np.mean(np.max(mu, axis=1)))
    if not np.isfinite(hbar) or hbar <= 0.0:
        return None
    lo, hi = math.log(1e-12 * hbar), math.log(1e12 * hbar)
    f = lambda la: _adap_sqrt_det(mu, vol, math.exp(la)) - target
    flo, fhi = f(lo), f(hi)
    if flo < 0.0 or fhi > 0.0:
        return None
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= rtol * target:
            break
        if fm > 0.0:
            lo = mid
        else:
            hi = mid
    return math.exp(mid)


def metric_adap(mesh, H):
    """Interpolation-error metric from element Hessians ``H`` (N, 3, 3).

    When the normalization has no solution (e.g. H = 0) the identity metric
    is returned with ``fallback=True`` and a :class:`NormalizationUnattainable`
    warning.
    """
    H = np.asarray(H, dtype=float)
    vol = np.abs(mesh.volumes)
    absH, mu, _ = abs_eig(H)
    target = 2.0 * float(np.sum(vol))
    alpha = solve_alpha_h(mu, vol, target)
    if alpha is None:
        warnings.warn("alpha_h equation has no root; using the identity metric", NormalizationUnattainable,
                      stacklevel=2)
        out = metric_identity(mesh)
        out.kind = MetricKind.Adap
        out.fallback = True
        return out
    A = np.eye(3) + absH / alpha
    m = 1.0 + mu / alpha
    scale = m.max(axis=1) ** 0.4 * np.prod(m, axis=1) ** -0.2
    M = scale[:, None, None] * A
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    total = _ordered_sum(vol * np.sqrt(np.linalg.det(M)))
    return MetricField(M, MetricKind.Adap, alpha_h=alpha, info={"normalization": total, "target": target})


def dmp_adap_factors(D, H):
    """``B_K = det(D)^(-1/3) ||D^{-1}|| ||D |H|||^2`` with spectral norms."""
    absH, _, _ = abs_eig(H)
    Dinv = spd_inverse(D)
    detD = np.linalg.det(D)
    return detD ** (-1.0 / 3.0) * np.linalg.norm(Dinv, ord=2, axis=(-2, -1)) * \
        np.linalg.norm(D @ absH, ord=2, axis=(-2, -1)) ** 2


def metric_dmp_adap(mesh, D, H):
    D = check_spd(np.broadcast_to(D, (mesh.n_elements, 3, 3)), "diffusion tensor")
    H = np.asarray(H, dtype=float)
    vol = np.abs(mesh.volumes)
    B = dmp_adap_factors(D, H)
    omega = _ordered_sum(vol)
    alpha = (_ordered_sum(vol * B ** 0.6) / omega) ** (5.0 / 3.0)
    Dinv = spd_inverse(D)
    base = np.linalg.det(D) ** (1.0 / 3.0)
    if alpha > 0.0:
        theta = (1.0 + B / alpha) ** 0.4 * base
    else:
        theta = base
    M = theta[:, None, None] * Dinv
    return MetricField(M, MetricKind.DmpAdap, alpha_h=alpha, info={"theta": theta, "B": B})


def build_metric(kind, mesh, D=None, H=None):
    kind = MetricKind.parse(kind)
    if kind is MetricKind.Identity:
        return metric_identity(mesh)
    if kind is MetricKind.Dmp:
        return metric_dmp(mesh, D)
    if kind is MetricKind.Adap:
        return metric_adap(mesh, H)
    return metric_dmp_adap(mesh, D, H)
