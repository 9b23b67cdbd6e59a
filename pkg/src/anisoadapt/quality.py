"""Mesh quality measures and sufficient conditions for the discrete maximum principle.

Conventions: ``A = (F')^{-1} T (F')^{-T}`` is the condition matrix of an
element, with ``T = D_K`` for the MP checks and ``T = M_K^{-1}`` for the
alignment measures.  Norms of matrices are spectral norms.
"""
from dataclasses import dataclass, field

import numpy as np

from .geometry import REFERENCE, condition_matrix, element_maps, spd_inverse

_PAIRS = [(i, j) for i in range(4) for j in range(i + 1, 4)]


def mp_bound(d):
    """``min(1 + 1/d, (1 - 1/d)^(-1/(d-1)))``: threshold of the eigenvalue-ratio condition."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    return min(1.0 + 1.0 / d, (1.0 - 1.0 / d) ** (-1.0 / (d - 1)))


def _spectral_ratio(A):
    lam = np.linalg.eigvalsh(A)
    return lam[..., -1] / np.cbrt(np.prod(lam, axis=-1)), lam


def pair_values(A):
    """All six values ``q_i^T A q_j`` (i < j) for reference inward normals ``q``."""
    Q = REFERENCE.inward_normals
    G = np.einsum("ia,...ab,jb->...ij", Q, A, Q)
    return np.stack([G[..., i, j] for i, j in _PAIRS], axis=-1)


def check_nonobtuse(emap, D_K):
    """Anisotropic non-obtuse angle condition.

    Returns ``(pairs, ok)``; ``ok`` holds when every pair value is at most
    ``1e-12 * ||A||`` so exact right angles pass deterministically.
    """
    A = condition_matrix(emap, D_K)
    pairs = pair_values(A)
    tol = 1e-12 * np.linalg.norm(A, ord=2, axis=(-2, -1))
    ok = np.max(pairs, axis=-1) <= tol
    return pairs, ok


def check_cond4(emap, D_K):
    """``|| A / det(A)^(1/3) - I || <= 1/3``."""
    A = condition_matrix(emap, D_K)
    lam = np.linalg.eigvalsh(A)
    scaled = lam / np.cbrt(np.prod(lam, axis=-1))[..., None]
    return np.max(np.abs(scaled - 1.0), axis=-1) <= 1.0 / 3.0 + 1e-14


def cond5_value(emap, D_K):
    return _spectral_ratio(condition_matrix(emap, D_K))[0]


def check_cond5(emap, D_K):
    """``||A|| / det(A)^(1/3) <= mp_bound(3)``."""
    return cond5_value(emap, D_K) <= mp_bound(3)


def _alignment_matrix(emap, M_K):
    return condition_matrix(emap, spd_inverse(M_K))


def q_ali(emap, M_K):
    """Alignment measure ``||A|| / det(A)^(1/3)`` with ``A = (F')^{-1} M^{-1} (F')^{-T}``."""
    return _spectral_ratio(_alignment_matrix(emap, M_K))[0]


def q_ali_trace(emap, M_K):
    """Trace variant ``tr(A) / (3 det(A)^(1/3))``."""
    lam = np.linalg.eigvalsh(_alignment_matrix(emap, M_K))
    return lam.sum(axis=-1) / (3.0 * np.cbrt(np.prod(lam, axis=-1)))


def sigma_h(volumes, M):
    return float(np.sum(volumes * np.sqrt(np.linalg.det(M))))


def q_eq(volumes, M):
    """Equidistribution measure per element and ``sigma_h``.

    ``volumes`` may be a mesh; ``M`` is an (N, 3, 3) array or a metric field.
    """
    if hasattr(volumes, "volumes"):
        volumes = volumes.volumes
    M = getattr(M, "tensors", M)
    volumes = np.abs(np.asarray(volumes, dtype=float))
    weights = volumes * np.sqrt(np.linalg.det(M))
    sig = float(np.sum(weights))
    return len(volumes) * weights / sig, sig


def l2_norm(volumes, q):
    """Volume-weighted RMS ``((1/|Omega|) sum |K| q_K^2)^(1/2)``."""
    volumes = np.abs(volumes)
    return float(np.sqrt(np.sum(volumes * q * q) / np.sum(volumes)))


@dataclass
class QualityReport:
    q_eq: np.ndarray
    q_ali: np.ndarray
    q_ali_trace: np.ndarray
    mp_condition_ok: np.ndarray
    cond5_ok: np.ndarray
    sigma_h: float
    q_eq_l2: float
    q_ali_l2: float
    q_ali_linf: float
    extra: dict = field(default_factory=dict)

    @property
    def n_elements(self):
        return len(self.q_eq)

    def summary(self):
        """Ordered scalar diagnostics (one line per quantity in key=value output)."""
        out = {
            "N": self.n_elements,
            "q_ali_l2": self.q_ali_l2,
            "q_ali_linf": self.q_ali_linf,
            "q_eq_l2": self.q_eq_l2,
            "q_eq_linf": float(np.max(self.q_eq)),
            "sigma_h": self.sigma_h,
            "mp_pass": int(np.sum(self.mp_condition_ok)),
            "cond5_pass": int(np.sum(self.cond5_ok)),
        }
        out.update(self.extra)
        return out

    def to_kv(self):
        return "\n".join(f"{k}={format_value(v)}" for k, v in self.summary().items()) + "\n"

    def to_table(self):
        rows = [(k, format_value(v)) for k, v in self.summary().items()]
        w = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(w)}  {v}" for k, v in rows) + "\n"


def format_value(v):
    """Stable text form used by every report: 6 significant digits, lowercase booleans."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def report(mesh, metric, D):
    """Quality report of ``mesh`` in ``metric`` (field or (N,3,3)) with element diffusion ``D``."""
    M = getattr(metric, "tensors", metric)
    M = np.broadcast_to(np.asarray(M, dtype=float), (mesh.n_elements, 3, 3))
    D = np.broadcast_to(np.asarray(D, dtype=float), (mesh.n_elements, 3, 3))
    maps = element_maps(mesh)
    vol = maps.volume
    qe, sig = q_eq(vol, M)
    qa = q_ali(maps, M)
    qt = q_ali_trace(maps, M)
    _, mp_ok = check_nonobtuse(maps, D)
    c5 = check_cond5(maps, D)
    return QualityReport(
        q_eq=qe, q_ali=qa, q_ali_trace=qt, mp_condition_ok=mp_ok, cond5_ok=c5, sigma_h=sig,
        q_eq_l2=l2_norm(vol, qe), q_ali_l2=l2_norm(vol, qa), q_ali_linf=float(np.max(qa)),
    )
