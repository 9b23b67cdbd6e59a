"""Longest-metric-edge bisection.

Every tetrahedron designates its longest edge in the metric (ties broken by
edge index).  An edge that is the designated edge of all tetrahedra around
it is *terminal*; terminal edges never share a tetrahedron, so a whole batch
of them can be split at once, each split cutting its full edge shell in two.
The longest-edge propagation path of any element ends at a terminal edge at
least as long, so splitting the longest terminal edges first refines the
longest edges first and keeps the mesh conforming without hanging nodes.
"""
import numpy as np

from ..errors import RefinementStall
from ..tetmesh import TetMesh
from ..tetmesh.mesh import TET_EDGES
from .sampling import MetricSampler

UNIT_TET_VOLUME = np.sqrt(2.0) / 12.0


def _edge_table(tets, nv):
    e = np.sort(tets[:, TET_EDGES].reshape(-1, 2), axis=1)
    keys = e[:, 0] * nv + e[:, 1]
    uniq, inv = np.unique(keys, return_inverse=True)
    return uniq, inv.reshape(-1, 6)


def metric_lengths(vertices, vtensors, keys, nv):
    a, b = keys // nv, keys % nv
    d = vertices[b] - vertices[a]
    M = 0.5 * (vtensors[a] + vtensors[b])
    return np.sqrt(np.einsum("ni,nij,nj->n", d, M, d))


def _split(tets, tags, facets, ftags, vertices, edges_a, edges_b, mids, shell_tets, shell_edge):
    """Split tets ``shell_tets`` (each containing edge ``shell_edge``) and boundary facets on those edges."""
    T = tets[shell_tets]
    a = edges_a[shell_edge][:, None]
    b = edges_b[shell_edge][:, None]
    m = mids[shell_edge][:, None]
    child1 = np.where(T == b, m, T)
    child2 = np.where(T == a, m, T)
    keep = np.ones(len(tets), dtype=bool)
    keep[shell_tets] = False
    tets = np.vstack([tets[keep], child1, child2])
    tags = np.concatenate([tags[keep], tags[shell_tets], tags[shell_tets]])

    if len(facets):
        nv = max(int(facets.max()), int(tets.max())) + 1
        split_keys = edges_a * nv + edges_b
        order = np.argsort(split_keys)
        fe = np.sort(facets[:, [[0, 1], [1, 2], [0, 2]]], axis=2)
        fkeys = fe[..., 0] * nv + fe[..., 1]
        pos = np.clip(np.searchsorted(split_keys[order], fkeys), 0, len(order) - 1)
        hit = split_keys[order][pos] == fkeys
        hit_f, local = np.nonzero(hit)
        if len(hit_f):
            hit_e = order[pos[hit_f, local]]
            F = facets[hit_f]
            fa = edges_a[hit_e][:, None]
            fb = edges_b[hit_e][:, None]
            fm = mids[hit_e][:, None]
            f1 = np.where(F == fb, fm, F)
            f2 = np.where(F == fa, fm, F)
            fkeep = np.ones(len(facets), dtype=bool)
            fkeep[hit_f] = False
            facets = np.vstack([facets[fkeep], f1, f2])
            ftags = np.concatenate([ftags[fkeep], ftags[hit_f], ftags[hit_f]])
    return tets, tags, facets, ftags


def generate_bisection(mesh, metric, target_N, source_mesh=None, batch_fraction=0.8, max_rounds=10000):
    """Refine ``mesh`` towards a mesh uniform in ``metric`` with about ``target_N`` elements.

    ``metric`` is an element field on ``source_mesh`` (defaults to ``mesh``);
    it is interpolated from volume-weighted vertex averages and rescaled so
    that ``target_N`` unit elements fill the domain.  Refinement stops once
    ``target_N`` is reached, or when every metric edge length is within twice
    the median and no edge exceeds ``sqrt(2)`` in the rescaled metric.
    """
    source_mesh = source_mesh or mesh
    target_N = int(target_N)
    if mesh.n_elements >= target_N:
        return mesh
    sampler = MetricSampler(source_mesh, metric)
    # unit-volume rescaling: sum |K| sqrt(det(s M)) = target_N * |unit tet|
    scale = (target_N * UNIT_TET_VOLUME / sampler.sigma_h) ** (2.0 / 3.0)

    vertices = [np.array(mesh.vertices)]
    V = np.array(mesh.vertices)
    vt = [scale * sampler(V)]
    tets = np.array(mesh.tets)
    tags = np.array(mesh.tet_tags)
    facets = np.array(mesh.facets)
    ftags = np.array(mesh.facet_tags)
    cap = 10 * target_N
    nv = len(V)
    for _ in range(max_rounds):
        if len(tets) >= target_N:
            break
        vt_all = vt[0] if len(vt) == 1 else np.concatenate(vt)
        vt = [vt_all]
        V = vertices[0] if len(vertices) == 1 else np.concatenate(vertices)
        vertices = [V]
        nv = len(V)
        keys, te = _edge_table(tets, nv)
        ell = metric_lengths(V, vt_all, keys, nv)
        med, top = np.median(ell), ell.max()
        if top <= 2.0 * med and top <= np.sqrt(2.0):
            break
        # designated longest edge per tet; a global (length, key) order keeps ties consistent
        rank = np.empty(len(keys), dtype=np.int64)
        rank[np.lexsort((keys, ell))] = np.arange(len(keys))
        best_local = np.argmax(rank[te], axis=1)
        designated = te[np.arange(len(tets)), best_local]
        # an edge is terminal when every tet containing it designates it
        count_all = np.bincount(te.ravel(), minlength=len(keys))
        count_des = np.bincount(designated, minlength=len(keys))
        terminal = np.flatnonzero((count_all == count_des) & (count_all > 0))
        terminal = terminal[np.argsort(-ell[terminal], kind="stable")]
        thresh = batch_fraction * ell[terminal[0]]
        terminal = terminal[ell[terminal] >= thresh]
        budget = target_N - len(tets)
        shells = count_all[terminal]
        take = np.searchsorted(np.cumsum(shells), budget) + 1
        terminal = terminal[:take]

        ea, eb = keys[terminal] // nv, keys[terminal] % nv
        mids = nv + np.arange(len(terminal))
        pts = 0.5 * (V[ea] + V[eb])
        vertices.append(pts)
        vt.append(scale * sampler(pts))
        # map each terminal edge to tets containing it
        slot = -np.ones(len(keys), dtype=np.int64)
        slot[terminal] = np.arange(len(terminal))
        shell_tets = np.flatnonzero(slot[designated] >= 0)
        shell_edge = slot[designated[shell_tets]]
        tets, tags, facets, ftags = _split(tets, tags, facets, ftags, V, ea, eb, mids, shell_tets, shell_edge)
        if len(tets) > cap:
            raise RefinementStall(f"refinement produced {len(tets)} elements, more than 10x the target {target_N}")
    V = vertices[0] if len(vertices) == 1 else np.concatenate(vertices)
    meta = dict(mesh.meta)
    meta.update(generator="bisection", parent=mesh.meta.get("generator"), target_N=target_N)
    return TetMesh(V, tets, tags, facets, ftags, meta)
