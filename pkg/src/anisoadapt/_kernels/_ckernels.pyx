# cython: language_level=3
"""Compiled versions of the kernels in ``_pykernels``; identical signatures."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def tet_geometry(coords, tets):
    cdef const double[:, ::1] X = np.ascontiguousarray(coords, dtype=np.float64)
    cdef const long long[:, ::1] T = np.ascontiguousarray(tets, dtype=np.int64)
    cdef Py_ssize_t n = T.shape[0], k, i, j
    vol_arr = np.empty(n)
    grads_arr = np.empty((n, 4, 3))
    cdef double[::1] vol = vol_arr
    cdef double[:, :, ::1] G = grads_arr
    cdef double a[3]
    cdef double b[3]
    cdef double c[3]
    cdef double det, inv
    cdef long long v0
    for k in range(n):
        v0 = T[k, 0]
        for i in range(3):
            a[i] = X[T[k, 1], i] - X[v0, i]
            b[i] = X[T[k, 2], i] - X[v0, i]
            c[i] = X[T[k, 3], i] - X[v0, i]
        det = (a[0] * (b[1] * c[2] - b[2] * c[1])
               - b[0] * (a[1] * c[2] - a[2] * c[1])
               + c[0] * (a[1] * b[2] - a[2] * b[1]))
        vol[k] = det / 6.0
        inv = 1.0 / det if det != 0.0 else 1.0
        # rows of E^{-1} are (b x c, c x a, a x b) / det
        G[k, 1, 0] = (b[1] * c[2] - b[2] * c[1]) * inv
        G[k, 1, 1] = (b[2] * c[0] - b[0] * c[2]) * inv
        G[k, 1, 2] = (b[0] * c[1] - b[1] * c[0]) * inv
        G[k, 2, 0] = (c[1] * a[2] - c[2] * a[1]) * inv
        G[k, 2, 1] = (c[2] * a[0] - c[0] * a[2]) * inv
        G[k, 2, 2] = (c[0] * a[1] - c[1] * a[0]) * inv
        G[k, 3, 0] = (a[1] * b[2] - a[2] * b[1]) * inv
        G[k, 3, 1] = (a[2] * b[0] - a[0] * b[2]) * inv
        G[k, 3, 2] = (a[0] * b[1] - a[1] * b[0]) * inv
        for j in range(3):
            G[k, 0, j] = -(G[k, 1, j] + G[k, 2, j] + G[k, 3, j])
    return vol_arr, grads_arr


def local_stiffness(grads, vol, diff):
    cdef const double[:, :, ::1] G = np.ascontiguousarray(grads, dtype=np.float64)
    cdef const double[::1] V = np.ascontiguousarray(vol, dtype=np.float64)
    cdef const double[:, :, ::1] D = np.ascontiguousarray(diff, dtype=np.float64)
    cdef Py_ssize_t n = G.shape[0], k, i, j, a, b
    out_arr = np.empty((n, 4, 4))
    cdef double[:, :, ::1] out = out_arr
    cdef double DG[4][3]
    cdef double s, w
    for k in range(n):
        w = V[k] if V[k] >= 0.0 else -V[k]
        for i in range(4):
            for a in range(3):
                s = 0.0
                for b in range(3):
                    s += D[k, a, b] * G[k, i, b]
                DG[i][a] = s
        for i in range(4):
            for j in range(i, 4):
                s = 0.0
                for a in range(3):
                    s += G[k, j, a] * DG[i][a]
                out[k, i, j] = w * s
                out[k, j, i] = w * s
    return out_arr


def lsq_normal_systems(coords, values, indptr, indices, int order):
    cdef const double[:, ::1] X = np.ascontiguousarray(coords, dtype=np.float64)
    vals = np.ascontiguousarray(values, dtype=np.float64)
    if vals.ndim == 1:
        vals = vals[:, None]
    cdef const double[:, ::1] U = vals
    cdef const long long[::1] P = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long long[::1] I = np.ascontiguousarray(indices, dtype=np.int64)
    cdef Py_ssize_t nv = P.shape[0] - 1, m = U.shape[1]
    cdef int p = 3 if order == 1 else 9
    N_arr = np.zeros((nv, p, p))
    R_arr = np.zeros((nv, p, m))
    s_arr = np.zeros(nv)
    cdef double[:, :, ::1] N = N_arr
    cdef double[:, :, ::1] R = R_arr
    cdef double[::1] S = s_arr
    cdef Py_ssize_t v, t, q, r, c
    cdef long long j
    cdef double d[3]
    cdef double mono[9]
    cdef double dist, scale
    for v in range(nv):
        scale = 0.0
        for t in range(P[v], P[v + 1]):
            j = I[t]
            dist = 0.0
            for q in range(3):
                dist += (X[j, q] - X[v, q]) * (X[j, q] - X[v, q])
            dist = sqrt(dist)
            if dist > scale:
                scale = dist
        if scale == 0.0:
            scale = 1.0
        S[v] = scale
        for t in range(P[v], P[v + 1]):
            j = I[t]
            for q in range(3):
                d[q] = (X[j, q] - X[v, q]) / scale
                mono[q] = d[q]
            if p == 9:
                mono[3] = 0.5 * d[0] * d[0]
                mono[4] = 0.5 * d[1] * d[1]
                mono[5] = 0.5 * d[2] * d[2]
                mono[6] = d[0] * d[1]
                mono[7] = d[1] * d[2]
                mono[8] = d[0] * d[2]
            for r in range(p):
                for c in range(p):
                    N[v, r, c] += mono[r] * mono[c]
                for c in range(m):
                    R[v, r, c] += mono[r] * (U[j, c] - U[v, c])
    return N_arr, R_arr, s_arr


def locate_points(points, coords, tets, candidates, double tol=1e-10):
    cdef const double[:, ::1] Q = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] X = np.ascontiguousarray(coords, dtype=np.float64)
    cdef const long long[:, ::1] T = np.ascontiguousarray(tets, dtype=np.int64)
    cdef const long long[:, ::1] C = np.ascontiguousarray(candidates, dtype=np.int64)
    cdef Py_ssize_t npts = C.shape[0], k = C.shape[1], i, s, q
    elem_arr = np.empty(npts, dtype=np.int64)
    bary_arr = np.empty((npts, 4))
    found_arr = np.zeros(npts, dtype=bool)
    cdef long long[::1] elem = elem_arr
    cdef double[:, ::1] bary = bary_arr
    cdef cnp.uint8_t[::1] found = found_arr.view(np.uint8)
    cdef double a[3]
    cdef double b[3]
    cdef double c[3]
    cdef double r[3]
    cdef double lam[4]
    cdef double det, worst, best
    cdef long long t, v0
    for i in range(npts):
        best = -1e300
        for s in range(k):
            t = C[i, s]
            v0 = T[t, 0]
            for q in range(3):
                a[q] = X[T[t, 1], q] - X[v0, q]
                b[q] = X[T[t, 2], q] - X[v0, q]
                c[q] = X[T[t, 3], q] - X[v0, q]
                r[q] = Q[i, q] - X[v0, q]
            det = (a[0] * (b[1] * c[2] - b[2] * c[1])
                   - b[0] * (a[1] * c[2] - a[2] * c[1])
                   + c[0] * (a[1] * b[2] - a[2] * b[1]))
            # Cramer's rule for E lam = r with E = [a b c]
            lam[1] = (r[0] * (b[1] * c[2] - b[2] * c[1])
                      - b[0] * (r[1] * c[2] - r[2] * c[1])
                      + c[0] * (r[1] * b[2] - r[2] * b[1])) / det
            lam[2] = (a[0] * (r[1] * c[2] - r[2] * c[1])
                      - r[0] * (a[1] * c[2] - a[2] * c[1])
                      + c[0] * (a[1] * r[2] - a[2] * r[1])) / det
            lam[3] = (a[0] * (b[1] * r[2] - b[2] * r[1])
                      - b[0] * (a[1] * r[2] - a[2] * r[1])
                      + r[0] * (a[1] * b[2] - a[2] * b[1])) / det
            lam[0] = 1.0 - lam[1] - lam[2] - lam[3]
            worst = lam[0]
            for q in range(1, 4):
                if lam[q] < worst:
                    worst = lam[q]
            if worst > best:
                best = worst
                elem[i] = t
                for q in range(4):
                    bary[i, q] = lam[q]
            if worst >= -tol:
                elem[i] = t
                for q in range(4):
                    bary[i, q] = lam[q]
                found[i] = 1
                break
    return elem_arr, bary_arr, found_arr
