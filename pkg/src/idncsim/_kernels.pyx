# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-slot kernels; see _kernels_py for the reference versions."""
import numpy as np
cimport numpy as cnp

BACKEND = "cython"


def gidnc_adjacency(users, packets, wants):
    cdef cnp.intp_t[:] u = np.ascontiguousarray(users, dtype=np.intp)
    cdef cnp.intp_t[:] p = np.ascontiguousarray(packets, dtype=np.intp)
    cdef cnp.uint8_t[:, :] w = np.ascontiguousarray(wants, dtype=np.uint8)
    cdef Py_ssize_t n = u.shape[0], a, b
    out = np.zeros((n, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, :] adj = out
    for a in range(n):
        for b in range(a + 1, n):
            if u[a] == u[b]:
                continue
            if p[a] == p[b] or (w[u[b], p[a]] == 0 and w[u[a], p[b]] == 0):
                adj[a, b] = 1
                adj[b, a] = 1
    return out


def greedy_clique(adj_in, wstar_in, cand_in):
    cdef cnp.uint8_t[:, :] adj = np.ascontiguousarray(adj_in, dtype=np.uint8)
    cdef double[:] wstar = np.ascontiguousarray(wstar_in, dtype=np.float64)
    idx_arr = np.flatnonzero(np.asarray(cand_in, dtype=bool)).astype(np.intp)
    cdef cnp.intp_t[:] idx = idx_arr
    cdef Py_ssize_t k = idx.shape[0], x, y, a, best, kept
    cdef double s, w, bw, bws
    clique = []
    while k > 0:
        best = -1
        bw = 0.0
        bws = 0.0
        for x in range(k):
            a = idx[x]
            s = 0.0
            for y in range(k):
                if adj[a, idx[y]]:
                    s = s + wstar[idx[y]]
            w = (wstar[a] + 1.0) * s
            if best < 0 or w > bw or (w == bw and wstar[a] > bws):
                best = a
                bw = w
                bws = wstar[a]
        clique.append(int(best))
        kept = 0
        for x in range(k):
            if adj[best, idx[x]]:
                idx[kept] = idx[x]
                kept += 1
        k = kept
    return clique


def bpso_scores(X_in, wants_in, adm_in, S_in, shift_in):
    cdef cnp.uint8_t[:, :] X = np.ascontiguousarray(X_in, dtype=np.uint8)
    cdef cnp.uint8_t[:, :] W = np.ascontiguousarray(wants_in, dtype=np.uint8)
    cdef cnp.uint8_t[:, :] A = np.ascontiguousarray(adm_in, dtype=np.uint8)
    cdef double[:, :] S = np.ascontiguousarray(S_in, dtype=np.float64)
    cdef double[:] shift = np.ascontiguousarray(shift_in, dtype=np.float64)
    cdef Py_ssize_t L = X.shape[0], M = W.shape[0], N = W.shape[1], l, i, j, pk, cnt
    out = np.zeros(L, dtype=np.float64)
    cdef double[:] res = out
    cdef double acc
    for l in range(L):
        acc = 0.0
        for i in range(M):
            cnt = 0
            pk = -1
            for j in range(N):
                if X[l, j] and W[i, j]:
                    cnt += 1
                    if cnt == 1:
                        pk = j
                    else:
                        break
            if cnt == 1 and A[i, pk]:
                acc = acc + (S[i, pk] + shift[i])
        res[l] = acc
    return out
