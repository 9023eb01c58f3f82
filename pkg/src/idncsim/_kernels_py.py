"""Numpy implementations of the per-slot kernels.

Sums that feed comparisons are accumulated sequentially (``cumsum``) so the
results match the compiled backend bit for bit.
"""
import numpy as np

BACKEND = "python"


def _seqsum(a, axis):
    if a.shape[axis] == 0:
        return np.zeros(a.shape[:axis] + a.shape[axis + 1:])
    return np.take(np.cumsum(a, axis=axis), -1, axis=axis)


def gidnc_adjacency(users, packets, wants):
    """uint8 adjacency of the G-IDNC graph over the given vertices."""
    u = np.asarray(users, dtype=np.intp)
    p = np.asarray(packets, dtype=np.intp)
    w = np.asarray(wants, dtype=bool)
    same_user = u[:, None] == u[None, :]
    same_pkt = p[:, None] == p[None, :]
    has_ab = ~w[u[None, :], p[:, None]]      # packet of a is in Has of user of b
    adj = ~same_user & (same_pkt | (has_ab & has_ab.T))
    return adj.astype(np.uint8)


def greedy_clique(adj, wstar, cand):
    """Maximum-weight-vertex search restricted to ``cand``.

    The modified weight is (w* + 1) times the w* sum of the vertex's
    neighbours that are still candidates; ties fall back to w*, then id.
    """
    adj = np.asarray(adj, dtype=np.uint8)
    wstar = np.asarray(wstar, dtype=np.float64)
    cand = np.asarray(cand, dtype=bool).copy()
    clique = []
    while cand.any():
        idx = np.flatnonzero(cand)
        sub = adj[np.ix_(idx, idx)] * wstar[idx][None, :]
        w = (wstar[idx] + 1.0) * _seqsum(sub, axis=1)
        best = idx[np.lexsort((idx, -wstar[idx], -w))[0]]
        clique.append(int(best))
        cand &= adj[best].astype(bool)
        cand[best] = False
    return clique


def bpso_scores(X, wants, admissible, S, shift):
    """Layered objective of each particle position (rows of X)."""
    X = np.asarray(X, dtype=bool)
    wants = np.asarray(wants, dtype=bool)
    both = X[:, None, :] & wants[None, :, :]          # L x M x N
    hit = both.sum(axis=2) == 1
    pk = both.argmax(axis=2)
    users = np.arange(wants.shape[0])[None, :]
    ok = hit & np.asarray(admissible, dtype=bool)[users, pk]
    contrib = np.where(ok, np.asarray(S)[users, pk] + np.asarray(shift)[users], 0.0)
    return _seqsum(contrib, axis=1)
