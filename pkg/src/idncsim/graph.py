"""G-IDNC and LG-IDNC coding graphs, criticality layers and vertex weights.

A vertex (i, j) stands for "user i still wants packet j". Vertex ids follow
row-major (user, packet) order, which fixes every deterministic tie-break.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .gec import clamp_prob


@dataclass
class CodingGraph:
    users: np.ndarray
    packets: np.ndarray
    adj: np.ndarray                      # uint8, symmetric, zero diagonal
    weights: np.ndarray = None
    layer: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = len(self.users)
        if self.weights is None:
            self.weights = np.zeros(v)
        if self.layer is None:
            self.layer = np.ones(v, dtype=np.int64)

    @property
    def num_vertices(self) -> int:
        return len(self.users)

    @property
    def h(self) -> int:
        return int(self.layer.max()) if self.num_vertices else 0

    def vertex(self, a: int) -> tuple:
        return int(self.users[a]), int(self.packets[a])

    def index_of(self, user: int, packet: int) -> int:
        hit = np.flatnonzero((self.users == user) & (self.packets == packet))
        if len(hit) == 0:
            raise KeyError((user, packet))
        return int(hit[0])

    def edges(self) -> set:
        a, b = np.nonzero(np.triu(self.adj, 1))
        return {(self.vertex(x), self.vertex(y)) for x, y in zip(a, b)}

    def is_clique(self, members) -> bool:
        members = list(members)
        return all(self.adj[a, b] for k, a in enumerate(members) for b in members[k + 1:])

    def subgraph(self, keep) -> "CodingGraph":
        keep = np.flatnonzero(np.asarray(keep, dtype=bool))
        return CodingGraph(self.users[keep], self.packets[keep],
                           self.adj[np.ix_(keep, keep)], self.weights[keep],
                           self.layer[keep], dict(self.meta))


def _vertices(vertex_mask):
    u, p = np.nonzero(np.asarray(vertex_mask, dtype=bool))
    return u.astype(np.int64), p.astype(np.int64)


def _wants_of(state):
    if hasattr(state, "believed_wants"):
        return state.believed_wants()
    if hasattr(state, "wants"):
        return np.asarray(state.wants, dtype=bool)
    return np.asarray(state, dtype=bool)


def build_gidnc(state, vertex_mask=None) -> CodingGraph:
    """Vertices for wanted packets; edges for instantly decodable pairs.

    ``state`` is a Session, a BeliefTable or a boolean Wants matrix. The
    optional ``vertex_mask`` drops vertices without changing the Wants used
    by the edge conditions.
    """
    wants = _wants_of(state)
    mask = wants if vertex_mask is None else (wants & vertex_mask)
    u, p = _vertices(mask)
    adj = kernels.gidnc_adjacency(u, p, wants.astype(np.uint8))
    return CodingGraph(u, p, adj)


def _pair_terms(beliefs, u, p):
    e = clamp_prob(np.asarray(beliefs.e, dtype=float))
    c = (1.0 - e[u]) * (1.0 - np.asarray(beliefs.pf)[u])
    pn = np.asarray(beliefs.pn, dtype=float)
    cross = pn[u[None, :], p[:, None]]        # [a, b]: user of b on packet of a
    own = pn[u, p]
    return c, cross, own


def expected_pair_delay(beliefs, v_ij, v_kl, combined: bool) -> float:
    """Expected delay the two vertex users suffer from j XOR l, or from j alone.

    With ``combined`` false the result is d(j), obtained from the combined
    expression by setting the innovative probabilities of l to zero.
    """
    (i, j), (k, l) = v_ij, v_kl
    e = clamp_prob(np.asarray(beliefs.e, dtype=float))
    total = 0.0
    for user in {i, k}:
        pj = float(beliefs.pn[user, j])
        pl = float(beliefs.pn[user, l]) if combined else 0.0
        total += (1.0 - e[user]) * (pj * pl + (1.0 - pj) * (1.0 - pl)) * (1.0 - beliefs.pf[user])
    return total


def build_lgidnc(state, beliefs, vertex_mask=None) -> CodingGraph:
    """Edges where combining lowers (or keeps) the expected pair delay."""
    wants = np.asarray(beliefs.wants, dtype=bool)
    mask = wants if vertex_mask is None else (wants & vertex_mask)
    u, p = _vertices(mask)
    c, cross, own = _pair_terms(beliefs, u, p)
    a_term = c[:, None] * (own[:, None] * cross.T + (1.0 - own[:, None]) * (1.0 - cross.T))
    d_comb = a_term + a_term.T
    d_single = (c * (1.0 - own))[:, None] + c[None, :] * (1.0 - cross)
    c2 = d_comb <= np.minimum(d_single, d_single.T)
    same_user = u[:, None] == u[None, :]
    same_pkt = p[:, None] == p[None, :]
    adj = (~same_user & (same_pkt | c2)).astype(np.uint8)
    return CodingGraph(u, p, adj)


def partition_layers(graph: CodingGraph, criticality) -> CodingGraph:
    """Assign every vertex the criticality layer of its user."""
    cache = {}
    layer = np.empty(graph.num_vertices, dtype=np.int64)
    for a, user in enumerate(graph.users):
        user = int(user)
        if user not in cache:
            cache[user] = criticality.layer_of(user)
        layer[a] = cache[user]
    graph.layer = layer
    return graph


def vertex_weight_perfect(e: float) -> float:
    """log(1/e) with e clamped away from 0 and 1."""
    return -math.log(clamp_prob(e))


def vertex_weight_limited(e: float, pn: float, pf: float) -> float:
    """log(1 + p_n / (e/(1-e) + p_f))."""
    e = clamp_prob(e)
    return math.log1p(pn / (e / (1.0 - e) + pf))


def perfect_weights(beliefs, users) -> np.ndarray:
    e = clamp_prob(np.asarray(beliefs.e, dtype=float))
    return -np.log(e[np.asarray(users, dtype=np.intp)])


def limited_weights(beliefs, users, packets) -> np.ndarray:
    u = np.asarray(users, dtype=np.intp)
    p = np.asarray(packets, dtype=np.intp)
    e = clamp_prob(np.asarray(beliefs.e, dtype=float))[u]
    pn = np.asarray(beliefs.pn, dtype=float)[u, p]
    pf = np.asarray(beliefs.pf, dtype=float)[u]
    return np.log1p(pn / (e / (1.0 - e) + pf))


# -- adjacency-list text dump ----------------------------------------------

def to_adjacency_list(graph: CodingGraph) -> str:
    """``user,packet: neighbour neighbour ...`` per vertex, in vertex order."""
    lines = [f"# idncsim-graph V={graph.num_vertices} E={len(graph.edges())}"]
    for a in range(graph.num_vertices):
        nbrs = " ".join(f"{graph.users[b]},{graph.packets[b]}"
                        for b in np.flatnonzero(graph.adj[a]))
        lines.append(f"{graph.users[a]},{graph.packets[a]}: {nbrs}".rstrip())
    return "\n".join(lines) + "\n"


def parse_adjacency_list(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(":")
        key = tuple(int(x) for x in head.split(","))
        out[key] = {tuple(int(x) for x in tok.split(",")) for tok in rest.split()}
    return out
