"""Packet-combination selection: layered greedy search, BPSO and baselines.

Every solver consumes a :class:`DecisionContext`, the sender's view at one
decision slot, and returns a :class:`SelectionResult`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.special import expit

from . import kernels
from .beliefs import BeliefTable
from .graph import (
    CodingGraph,
    build_gidnc,
    build_lgidnc,
    limited_weights,
    partition_layers,
    perfect_weights,
)

EXHAUSTIVE_LIMIT = 16


class TooLarge(ValueError):
    pass


class Solver(str, enum.Enum):
    DDC_GRAPH = "DDC_Graph"
    DDC_BPSO = "DDC_BPSO"
    SSP = "SSP"
    SDD = "SDD"
    BLIND_NVE = "Blind_NVE"
    BLIND_FVE = "Blind_FVE"
    BLIND_SVE = "Blind_SVE"


@dataclass(frozen=True)
class BpsoParams:
    num_particles: int = 30
    num_iterations: int = 30
    c1: float = 2.0
    c2: float = 2.0
    inertia_range: tuple = (-1.0, 1.0)
    sparse_init: bool = True

    def __post_init__(self):
        if self.num_particles < 1 or self.num_iterations < 1:
            raise ValueError("BPSO needs at least one particle and one iteration")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("acceleration factors must be positive")
        lo, hi = self.inertia_range
        if lo > hi:
            raise ValueError("inertia_range must be (low, high)")


@dataclass
class SelectionResult:
    combination: tuple = ()
    targeted: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    score: float = 0.0
    history: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.combination


@dataclass
class DecisionContext:
    """Everything a solver may look at when choosing one transmission."""
    beliefs: BeliefTable
    criticality: object
    vertex_mask: np.ndarray
    limited: bool = False

    @property
    def wants(self) -> np.ndarray:
        return self.beliefs.wants

    @property
    def num_users(self) -> int:
        return self.wants.shape[0]

    def critical(self) -> set:
        return self.criticality.critical_set()

    def user_layers(self) -> np.ndarray:
        layers = np.zeros(self.num_users, dtype=np.int64)
        for i in np.flatnonzero(self.wants.any(axis=1)):
            layers[i] = self.criticality.layer_of(int(i))
        return layers


def result_from_clique(graph: CodingGraph, clique) -> SelectionResult:
    clique = sorted(int(a) for a in clique)
    targeted = {int(graph.users[a]): int(graph.packets[a]) for a in clique}
    weights = {graph.vertex(a): float(graph.weights[a]) for a in clique}
    combo = tuple(sorted({int(graph.packets[a]) for a in clique}))
    return SelectionResult(combo, targeted, weights, float(sum(weights.values())))


# -- greedy search ------------------------------------------------------------

def modified_weights(adj, wstar, cand) -> np.ndarray:
    """(w* + 1) times the w* sum over candidate neighbours (zero elsewhere)."""
    cand = np.asarray(cand, dtype=bool)
    nb = (np.asarray(adj, dtype=bool) & cand[None, :]).astype(float) @ np.asarray(wstar)
    return np.where(cand, (np.asarray(wstar) + 1.0) * nb, 0.0)


def greedy_layer_clique(graph: CodingGraph, wstar=None, cand=None) -> list:
    """Greedy maximal clique of the candidate subgraph, as vertex ids."""
    if graph.num_vertices == 0:
        return []
    wstar = graph.weights if wstar is None else np.asarray(wstar, dtype=float)
    cand = np.ones(graph.num_vertices, dtype=bool) if cand is None else np.asarray(cand, bool)
    return kernels.greedy_clique(graph.adj, wstar, cand)


def multi_layer_select(graph: CodingGraph, wstar=None, max_layer=None) -> list:
    """Layer-by-layer greedy search; each layer only sees vertices adjacent
    to the whole clique accumulated so far."""
    wstar = graph.weights if wstar is None else np.asarray(wstar, dtype=float)
    clique: list = []
    compatible = np.ones(graph.num_vertices, dtype=bool)
    top = graph.h if max_layer is None else min(graph.h, max_layer)
    for layer in range(1, top + 1):
        cand = compatible & (graph.layer == layer)
        if not cand.any():
            continue
        part = kernels.greedy_clique(graph.adj, wstar, cand)
        for a in part:
            compatible &= graph.adj[a].astype(bool)
        clique.extend(part)
    return clique


# -- exhaustive oracle --------------------------------------------------------

def maximal_cliques(graph: CodingGraph) -> list:
    if graph.num_vertices > EXHAUSTIVE_LIMIT:
        raise TooLarge(f"{graph.num_vertices} vertices exceeds {EXHAUSTIVE_LIMIT}")
    g = nx.Graph()
    g.add_nodes_from(range(graph.num_vertices))
    a, b = np.nonzero(np.triu(graph.adj, 1))
    g.add_edges_from(zip(a.tolist(), b.tolist()))
    return sorted(sorted(c) for c in nx.find_cliques(g))


def exhaustive_select(graph: CodingGraph, wstar=None, critical=None) -> list:
    """Maximal clique with the largest w* sum over critical users' vertices."""
    wstar = graph.weights if wstar is None else np.asarray(wstar, dtype=float)
    best, best_score = [], -np.inf
    for clique in maximal_cliques(graph):
        score = sum(wstar[a] for a in clique
                    if critical is None or int(graph.users[a]) in critical)
        if score > best_score:
            best, best_score = clique, score
    return best


# -- BPSO ---------------------------------------------------------------------

def bpso_inputs(ctx: DecisionContext):
    """Arrays for the layered objective: Wants, admissible, sig(phi), shift."""
    b = ctx.beliefs
    m, n = ctx.wants.shape
    layers = ctx.user_layers()
    active = ctx.wants.any(axis=1)
    h = int(layers[active].max()) if active.any() else 0
    shift = np.where(active, m * (h - layers), 0.0).astype(float)
    if not ctx.limited:
        phi = np.repeat(perfect_weights(b, np.arange(m))[:, None], n, axis=1)
    else:
        uu, pp = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
        phi = limited_weights(b, uu.ravel(), pp.ravel()).reshape(m, n)
        crit = np.zeros(m, dtype=bool)
        crit[list(ctx.critical())] = True
        phi = np.where(crit[:, None], phi, 0.0)
    return ctx.wants.astype(np.uint8), ctx.vertex_mask.astype(np.uint8), expit(phi), shift


def layered_objective(ctx: DecisionContext, position) -> float:
    x = np.asarray(position, dtype=np.uint8)[None, :]
    return float(kernels.bpso_scores(x, *bpso_inputs(ctx))[0])


def decode_position(ctx: DecisionContext, position) -> SelectionResult:
    x = np.asarray(position, dtype=bool)
    both = x[None, :] & ctx.wants
    targeted = {}
    for i in np.flatnonzero(both.sum(axis=1) == 1):
        j = int(np.flatnonzero(both[i])[0])
        if ctx.vertex_mask[i, j]:
            targeted[int(i)] = j
    return SelectionResult(tuple(int(j) for j in np.flatnonzero(x)), targeted)


def initial_swarm(params: BpsoParams, n: int, rng) -> np.ndarray:
    X = np.zeros((params.num_particles, n), dtype=bool)
    if params.sparse_init:
        X[np.arange(params.num_particles), np.arange(params.num_particles) % n] = True
    else:
        X[:] = rng.random(X.shape) < 0.5
    return X


def bpso_select(ctx: DecisionContext, params: BpsoParams, rng) -> SelectionResult:
    """Binary PSO over packet-inclusion bit vectors.

    Two velocities per bit push it towards 1 or 0; the one opposing the
    current bit, squashed by a sigmoid, is the flip probability. The swarm
    is evaluated ``num_iterations`` times (initial swarm included).
    """
    inputs = bpso_inputs(ctx)
    n = ctx.wants.shape[1]
    L = params.num_particles
    X = initial_swarm(params, n, rng)
    v1 = np.zeros((L, n))
    v0 = np.zeros((L, n))
    w = rng.uniform(*params.inertia_range)
    scores = kernels.bpso_scores(X.astype(np.uint8), *inputs)
    pbest, pscore = X.copy(), scores.copy()
    g = int(np.argmax(scores))
    gbest, gscore = X[g].copy(), float(scores[g])
    history = [gscore]
    for _ in range(params.num_iterations - 1):
        r1, r2 = rng.random(2)
        d1 = np.where(pbest, params.c1 * r1, -params.c1 * r1)
        d2 = np.where(gbest[None, :], params.c2 * r2, -params.c2 * r2)
        v1 = w * v1 + d1 + d2
        v0 = w * v0 - d1 - d2
        flip = rng.random((L, n)) < expit(np.where(X, v0, v1))
        X = X ^ flip
        scores = kernels.bpso_scores(X.astype(np.uint8), *inputs)
        better = scores > pscore
        pbest[better], pscore[better] = X[better], scores[better]
        g = int(np.argmax(pscore))
        if pscore[g] > gscore:
            gbest, gscore = pbest[g].copy(), float(pscore[g])
        history.append(gscore)
    if gscore <= 0.0:
        return SelectionResult(history=history)
    res = decode_position(ctx, gbest)
    res.score, res.history = gscore, history
    return res


# -- graph solvers ------------------------------------------------------------

def ddc_graph_select(ctx: DecisionContext) -> SelectionResult:
    """Layered greedy search with the delay-aware vertex weights."""
    if ctx.limited:
        graph = build_lgidnc(None, ctx.beliefs, ctx.vertex_mask)
        graph.weights = limited_weights(ctx.beliefs, graph.users, graph.packets)
    else:
        graph = build_gidnc(ctx.wants, ctx.vertex_mask)
        graph.weights = perfect_weights(ctx.beliefs, graph.users)
    partition_layers(graph, ctx.criticality)
    return result_from_clique(graph, multi_layer_select(graph))


class Baseline(str, enum.Enum):
    SSP_MIN_CT = "SSP_MinCT"
    SDD = "SDD"


def baseline_select(ctx: DecisionContext, policy) -> SelectionResult:
    """Layer-free greedy search with stand-in weights.

    SSP_MinCT weighs a vertex by |W_i| log(1/e_i), SDD by 1 - e_i. They
    approximate the cited baselines and are labelled as stand-ins.
    """
    policy = Baseline(policy)
    graph = build_gidnc(ctx.wants, ctx.vertex_mask)
    e = np.asarray(ctx.beliefs.e)[graph.users]
    if policy is Baseline.SSP_MIN_CT:
        counts = ctx.wants.sum(axis=1)[graph.users]
        graph.weights = counts * perfect_weights(ctx.beliefs, graph.users)
    else:
        graph.weights = 1.0 - e
    return result_from_clique(graph, greedy_layer_clique(graph))
