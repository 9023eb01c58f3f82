"""Independent oracles: Monte-Carlo channel frequencies and brute-force
enumeration of no-delay probabilities over maximal cliques.

These back the ``validate`` and ``oracle`` CLI commands and the tests.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .beliefs import BeliefTable, finish_probs
from .gec import GecParams, Observation, conditional_erasure_belief, feedback_loss_belief
from .graph import build_gidnc, build_lgidnc, limited_weights, perfect_weights
from .solvers import exhaustive_select, maximal_cliques


# -- Monte-Carlo channel oracle ----------------------------------------------

def mc_conditional_erasure(params: GecParams, observed_erased: bool, k: int, trials: int, rng,
                           chunk: int = 250_000):
    """Frequency of an erasure k slots after an observed outcome.

    Chains start in the stationary distribution; only chains whose first slot
    matches the observation are kept. Returns (frequency, stderr, kept).
    """
    hits = kept = 0
    done = 0
    pb = params.b / (params.g + params.b)
    while done < trials:
        n = min(chunk, trials - done)
        done += n
        bad = rng.random(n) < pb
        erased0 = rng.random(n) < np.where(bad, params.q, params.p)
        for _ in range(k):
            flip = rng.random(n) < np.where(bad, params.g, params.b)
            bad = bad ^ flip
        erased_k = rng.random(n) < np.where(bad, params.q, params.p)
        sel = erased0 == observed_erased
        kept += int(sel.sum())
        hits += int(erased_k[sel].sum())
    freq = hits / kept
    return freq, math.sqrt(max(freq * (1 - freq), 1e-300) / kept), kept


def random_gec(rng) -> GecParams:
    """A valid channel whose conditioning events are not rare."""
    mu = rng.uniform(0.0, 0.9)
    pb = rng.uniform(0.1, 0.9)
    p = rng.uniform(0.0, 0.4)
    q = rng.uniform(0.5, 1.0)
    return GecParams.from_memory(mu, pb, p, q)


@dataclass
class Check:
    name: str
    value: float
    expected: float
    tolerance: float
    ok: bool

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return (f"{status} {self.name}: got {self.value:.6f} expected {self.expected:.6f} "
                f"(tol {self.tolerance:.2e})")


def belief_validation(rng, n_params: int = 20, trials: int = 1_000_000, sigmas: float = 3.0):
    """Compare both belief formulas with Monte-Carlo frequencies."""
    checks = []
    for idx in range(n_params):
        params = random_gec(rng)
        k = int(rng.integers(1, 9))
        obs = bool(rng.integers(0, 2))
        exact = conditional_erasure_belief(params, Observation(int(obs)), k)
        freq, se, _ = mc_conditional_erasure(params, obs, k, trials, rng)
        checks.append(Check(f"erasure[{idx}] k={k} erased={obs}", freq, exact, sigmas * se,
                            abs(freq - exact) <= sigmas * se))
        k = int(rng.integers(1, 9))
        exact = feedback_loss_belief(params, k)
        freq, se, _ = mc_conditional_erasure(params, False, k, trials, rng)
        checks.append(Check(f"feedback[{idx}] k={k}", freq, exact, sigmas * se,
                            abs(freq - exact) <= sigmas * se))
    return checks


def closed_form_checks(rng, n_params: int = 20):
    """p = 0, q = 1: e = 1 - g sum mu^i after an erasure; f = b sum psi^i."""
    checks = []
    for idx in range(n_params):
        mu, pb = rng.uniform(0.0, 0.95), rng.uniform(0.05, 0.95)
        params = GecParams.from_memory(mu, pb, 0.0, 1.0)
        k = int(rng.integers(1, 30))
        s = sum(params.mu ** i for i in range(k))
        e = conditional_erasure_belief(params, Observation.ERASED, k)
        f = feedback_loss_belief(params, k)
        checks.append(Check(f"closed-form e[{idx}] k={k}", e, 1 - params.g * s, 1e-12,
                            abs(e - (1 - params.g * s)) <= 1e-12))
        checks.append(Check(f"closed-form f[{idx}] k={k}", f, params.b * s, 1e-12,
                            abs(f - params.b * s) <= 1e-12))
    return checks


# -- brute-force no-delay enumeration ------------------------------------------

def enumerate_no_delay(beliefs: BeliefTable, i: int, targeted: dict) -> float:
    """P(no decoding delay for user i) by enumerating its joint outcomes.

    Outcomes: the slot is erased or not, and each uncertain packet is still
    wanted or not (independently, with its innovative probability). Certain
    Wants are always wanted. A received slot delays the user unless it is
    finished or it is targeted with a packet it still wants.
    """
    e = float(beliefs.e[i])
    unc = [int(j) for j in np.flatnonzero(beliefs.uncertain[i] & beliefs.wants[i])]
    certain = bool((beliefs.wants[i] & ~beliefs.uncertain[i]).any())
    target = targeted.get(i)
    total = e
    for bits in itertools.product((False, True), repeat=len(unc)):
        prob = 1.0 - e
        still = dict(zip(unc, bits))
        for j, wanted in still.items():
            pn = float(beliefs.pn[i, j])
            prob *= pn if wanted else 1.0 - pn
        finished = not certain and not any(bits)
        if target is None:
            delayed = not finished
        else:
            target_wanted = still.get(target, True)
            delayed = not finished and not target_wanted
        if not delayed:
            total += prob
    return total


def enumerate_no_increase(beliefs: BeliefTable, critical, targeted: dict) -> float:
    out = 1.0
    for i in sorted(critical):
        out *= enumerate_no_delay(beliefs, i, targeted)
    return out


@dataclass
class OracleInstance:
    beliefs: BeliefTable
    critical: set
    limited: bool

    def graph(self):
        if self.limited:
            g = build_lgidnc(None, self.beliefs)
            g.weights = limited_weights(self.beliefs, g.users, g.packets)
        else:
            g = build_gidnc(self.beliefs.wants)
            g.weights = perfect_weights(self.beliefs, g.users)
        return g


def random_instance(rng, limited: bool, max_users: int = 8, max_packets: int = 5,
                    max_vertices: int = 12) -> OracleInstance:
    m = int(rng.integers(2, max_users + 1))
    n = int(rng.integers(2, max_packets + 1))
    wants = rng.random((m, n)) < 0.4
    wants[np.arange(m), rng.integers(0, n, size=m)] = True
    cells = np.argwhere(wants)
    if len(cells) > max_vertices:
        drop = rng.permutation(len(cells))[: len(cells) - max_vertices]
        for i, j in cells[drop]:
            if wants[i].sum() > 1:
                wants[i, j] = False
        while wants.sum() > max_vertices:
            i = int(np.argmax(wants.sum(axis=1)))
            wants[i, np.flatnonzero(wants[i])[-1]] = False
    active = np.flatnonzero(wants.any(axis=1))
    e = rng.uniform(0.05, 0.95, size=m)
    if limited:
        unc = wants & (rng.random((m, n)) < 0.5)
        pn = np.where(unc, rng.uniform(0.05, 0.95, size=(m, n)), wants.astype(float))
        beliefs = BeliefTable(e, np.zeros(m), pn, finish_probs(pn, wants), wants, unc)
    else:
        beliefs = BeliefTable.perfect(wants, e)
    k = int(rng.integers(1, len(active) + 1))
    critical = {int(i) for i in rng.choice(active, size=k, replace=False)}
    return OracleInstance(beliefs, critical, limited)


def optimality_check(inst: OracleInstance, tol: float = 1e-12):
    """(ok, attained, best): weight-argmax clique vs brute-force product max."""
    g = inst.graph()
    if g.num_vertices == 0:
        return True, 1.0, 1.0
    chosen = exhaustive_select(g, g.weights, inst.critical)

    def prob(clique):
        targeted = {int(g.users[a]): int(g.packets[a]) for a in clique}
        return enumerate_no_increase(inst.beliefs, inst.critical, targeted)

    best = max(prob(c) for c in maximal_cliques(g))
    attained = prob(chosen)
    return abs(attained - best) <= tol, attained, best
