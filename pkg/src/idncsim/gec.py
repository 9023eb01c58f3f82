"""Two-state Gilbert-Elliott erasure channel: sampling and belief calculus.

A channel is Good or Bad; slot ``t`` is erased with probability ``p`` (Good)
or ``q`` (Bad) using the state at ``t``, after which the state advances with
``P(B->G) = g`` and ``P(G->B) = b``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-12


class ChannelError(ValueError):
    pass


class DegenerateChain(ChannelError):
    """Raised when g = b = 0 (no unique stationary distribution)."""


class ImpossibleObservation(ChannelError):
    """Raised when conditioning on an observation of probability zero."""


class ChannelState(enum.IntEnum):
    GOOD = 0
    BAD = 1


class Observation(enum.IntEnum):
    RECEIVED = 0
    ERASED = 1


@dataclass(frozen=True)
class GecParams:
    g: float
    b: float
    p: float
    q: float

    def __post_init__(self):
        for name in ("g", "b", "p", "q"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ChannelError(f"{name}={v} outside [0, 1]")
        if self.g + self.b > 1.0 + 1e-15:
            raise ChannelError(
                f"memory factor 1-g-b = {1 - self.g - self.b:.6g} is negative")
        if self.p > self.q:
            raise ChannelError(f"p={self.p} exceeds q={self.q}")

    @classmethod
    def from_memory(cls, mu: float, prob_bad: float, p: float, q: float) -> "GecParams":
        """Solve g, b from the memory factor and the stationary Bad probability."""
        if not (0.0 <= mu < 1.0):
            raise ChannelError(f"memory factor mu={mu} must lie in [0, 1)")
        if not (0.0 <= prob_bad <= 1.0):
            raise ChannelError(f"stationary Bad probability {prob_bad} outside [0, 1]")
        return cls(g=(1.0 - mu) * (1.0 - prob_bad), b=(1.0 - mu) * prob_bad, p=p, q=q)

    @classmethod
    def memoryless(cls, erasure: float) -> "GecParams":
        """Bernoulli(erasure) channel expressed as a GEC with mu = 0."""
        return cls(g=1.0 - erasure, b=erasure, p=0.0, q=1.0)

    @property
    def mu(self) -> float:
        return memory_factor(self)

    @property
    def alpha(self) -> float:
        return average_erasure(self)


LOSSLESS = GecParams(g=1.0, b=0.0, p=0.0, q=0.0)


@dataclass(frozen=True)
class SlotOutcome:
    erased: bool
    new_state: ChannelState


def clamp_prob(x):
    """Clamp into [1e-12, 1 - 1e-12]; works on scalars and arrays."""
    if isinstance(x, np.ndarray):
        return np.clip(x, PROB_FLOOR, 1.0 - PROB_FLOOR)
    return min(max(float(x), PROB_FLOOR), 1.0 - PROB_FLOOR)


def steady_state(params: GecParams) -> tuple[float, float]:
    s = params.g + params.b
    if s <= 0.0:
        raise DegenerateChain("g = b = 0: stationary distribution is not unique")
    return params.g / s, params.b / s


def memory_factor(params: GecParams) -> float:
    return 1.0 - params.g - params.b


def average_erasure(params: GecParams) -> float:
    pg, pb = steady_state(params)
    return pg * params.p + pb * params.q


def sample_stationary(params: GecParams, rng) -> ChannelState:
    _, pb = steady_state(params)
    return ChannelState.BAD if rng.random() < pb else ChannelState.GOOD


def sample_slot(params: GecParams, state: ChannelState, rng) -> SlotOutcome:
    """Erasure drawn from the current state, then one Markov transition."""
    u_erase, u_move = rng.random(2)
    if state == ChannelState.GOOD:
        erased = u_erase < params.p
        new_state = ChannelState.BAD if u_move < params.b else ChannelState.GOOD
    else:
        erased = u_erase < params.q
        new_state = ChannelState.GOOD if u_move < params.g else ChannelState.BAD
    return SlotOutcome(bool(erased), new_state)


def _geometric_sum(mu: float, k: int, rate: float) -> float:
    # sum_{i<k} mu^i in closed form; rate = g + b = 1 - mu
    if k <= 0:
        return 0.0
    if rate <= 0.0:
        return float(k)
    return (1.0 - mu ** k) / rate


def k_step_transition(params: GecParams, src: ChannelState, dst: ChannelState, k: int) -> float:
    """P(C(n0 + k) = dst | C(n0) = src)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    rate = params.g + params.b
    move = params.b if src == ChannelState.GOOD else params.g
    switched = move * _geometric_sum(1.0 - rate, k, rate)
    return switched if src != dst else 1.0 - switched


def posterior_state(params: GecParams, observed_erased: bool) -> tuple[float, float]:
    """Bayes posterior of the state at the slot whose erasure was observed."""
    pg, pb = steady_state(params)
    if observed_erased:
        lg, lb = params.p * pg, params.q * pb
    else:
        lg, lb = (1.0 - params.p) * pg, (1.0 - params.q) * pb
    z = lg + lb
    if z <= 0.0:
        obs = "erasure" if observed_erased else "reception"
        raise ImpossibleObservation(f"{obs} has zero probability under {params}")
    return lg / z, lb / z


def conditional_erasure_belief(params: GecParams, last_observation, elapsed: int) -> float:
    """P(slot n0 + elapsed erased | erasure outcome observed at n0)."""
    if elapsed < 1:
        raise ValueError("elapsed must be >= 1")
    erased = Observation(last_observation) == Observation.ERASED
    post_g, post_b = posterior_state(params, erased)
    rate = params.g + params.b
    s = _geometric_sum(1.0 - rate, elapsed, rate)
    from_good = params.p + (params.q - params.p) * params.b * s
    from_bad = params.q + (params.p - params.q) * params.g * s
    return post_g * from_good + post_b * from_bad


def feedback_loss_belief(params_backward: GecParams, elapsed_since_last_success: int) -> float:
    return conditional_erasure_belief(params_backward, Observation.RECEIVED,
                                      elapsed_since_last_success)


def erasure_belief_array(g, b, p, q, erased, elapsed):
    """Vectorized conditional_erasure_belief over users (requires g + b > 0).

    Entries whose observation is impossible fall back to the average erasure.
    """
    g, b, p, q = (np.asarray(x, dtype=float) for x in (g, b, p, q))
    erased = np.asarray(erased, dtype=bool)
    rate = g + b
    pg, pb = g / rate, b / rate
    lg = np.where(erased, p, 1.0 - p) * pg
    lb = np.where(erased, q, 1.0 - q) * pb
    z = lg + lb
    safe = np.where(z > 0.0, z, 1.0)
    post_g = np.where(z > 0.0, lg / safe, pg)
    post_b = np.where(z > 0.0, lb / safe, pb)
    k = np.maximum(np.asarray(elapsed), 1)
    s = (1.0 - (1.0 - rate) ** k) / rate
    return post_g * (p + (q - p) * b * s) + post_b * (q + (p - q) * g * s)


class ChannelBank:
    """Independent GEC realizations for a group of users, stepped together.

    Every call to :meth:`step` consumes exactly two uniforms per user so that
    realizations depend only on the slot count, never on who transmitted.
    """

    def __init__(self, params: list[GecParams], rng):
        self.params = list(params)
        self.rng = rng
        self.g = np.array([c.g for c in params])
        self.b = np.array([c.b for c in params])
        self.p = np.array([c.p for c in params])
        self.q = np.array([c.q for c in params])
        pb = np.array([steady_state(c)[1] if c.g + c.b > 0 else 0.0 for c in params])
        self.state = (rng.random(len(params)) < pb).astype(np.int8)

    def step(self) -> np.ndarray:
        u = self.rng.random((len(self.params), 2))
        bad = self.state == ChannelState.BAD
        erased = u[:, 0] < np.where(bad, self.q, self.p)
        flip = u[:, 1] < np.where(bad, self.g, self.b)
        self.state = np.where(flip, 1 - self.state, self.state).astype(np.int8)
        return erased
