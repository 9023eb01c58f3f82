"""Sender-side belief calculus for limited feedback.

Erasure beliefs e_i come from the last certain observation of user i's forward
channel; feedback-loss beliefs f_i from its last heard feedback. The
innovative probability of an uncertain packet multiplies, over the attempts
made since the last heard feedback, the chance that every attempt was erased,
corrected for frames whose feedback might simply have been lost.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gec import (
    ImpossibleObservation,
    Observation,
    average_erasure,
    clamp_prob,
    conditional_erasure_belief,
    erasure_belief_array,
    feedback_loss_belief,
)


class NotApplicable(ValueError):
    """Decoding delay is undefined for a user with an empty Wants set."""


@dataclass
class BeliefTable:
    e: np.ndarray            # (M,) erasure belief at the decision slot
    f: np.ndarray            # (M,) feedback-loss belief at the decision slot
    pn: np.ndarray           # (M, N) innovative probability (0 for Has)
    pf: np.ndarray           # (M,) finish probability
    wants: np.ndarray        # (M, N) believed Wants (certain or uncertain)
    uncertain: np.ndarray    # (M, N)

    @property
    def full_uncertain(self) -> np.ndarray:
        """Users whose every remaining wanted packet is uncertain (set F)."""
        active = self.wants.any(axis=1)
        return active & ~(self.wants & ~self.uncertain).any(axis=1)

    @classmethod
    def perfect(cls, wants, e) -> "BeliefTable":
        wants = np.asarray(wants, dtype=bool)
        m = wants.shape[0]
        pn = wants.astype(float)
        pf = np.where(wants.any(axis=1), 0.0, 1.0)
        return cls(clamp_prob(np.asarray(e, dtype=float)), np.zeros(m), pn, pf,
                   wants, np.zeros_like(wants))

    def with_view(self, pn_removed) -> "BeliefTable":
        """Copy with the given (user, packet) entries treated as Has."""
        pn = np.where(pn_removed, 0.0, self.pn)
        return BeliefTable(self.e, self.f, pn, finish_probs(pn, self.wants & ~pn_removed),
                           self.wants & ~pn_removed, self.uncertain & ~pn_removed)


def _anchored_belief(params, anchor, slot: int) -> float:
    if anchor is None:
        return average_erasure(params)
    t0, obs = anchor
    k = max(1, abs(slot - t0))
    try:
        return conditional_erasure_belief(params, obs, k)
    except ImpossibleObservation:
        return average_erasure(params)


def erasure_belief(session, i: int, slot: int) -> float:
    """e_i at ``slot`` from the user's once-attempted anchor (clamped).

    Past slots use the distance to the anchor; a stationary two-state chain
    is reversible, so the same expression holds backwards in time.
    """
    led = session.ledgers[i]
    return clamp_prob(_anchored_belief(session.config.forward[i], led.anchor, slot))


def current_erasure_beliefs(session, slot: int, active) -> np.ndarray:
    """erasure_belief for every active user at once (1.0 for inactive users)."""
    bank = session.forward
    t0 = np.array([l.once_attempted_time if l.once_attempted_time is not None else slot
                   for l in session.ledgers])
    erased = np.array([bool(l.anchor_erased) for l in session.ledgers])
    e = erasure_belief_array(bank.g, bank.b, bank.p, bank.q, erased, np.abs(slot - t0))
    no_anchor = np.array([l.once_attempted_time is None for l in session.ledgers])
    e = np.where(no_anchor, session.alpha, e)
    return np.where(active, clamp_prob(e), 1.0)


def feedback_belief(session, i: int, slot: int) -> float:
    params = session.config.backward[i]
    t_star = session.ledgers[i].last_feedback_time
    if t_star is None or t_star >= slot:
        return clamp_prob(average_erasure(params))
    return clamp_prob(feedback_loss_belief(params, slot - t_star))


def innovative_prob(session, i: int, j: int, slot: int, e_at=None, f_at=None) -> float:
    """Probability that uncertain packet j is still wanted by user i."""
    if session.fm[i, j] == 0:
        return 0.0
    if session.fm[i, j] == 1:
        return 1.0
    e_at = e_at or (lambda s: erasure_belief(session, i, s))
    f_at = f_at or (lambda s: feedback_belief(session, i, s))
    led = session.ledgers[i]
    value = 1.0
    cur = led.current(session.frame)
    if cur is not None:
        for s in cur.attempts.get(j, ()):
            value *= e_at(s)
    for opp in led.past(session.frame):
        if j not in opp.attempts:
            continue
        value *= past_frame_factor(
            [e_at(s) for s in opp.attempts[j]],
            [e_at(s) for k, slots in opp.attempts.items() if k != j for s in slots],
            f_at(opp.feedback_slot) if opp.feedback_slot is not None else 0.0,
        )
    return value


def past_frame_factor(e_packet, e_others, f: float) -> float:
    """P(packet still wanted | no feedback heard) for one past frame.

    ``A`` is the chance every attempt of the frame was erased, ``B`` the chance
    every attempt of this packet was, ``C`` the same for the other packets.
    """
    b = float(np.prod(e_packet)) if len(e_packet) else 1.0
    c = float(np.prod(e_others)) if len(e_others) else 1.0
    a = b * c
    den = a + (1.0 - a) * f
    if den <= 0.0:
        return 0.0
    return (a + b * (1.0 - c) * f) / den


def finish_probs(pn: np.ndarray, wants: np.ndarray) -> np.ndarray:
    return np.prod(np.where(wants, 1.0 - pn, 1.0), axis=1)


def finish_prob(beliefs: BeliefTable, i: int, slot=None) -> float:
    return float(np.prod(1.0 - beliefs.pn[i][beliefs.wants[i]]))


def compute_beliefs(session, slot: int) -> BeliefTable:
    m = session.M
    wants = session.believed_wants()
    unc = session.uncertain()
    active = wants.any(axis=1)
    e = current_erasure_beliefs(session, slot, active)
    if not session.limited:
        return BeliefTable.perfect(wants, e)
    f = np.array([feedback_belief(session, i, slot) for i in range(m)])
    pn = wants.astype(float)
    for i in np.flatnonzero(unc.any(axis=1)):
        i = int(i)
        cache_e, cache_f = {}, {}

        def e_at(s, i=i, cache=cache_e):
            if s not in cache:
                cache[s] = erasure_belief(session, i, s)
            return cache[s]

        def f_at(s, i=i, cache=cache_f):
            if s not in cache:
                cache[s] = feedback_belief(session, i, s)
            return cache[s]

        for j in np.flatnonzero(unc[i]):
            pn[i, j] = innovative_prob(session, i, int(j), slot, e_at, f_at)
    return BeliefTable(e, f, pn, finish_probs(pn, wants), wants, unc)


# -- no-delay probabilities -------------------------------------------------

def no_delay_prob(beliefs: BeliefTable, i: int, targeted: dict, slot=None) -> float:
    """P(user i suffers no decoding delay) under the five-case table.

    ``targeted`` maps each targeted user to its intended packet.
    """
    if not beliefs.wants[i].any():
        raise NotApplicable(f"user {i} has an empty Wants set")
    e = float(beliefs.e[i])
    pf = float(beliefs.pf[i])
    in_f = bool(beliefs.full_uncertain[i])
    if i not in targeted:
        return e + pf - e * pf if in_f else e
    j = targeted[i]
    if not beliefs.uncertain[i, j]:
        return 1.0
    pn = float(beliefs.pn[i, j])
    if in_f:
        return e + (1.0 - e) * (pn + pf)
    return e + pn - e * pn


def clique_no_increase_prob(beliefs: BeliefTable, critical, targeted: dict) -> float:
    """Product of no-delay probabilities over the critical set."""
    out = 1.0
    for i in sorted(critical):
        out *= no_delay_prob(beliefs, i, targeted)
    return out


def clique_no_increase_simplified(beliefs: BeliefTable, critical, targeted: dict) -> float:
    """Two-term form using p_f = 0 for users outside F."""
    out = 1.0
    for i in sorted(critical):
        e, pf = float(beliefs.e[i]), float(beliefs.pf[i])
        if i not in targeted:
            out *= e + pf - e * pf
        elif beliefs.uncertain[i, targeted[i]]:
            out *= e + (1.0 - e) * (float(beliefs.pn[i, targeted[i]]) + pf)
    return out
