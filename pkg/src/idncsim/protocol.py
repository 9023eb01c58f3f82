"""Frame-structured transmission and feedback for the limited-feedback mode.

A frame of ``T_f = T_d + T_u`` slots starts with ``T_d`` downlink slots in
which coded packets are sent without any feedback, followed by ``T_u``
uplink slots. User i owns uplink slot ``T_ui``. It reports its full
reception map and its decoding-delay count through its backward channel when
it received a packet aimed at it, when a reception altered its state, or
when it is polled.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .beliefs import compute_beliefs
from .gec import steady_state
from .session import HAS, UNCERTAIN, WANTS, Reception, _lossless, transmit
from .solvers import (
    Baseline,
    DecisionContext,
    SelectionResult,
    Solver,
    baseline_select,
    bpso_select,
    ddc_graph_select,
)


class Phase(enum.Enum):
    DOWNLINK = "downlink"
    UPLINK = "uplink"


class BlindPolicy(str, enum.Enum):
    PESSIMIST = "pessimist"
    OPTIMIST = "optimist"
    REALISTIC = "realistic"


BLIND_SOLVERS = {
    Solver.BLIND_NVE: BlindPolicy.PESSIMIST,
    Solver.BLIND_FVE: BlindPolicy.OPTIMIST,
    Solver.BLIND_SVE: BlindPolicy.REALISTIC,
}


@dataclass(frozen=True)
class FrameConfig:
    T_d: int = 1
    T_u: int = 1
    T_ui: tuple | None = None

    def __post_init__(self):
        if self.T_d < 1 or self.T_u < 1:
            raise ValueError("frames need at least one downlink and one uplink slot")
        if self.T_ui is not None and any(not 1 <= s <= self.T_u for s in self.T_ui):
            raise ValueError(f"uplink slot indices must lie in 1..{self.T_u}")

    @property
    def T_f(self) -> int:
        return self.T_d + self.T_u

    def uplink_index(self, user: int) -> int:
        if self.T_ui is not None:
            return self.T_ui[user]
        return user % self.T_u + 1


def feedback_slot(frame: int, config: FrameConfig, user: int) -> int:
    """Slot in which ``user`` sends feedback for frame ``frame`` (>= 1)."""
    if frame < 1:
        raise ValueError("frames are numbered from 1")
    return frame * config.T_f - config.T_u + config.uplink_index(user)


def enforce_once_attempted(session, combination, user: int, packet=None) -> bool:
    """True if attempting the user's packet keeps a once-attempted packet.

    Users with a single believed-wanted packet are exempt.
    """
    if packet is None:
        hits = [j for j in combination if session.fm[user, j] != HAS]
        if len(hits) != 1:
            return True
        packet = hits[0]
    return bool(once_attempted_mask(session)[user, packet])


def once_attempted_mask(session) -> np.ndarray:
    """Admissibility of every (user, packet) vertex under the constraint."""
    wants = session.believed_wants()
    ok = wants.copy()
    for i in np.flatnonzero(wants.sum(axis=1) > 1):
        counts = session.ledgers[i].attempt_counts()
        if not counts:
            continue
        ones = sum(1 for c in counts.values() if c == 1)
        for j in np.flatnonzero(wants[i]):
            c = counts.get(int(j), 0)
            ok[i, j] = c == 0 or ones - (c == 1) >= 1
        if not ok[i].any():
            # every wanted packet was attempted at least twice (an incidental
            # attempt broke the window); the constraint is unattainable, so
            # the user is exempt as in the single-packet case
            ok[i] = wants[i]
    return ok


def uncertain_classes(session, phase=None):
    """Split Uncertain entries into this-frame (downlink) and older (uplink)."""
    unc = session.uncertain()
    if phase is Phase.DOWNLINK:
        return unc, np.zeros_like(unc)
    if phase is Phase.UPLINK:
        return np.zeros_like(unc), unc
    down = np.zeros_like(unc)
    for i, led in enumerate(session.ledgers):
        for j in led.frame_marks:
            down[i, j] = unc[i, j]
    return down, unc & ~down


def blind_view(session, policy, rng=None, phase=None):
    """Return ``(removed, hidden)`` masks for the policy.

    ``removed`` entries are treated as Has everywhere; ``hidden`` entries lose
    their vertex but remain wanted in the edge conditions.
    """
    down, up = uncertain_classes(session, phase)
    removed = np.zeros_like(down)
    hidden = np.zeros_like(down)
    if policy is None:
        return removed, hidden
    policy = BlindPolicy(policy)
    if policy is BlindPolicy.PESSIMIST:
        hidden = down.copy()
    elif policy is BlindPolicy.OPTIMIST:
        wants = session.believed_wants()
        full = wants.any(axis=1) & ~(wants & ~session.uncertain()).any(axis=1)
        removed = down | (up & ~full[:, None])
    else:
        keep_fwd = np.array([steady_state(c)[1] for c in session.config.forward])
        keep_bwd = np.array([steady_state(c)[1] for c in session.config.backward])
        for mask, keep in ((down, keep_fwd), (up, keep_bwd)):
            idx = np.argwhere(mask)
            if len(idx):
                draws = rng.random(len(idx))
                drop = draws >= keep[idx[:, 0]]
                removed[idx[drop, 0], idx[drop, 1]] = True
    return removed, hidden


def limited_context(session, slot: int, policy=None, rng=None) -> DecisionContext:
    beliefs = compute_beliefs(session, slot)
    removed, hidden = blind_view(session, policy, rng)
    if removed.any():
        beliefs = beliefs.with_view(removed)
    mask = beliefs.wants & ~hidden & once_attempted_mask(session)
    return DecisionContext(beliefs, session.criticality(), mask, limited=True)


def ddc_limited_select(session, config: FrameConfig | None = None, policy=None, rng=None,
                       bpso=None) -> SelectionResult:
    """LG-IDNC layered search (or BPSO) on the policy view of the session."""
    if session.sender_complete():
        return SelectionResult()
    ctx = limited_context(session, session.slot, policy, rng)
    if bpso is not None:
        return bpso_select(ctx, bpso, rng)
    return ddc_graph_select(ctx)


def select_limited(session, solver, policy, rng, bpso=None) -> tuple:
    solver = Solver(solver)
    if solver in BLIND_SOLVERS:
        ctx = limited_context(session, session.slot, BLIND_SOLVERS[solver], rng)
        return ctx, baseline_select(ctx, Baseline.SSP_MIN_CT)
    ctx = limited_context(session, session.slot, policy, rng)
    if solver is Solver.DDC_GRAPH:
        return ctx, ddc_graph_select(ctx)
    if solver is Solver.DDC_BPSO:
        return ctx, bpso_select(ctx, bpso, rng)
    if solver is Solver.SSP:
        return ctx, baseline_select(ctx, Baseline.SSP_MIN_CT)
    return ctx, baseline_select(ctx, Baseline.SDD)


def hear_feedback(session, i: int, slot: int) -> None:
    """Apply a received reception map and delay count from user i."""
    led = session.ledgers[i]
    led.resolve(lambda j: not session.has_true[i, j])
    session.fm[i] = np.where(session.has_true[i], HAS, WANTS)
    led.decoding_delay = int(session.delay[i])
    led.last_feedback_time = slot
    led.last_feedback_frames = (led.last_feedback_frames[1], session.frame)


def infer_silence(session, i: int) -> None:
    """Lossless uplink and no report: nothing reached the user this frame."""
    led = session.ledgers[i]
    row = session.fm[i]
    row[row == UNCERTAIN] = WANTS
    led.resolve(lambda j: True)


def run_frame(session, config: FrameConfig, solver=Solver.DDC_GRAPH, policy=None, rng=None,
              bpso=None, events=None, on_decision=None):
    """Run one downlink/uplink frame; returns the transmissions sent."""
    session.frame += 1
    m = session.M
    changed = np.zeros(m, dtype=bool)
    poll = False
    sent = []
    for _ in range(config.T_d):
        fwd, _ = session.advance_slot()
        if session.sender_complete():
            _log(events, session, "downlink", None)
            continue
        ctx, sel = select_limited(session, solver, policy, rng, bpso)
        if on_decision is not None:
            on_decision(session, ctx, sel)
        if sel.empty:
            poll = True
            _log(events, session, "downlink", None)
            continue
        tx = transmit(session, sel.combination, sel.targeted, fwd)
        for i, outcome in tx.outcomes.items():
            # a targeted user that received acknowledges even if already done
            if outcome in (Reception.DECODED, Reception.NON_USEFUL) or \
                    (i in tx.targeted and not fwd[i]):
                changed[i] = True
        sent.append(tx)
        _log(events, session, "downlink", tx)
    if poll:
        changed |= session.uncertain().any(axis=1)
    order = sorted(range(m), key=config.uplink_index)
    for k in range(1, config.T_u + 1):
        _, bwd = session.advance_slot()
        for i in (u for u in order if config.uplink_index(u) == k):
            led = session.ledgers[i]
            cur = led.current(session.frame)
            if cur is not None:
                cur.feedback_slot = session.slot
            if changed[i] and not bwd[i]:
                hear_feedback(session, i, session.slot)
            elif not changed[i] and _lossless(session.config.backward[i]):
                infer_silence(session, i)
        _log(events, session, "uplink", None, bwd)
    for led in session.ledgers:
        led.frame_marks = set()
    return sent


def _log(events, session, phase, tx, bwd=None):
    if events is None:
        return
    events.append(event_row(session, phase, tx, bwd))


def event_row(session, phase, tx, bwd=None) -> dict:
    n = session.N
    if tx is None:
        bitmap = "0" * n
        targeted, outcomes, incs = "", "", ""
    else:
        kappa = set(tx.combination)
        bitmap = "".join("1" if j in kappa else "0" for j in range(n))
        targeted = " ".join(f"{u}:{p}" for u, p in sorted(tx.targeted.items()))
        outcomes = " ".join(tx.outcomes[u].value for u in range(session.M))
        incs = " ".join(str(tx.delay_increments[u]) for u in range(session.M))
    if bwd is not None:
        outcomes = " ".join("lost" if b else "ok" for b in bwd)
    return {"slot": session.slot, "frame": session.frame, "phase": phase,
            "combination": bitmap, "targeted": targeted, "outcomes": outcomes,
            "delay_increments": incs}
