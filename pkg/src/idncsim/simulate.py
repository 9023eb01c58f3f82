"""Run one recovery session end to end in either feedback mode."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beliefs import compute_beliefs
from .protocol import BLIND_SOLVERS, FrameConfig, event_row, run_frame
from .session import SessionConfig, run_initial_phase, transmit
from .solvers import (
    Baseline,
    BpsoParams,
    DecisionContext,
    Solver,
    baseline_select,
    bpso_select,
    ddc_graph_select,
)


class GuardExceeded(RuntimeError):
    """A session ran past its slot budget without completing."""


@dataclass
class SessionResult:
    completion: int
    user_completion: np.ndarray
    delay: np.ndarray
    erasures: np.ndarray
    initial_wants: np.ndarray
    alpha: np.ndarray
    transmissions: int
    slots: int
    events: list = field(default_factory=list)

    def anticipated(self) -> np.ndarray:
        """(|W(0)| + D - alpha)/(1 - alpha) per user with the realized D."""
        out = (self.initial_wants + self.delay - self.alpha) / (1.0 - self.alpha)
        return np.where(self.initial_wants > 0, out, 0.0)


def perfect_context(session, slot: int) -> DecisionContext:
    beliefs = compute_beliefs(session, slot)
    return DecisionContext(beliefs, session.criticality(), session.believed_wants())


def select_perfect(ctx: DecisionContext, solver, bpso: BpsoParams | None, rng):
    solver = Solver(solver)
    if solver is Solver.DDC_GRAPH:
        return ddc_graph_select(ctx)
    if solver is Solver.DDC_BPSO:
        return bpso_select(ctx, bpso or BpsoParams(), rng)
    if solver is Solver.SDD:
        return baseline_select(ctx, Baseline.SDD)
    if solver in BLIND_SOLVERS:
        raise ValueError(f"{solver.value} needs the limited-feedback mode")
    return baseline_select(ctx, Baseline.SSP_MIN_CT)


def _result(session, events) -> SessionResult:
    return SessionResult(
        completion=int(session.completion.max()) if session.M else 0,
        user_completion=session.completion.copy(),
        delay=session.delay.copy(),
        erasures=session.erasures.copy(),
        initial_wants=session.initial_wants.copy(),
        alpha=session.alpha.copy(),
        transmissions=session.tx_count,
        slots=session.slot,
        events=events if events is not None else [],
    )


def run_perfect_session(config: SessionConfig, solver, streams, bpso=None, guard=None,
                        events=None, on_decision=None) -> SessionResult:
    """Perfect feedback: the sender sees every outcome before the next slot."""
    session = run_initial_phase(config, streams.forward)
    guard = guard or 50 * config.num_packets
    while not session.sender_complete():
        erased, _ = session.advance_slot()
        if session.slot > guard:
            raise GuardExceeded(f"session not complete after {guard} slots")
        ctx = perfect_context(session, session.slot)
        sel = select_perfect(ctx, solver, bpso, streams.solver)
        if on_decision is not None:
            on_decision(session, ctx, sel)
        if sel.empty:
            raise GuardExceeded("no transmittable combination while users still want packets")
        tx = transmit(session, sel.combination, sel.targeted, erased)
        if events is not None:
            events.append(event_row(session, "recovery", tx))
    return _result(session, events)


def run_limited_session(config: SessionConfig, frame: FrameConfig, solver, streams,
                        policy=None, bpso=None, guard=None, events=None,
                        on_decision=None) -> SessionResult:
    """Limited feedback: frames of downlink transmissions then uplink reports."""
    session = run_initial_phase(config, streams.forward, streams.backward)
    guard = guard or 50 * config.num_packets * frame.T_f
    while not session.sender_complete():
        if session.slot > guard:
            raise GuardExceeded(f"session not complete after {guard} slots")
        run_frame(session, frame, solver, policy, streams.solver, bpso or BpsoParams(),
                  events, on_decision)
    return _result(session, events)
