"""Sender-side ground truth and belief for one IDNC recovery session.

The feedback matrix stores one of HAS / WANTS / UNCERTAIN per (user, packet).
Believed Wants is WANTS | UNCERTAIN. Ground truth (``has_true``) is kept
alongside it for the simulator; only the simulator reads it.

Time runs in slots. The initial (uncoded) phase occupies slots ``1-N .. 0``
and the recovery phase starts at slot 1. Completion times are counted in
recovery *transmissions*, which equals slots in perfect-feedback mode.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .gec import (
    LOSSLESS,
    ChannelBank,
    GecParams,
    Observation,
    average_erasure,
)

HAS, WANTS, UNCERTAIN = 0, 1, 2
_SYMBOL = {HAS: "0", WANTS: "1", UNCERTAIN: "x"}


class SaturatedChannel(ValueError):
    """Anticipated completion is undefined for alpha >= 1."""


class Reception(enum.Enum):
    IDLE = "idle"            # user already complete
    ERASED = "erased"
    DECODED = "decoded"
    NON_USEFUL = "non_useful"


@dataclass
class SessionConfig:
    num_users: int
    num_packets: int
    forward: list
    backward: list | None = None
    limited: bool = False

    def __post_init__(self):
        if self.num_users < 1 or self.num_packets < 1:
            raise ValueError("need at least one user and one packet")
        if len(self.forward) != self.num_users:
            raise ValueError("one forward GecParams per user required")
        if self.backward is None:
            self.backward = [LOSSLESS] * self.num_users
        if len(self.backward) != self.num_users:
            raise ValueError("one backward GecParams per user required")


@dataclass
class Opportunity:
    """Attempts made to one user within one frame, plus its uplink slot."""
    frame: int
    feedback_slot: int | None = None
    attempts: dict = field(default_factory=dict)   # packet -> [slots]

    def all_slots(self):
        return [s for slots in self.attempts.values() for s in slots]


@dataclass
class UserLedger:
    initial_wants: int
    alpha: float
    decoding_delay: int = 0
    # attempts since the last resolution; the last entry may be the open frame
    opportunities: list = field(default_factory=list)
    frame_marks: set = field(default_factory=set)
    last_feedback_time: int | None = None
    once_attempted_packet: int | None = None
    once_attempted_time: int | None = None
    anchor_erased: bool | None = None
    last_feedback_frames: tuple = (None, None)

    def open_opportunity(self, frame: int) -> Opportunity:
        if self.opportunities and self.opportunities[-1].frame == frame \
                and self.opportunities[-1].feedback_slot is None:
            return self.opportunities[-1]
        opp = Opportunity(frame)
        self.opportunities.append(opp)
        return opp

    def current(self, frame: int) -> Opportunity | None:
        if self.opportunities and self.opportunities[-1].feedback_slot is None \
                and self.opportunities[-1].frame == frame:
            return self.opportunities[-1]
        return None

    def past(self, frame: int):
        cur = self.current(frame)
        return [o for o in self.opportunities if o is not cur]

    def attempt_counts(self) -> dict:
        counts: dict = {}
        for opp in self.opportunities:
            for j, slots in opp.attempts.items():
                counts[j] = counts.get(j, 0) + len(slots)
        return counts

    def attempt_history(self) -> dict:
        """frame -> packet -> slots, for attempts since the last resolution."""
        hist: dict = {}
        for opp in self.opportunities:
            frame = hist.setdefault(opp.frame, {})
            for j, slots in opp.attempts.items():
                frame.setdefault(j, []).extend(slots)
        return hist

    def resolve(self, wanted_after) -> None:
        """Close the attempt window once every attempted packet is certain.

        The anchor moves to the most recent packet attempted exactly once in
        the window; if there is none the previous anchor is kept.
        """
        once: dict = {}
        for j, c in self.attempt_counts().items():
            if c == 1:
                once[j] = next(s for o in self.opportunities for s in o.attempts.get(j, []))
        if once:
            j0 = max(once, key=lambda j: once[j])
            self.once_attempted_packet = j0
            self.once_attempted_time = once[j0]
            self.anchor_erased = bool(wanted_after(j0))
        self.opportunities = []
        self.frame_marks = set()

    @property
    def anchor(self):
        if self.once_attempted_time is None:
            return None
        obs = Observation.ERASED if self.anchor_erased else Observation.RECEIVED
        return self.once_attempted_time, obs


@dataclass
class Transmission:
    slot: int
    index: int
    combination: tuple
    targeted: dict                      # user -> intended packet
    outcomes: dict = field(default_factory=dict)   # user -> Reception
    decoded: dict = field(default_factory=dict)    # user -> packet
    frame: int = 0

    @property
    def delay_increments(self) -> dict:
        return {i: int(o is Reception.NON_USEFUL) for i, o in self.outcomes.items()}


class Session:
    def __init__(self, config: SessionConfig, forward_rng, backward_rng=None):
        self.config = config
        m, n = config.num_users, config.num_packets
        self.M, self.N = m, n
        self.limited = config.limited
        self.has_true = np.zeros((m, n), dtype=bool)
        self.fm = np.full((m, n), WANTS, dtype=np.int8)
        self.delay = np.zeros(m, dtype=np.int64)
        self.erasures = np.zeros(m, dtype=np.int64)
        self.completion = np.full(m, -1, dtype=np.int64)
        self.initial_wants = np.zeros(m, dtype=np.int64)
        self.tx_count = 0
        self.slot = -n
        self.frame = 0
        self.forward = ChannelBank(config.forward, forward_rng)
        self.backward = ChannelBank(config.backward, backward_rng) if self.limited else None
        self.alpha = np.array([average_erasure(c) for c in config.forward])
        self.ledgers: list[UserLedger] = []
        self.log: list[Transmission] = []
        self.keep_log = False

    # -- views -----------------------------------------------------------
    def believed_wants(self) -> np.ndarray:
        return self.fm != HAS

    def uncertain(self) -> np.ndarray:
        return self.fm == UNCERTAIN

    def true_wants(self) -> np.ndarray:
        return ~self.has_true

    def active_users(self) -> np.ndarray:
        return self.believed_wants().any(axis=1)

    def sender_complete(self) -> bool:
        return not self.believed_wants().any()

    def truly_complete(self) -> bool:
        return bool(self.has_true.all())

    def advance_slot(self):
        self.slot += 1
        fwd = self.forward.step()
        bwd = self.backward.step() if self.backward is not None else None
        return fwd, bwd

    def criticality(self) -> "Criticality":
        comp = np.array([anticipated_completion(l) for l in self.ledgers])
        return Criticality(comp, self.alpha.copy(), self.active_users())

    def snapshot(self) -> str:
        return to_snapshot(self)


def _lossless(params: GecParams) -> bool:
    return params.p == 0.0 and params.q == 0.0


def run_initial_phase(config: SessionConfig, forward_rng, backward_rng=None) -> Session:
    """Send the N source packets uncoded and populate Has/Wants (and Uncertain)."""
    s = Session(config, forward_rng, backward_rng)
    m, n = s.M, s.N
    acked = np.zeros((m, n), dtype=bool)
    last_erased = np.zeros(m, dtype=bool)
    for j in range(n):
        fwd, bwd = s.advance_slot()
        received = ~fwd
        s.has_true[received, j] = True
        last_erased = fwd
        if s.limited:
            acked[:, j] = received & ~bwd
    s.initial_wants = (~s.has_true).sum(axis=1)
    s.completion[s.initial_wants == 0] = 0

    for i in range(m):
        led = UserLedger(initial_wants=0, alpha=float(s.alpha[i]))
        if not s.limited:
            s.fm[i] = np.where(s.has_true[i], HAS, WANTS)
            led.once_attempted_packet = n - 1
            led.once_attempted_time = 0
            led.anchor_erased = bool(last_erased[i])
        else:
            lossless = _lossless(config.backward[i])
            certain_slot = None
            for j in range(n):
                slot = j - n + 1
                if acked[i, j]:
                    s.fm[i, j] = HAS
                    led.last_feedback_time = slot
                    certain_slot = (j, slot, False)
                elif lossless:
                    s.fm[i, j] = WANTS
                    certain_slot = (j, slot, True)
                else:
                    s.fm[i, j] = UNCERTAIN
                    led.opportunities.append(
                        Opportunity(frame=0, feedback_slot=slot, attempts={j: [slot]}))
            if certain_slot is not None:
                j, slot, erased = certain_slot
                led.once_attempted_packet, led.once_attempted_time = j, slot
                led.anchor_erased = erased
            if led.last_feedback_time is not None:
                led.last_feedback_frames = (None, 0)
        led.initial_wants = int((s.fm[i] != HAS).sum())
        s.ledgers.append(led)
    return s


def transmit(session: Session, combination, targeted: dict, erased: np.ndarray) -> Transmission:
    """Apply one coded transmission whose per-user erasures are already sampled.

    Users that find the combination instantly decodable under the sender's
    belief are added to the targeted set with their unique wanted packet.
    """
    kappa = tuple(sorted(int(j) for j in combination))
    session.tx_count += 1
    tx = Transmission(slot=session.slot, index=session.tx_count, combination=kappa,
                      targeted=dict(targeted), frame=session.frame)
    if kappa:
        bw = session.believed_wants()[:, list(kappa)]
        for i in np.flatnonzero(bw.sum(axis=1) == 1):
            i = int(i)
            if i not in tx.targeted:
                tx.targeted[i] = kappa[int(np.flatnonzero(bw[i])[0])]
        tw = session.true_wants()[:, list(kappa)]
    for i in range(session.M):
        if session.completion[i] >= 0:
            tx.outcomes[i] = Reception.IDLE
        elif erased[i]:
            tx.outcomes[i] = Reception.ERASED
        else:
            hits = np.flatnonzero(tw[i]) if kappa else ()
            if len(hits) == 1:
                tx.outcomes[i] = Reception.DECODED
                tx.decoded[i] = kappa[int(hits[0])]
            else:
                tx.outcomes[i] = Reception.NON_USEFUL
    record_transmission(session, tx)
    return tx


def record_transmission(session: Session, tx: Transmission) -> Session:
    for i, outcome in tx.outcomes.items():
        if outcome is Reception.ERASED:
            session.erasures[i] += 1
        elif outcome is Reception.NON_USEFUL:
            session.delay[i] += 1
        elif outcome is Reception.DECODED:
            session.has_true[i, tx.decoded[i]] = True
            if session.has_true[i].all():
                session.completion[i] = tx.index

    for i, j in tx.targeted.items():
        opp = session.ledgers[i].open_opportunity(session.frame)
        opp.attempts.setdefault(j, []).append(tx.slot)

    if not session.limited:
        session.fm = np.where(session.has_true, HAS, WANTS).astype(np.int8)
        for i, led in enumerate(session.ledgers):
            led.decoding_delay = int(session.delay[i])
            if i in tx.targeted:
                led.resolve(lambda j, i=i: not session.has_true[i, j])
    else:
        _mark_uncertain(session, tx)
    if session.keep_log:
        session.log.append(tx)
    return session


def _mark_uncertain(session: Session, tx: Transmission) -> None:
    # any certain-wanted packet the user could have decoded becomes Uncertain
    kappa = list(tx.combination)
    if not kappa:
        return
    sub = session.fm[:, kappa]
    for i in range(session.M):
        row = sub[i]
        wanted = np.flatnonzero(row == WANTS)
        if len(wanted) == 1:
            j = kappa[int(wanted[0])]
            session.fm[i, j] = UNCERTAIN
            session.ledgers[i].frame_marks.add(j)
    for i, j in tx.targeted.items():
        session.ledgers[i].frame_marks.add(j)


# -- completion-time expressions ------------------------------------------

def anticipated_completion(ledger: UserLedger, at_time=None) -> float:
    """(|W(0)| + D - alpha) / (1 - alpha); zero for users that wanted nothing."""
    if ledger.initial_wants == 0:
        return 0.0
    if ledger.alpha >= 1.0:
        raise SaturatedChannel(f"alpha={ledger.alpha} >= 1")
    return (ledger.initial_wants + ledger.decoding_delay - ledger.alpha) / (1.0 - ledger.alpha)


def overall_completion(state) -> float:
    ledgers = state.ledgers if isinstance(state, Session) else state
    return max((anticipated_completion(l) for l in ledgers), default=0.0)


@dataclass
class Criticality:
    """Anticipated completion per user and the derived critical layering."""
    completion: np.ndarray
    alpha: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        idx = np.flatnonzero(self.active)
        # np.argmax returns the first maximum: lowest index wins ties
        self.argmax_user = int(idx[np.argmax(self.completion[idx])]) if len(idx) else None
        self.max_completion = (float(self.completion[self.argmax_user])
                               if self.argmax_user is not None else 0.0)

    def exceeds(self, i: int, n: int) -> bool:
        return self.completion[i] + n / (1.0 - self.alpha[i]) > self.max_completion

    def layer_of(self, i: int) -> int:
        """Smallest n >= 1 with C_i + n/(1-a_i) > C_j (then n-1 fails it)."""
        gap = (self.max_completion - self.completion[i]) * (1.0 - self.alpha[i])
        n = max(1, int(math.floor(gap)) + 1)
        while not self.exceeds(i, n):
            n += 1
        while n > 1 and self.exceeds(i, n - 1):
            n -= 1
        return n

    def critical_set(self) -> set:
        if self.argmax_user is None:
            return set()
        return {int(i) for i in np.flatnonzero(self.active) if self.exceeds(int(i), 1)}


def critical_set(state) -> set:
    crit = state.criticality() if isinstance(state, Session) else state
    return crit.critical_set()


# -- snapshot text format --------------------------------------------------

def to_snapshot(session: Session) -> str:
    """One row per user: index, sender-side D, Has/Wants/Uncertain bitmaps."""
    lines = [f"# idncsim-snapshot M={session.M} N={session.N} slot={session.slot}",
             "user D has wants uncertain"]
    for i in range(session.M):
        row = session.fm[i]
        has = "".join("1" if v == HAS else "0" for v in row)
        wants = "".join("0" if v == HAS else "1" for v in row)
        unc = "".join("1" if v == UNCERTAIN else "0" for v in row)
        lines.append(f"{i} {session.ledgers[i].decoding_delay} {has} {wants} {unc}")
    return "\n".join(lines) + "\n"


def parse_snapshot(text: str) -> dict:
    rows = [l.split() for l in text.splitlines() if l and not l.startswith("#")]
    header, body = rows[0], rows[1:]
    if header != ["user", "D", "has", "wants", "uncertain"]:
        raise ValueError(f"unexpected snapshot header {header}")
    fm, delays = [], []
    for user, d, has, wants, unc in body:
        if any(h == w for h, w in zip(has, wants)):
            raise ValueError(f"user {user}: Has and Wants must partition the packets")
        fm.append([UNCERTAIN if u == "1" else (WANTS if w == "1" else HAS)
                   for w, u in zip(wants, unc)])
        delays.append(int(d))
    return {"fm": np.array(fm, dtype=np.int8), "delay": np.array(delays)}


def session_from_matrices(has, fm=None, forward=None, backward=None, delay=None,
                          limited=False, rng=None) -> Session:
    """Build a session directly from Has (truth) and feedback matrices.

    Intended for tests and small experiments: the initial Wants count is
    taken from the believed Wants and every user starts without an anchor.
    """
    has = np.asarray(has, dtype=bool)
    m, n = has.shape
    forward = forward or [GecParams.memoryless(0.25)] * m
    cfg = SessionConfig(m, n, list(forward), backward, limited=limited)
    rng = rng if rng is not None else np.random.Generator(np.random.Philox(key=0))
    s = Session(cfg, rng, rng if limited else None)
    s.has_true = has.copy()
    s.fm = (np.where(has, HAS, WANTS) if fm is None else np.asarray(fm)).astype(np.int8)
    delay = np.zeros(m, dtype=np.int64) if delay is None else np.asarray(delay, dtype=np.int64)
    s.delay = delay.copy()
    s.initial_wants = (~has).sum(axis=1)
    s.completion = np.where(has.all(axis=1), 0, -1)
    s.slot = 0
    for i in range(m):
        s.ledgers.append(UserLedger(initial_wants=int((s.fm[i] != HAS).sum()),
                                    alpha=float(s.alpha[i]), decoding_delay=int(delay[i])))
    return s
