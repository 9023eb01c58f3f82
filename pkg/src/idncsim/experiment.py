"""Seeded experiment harness: configs, per-frame runs, sweeps, CSV and JSON.

Each frame draws fresh per-user erasure probabilities around the configured
mean and runs one session per solver. All solvers of a frame use the same
random streams, so their channel realizations coincide.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .gec import ChannelError, GecParams
from .protocol import BLIND_SOLVERS, BlindPolicy, FrameConfig
from .rng import MASK64, FrameStreams
from .session import SessionConfig
from .simulate import GuardExceeded, run_limited_session, run_perfect_session
from .solvers import BpsoParams, Solver

PROB_CAP = 0.99
SWEEP_AXES = ("M", "N", "P", "mu", "T_bpso")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    M: int = 20
    N: int = 30
    erasure_model: str = "memoryless"      # or "gec"
    P: float = 0.25
    p: float = 0.1
    q: float = 0.8
    mu: float = 0.2
    psi: float | None = None
    prob_bad: float = 0.25
    spread: float = 0.5
    solvers: tuple = ("DDC_Graph", "SSP")
    feedback: str = "perfect"               # or "limited"
    T_d: int = 4
    T_u: int = 2
    policy: str = "none"
    bpso_particles: int | None = None
    bpso_iterations: int = 30
    num_frames: int = 100
    seed: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.M < 1:
            raise ConfigError(f"M must be >= 1 (got {self.M})")
        if self.N < 1:
            raise ConfigError(f"N must be >= 1 (got {self.N})")
        if self.num_frames < 1:
            raise ConfigError("num_frames must be >= 1")
        if not 0 <= self.seed <= MASK64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.erasure_model not in ("memoryless", "gec"):
            raise ConfigError(f"erasure_model must be memoryless or gec (got {self.erasure_model})")
        if not 0.0 <= self.P < 1.0:
            raise ConfigError(f"P must lie in [0, 1) (got {self.P})")
        if not 0.0 <= self.spread <= 1.0:
            raise ConfigError("spread must lie in [0, 1]")
        if self.erasure_model == "gec":
            if not (0.0 <= self.p <= self.q <= 1.0):
                raise ConfigError(f"need 0 <= p <= q <= 1 (got p={self.p}, q={self.q})")
            for name in ("mu", "psi"):
                v = getattr(self, name)
                if v is not None and not 0.0 <= v < 1.0:
                    raise ConfigError(f"{name} must lie in [0, 1) (got {v})")
            if not 0.0 <= self.prob_bad <= 1.0:
                raise ConfigError("prob_bad must lie in [0, 1]")
        if self.feedback not in ("perfect", "limited"):
            raise ConfigError(f"feedback must be perfect or limited (got {self.feedback})")
        try:
            solvers = tuple(Solver(s) for s in self.solvers)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not solvers:
            raise ConfigError("at least one solver is required")
        if self.feedback == "perfect" and any(s in BLIND_SOLVERS for s in solvers):
            raise ConfigError("blind solvers need feedback = limited")
        if self.policy != "none":
            try:
                BlindPolicy(self.policy)
            except ValueError:
                raise ConfigError(f"unknown policy {self.policy}") from None
        if self.T_d < 1 or self.T_u < 1:
            raise ConfigError("T_d and T_u must be >= 1")
        if self.bpso_iterations < 1 or (self.bpso_particles is not None and self.bpso_particles < 1):
            raise ConfigError("BPSO needs at least one particle and one iteration")
        return self

    @property
    def frame_config(self) -> FrameConfig:
        return FrameConfig(T_d=self.T_d, T_u=self.T_u)

    @property
    def bpso(self) -> BpsoParams:
        return BpsoParams(num_particles=self.bpso_particles or self.N,
                          num_iterations=self.bpso_iterations)

    def canonical(self) -> str:
        return "\n".join(f"{k} = {_format_value(v)}"
                         for k, v in sorted(dataclasses.asdict(self).items()))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _format_value(v) -> str:
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    if v is None:
        return "none"
    return repr(v) if isinstance(v, float) else str(v)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if key == "solvers":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if raw.lower() == "none" and "None" in kind:
            return None
        if kind.startswith("int"):
            return int(raw, 0)
        if kind.startswith("float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse flat ``key = value`` lines (``#`` starts a comment)."""
    values = dataclasses.asdict(base or ExperimentConfig())
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "solver":
            key = "solvers"
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return ExperimentConfig(**values).validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config(text)


# -- channel draws ------------------------------------------------------------

def draw_channels(config: ExperimentConfig, rng) -> tuple[list, list]:
    """Per-user forward and backward GecParams for one frame.

    Each user's erasure probabilities are scaled by a factor drawn uniformly
    from ``1 +/- spread`` and capped at 0.99. Backward channels reuse the
    forward probabilities; only their realizations differ.
    """
    factor = rng.uniform(1.0 - config.spread, 1.0 + config.spread, size=config.M)
    fwd, bwd = [], []
    try:
        for k in factor:
            if config.erasure_model == "memoryless":
                e = float(np.clip(config.P * k, 0.0, PROB_CAP))
                fwd.append(GecParams.memoryless(e))
                bwd.append(GecParams.memoryless(e))
            else:
                p = float(np.clip(config.p * k, 0.0, PROB_CAP))
                q = float(np.clip(config.q * k, 0.0, PROB_CAP))
                psi = config.mu if config.psi is None else config.psi
                fwd.append(GecParams.from_memory(config.mu, config.prob_bad, p, q))
                bwd.append(GecParams.from_memory(psi, config.prob_bad, p, q))
    except ChannelError as exc:
        raise ConfigError(str(exc)) from None
    return fwd, bwd


# -- running ------------------------------------------------------------------

@dataclass
class FrameRecord:
    frame: int
    solver: str
    completion: int
    mean_delay: float
    transmissions: int
    slots: int
    delays: tuple
    guard_hit: bool = False


@dataclass
class RunStats:
    config_hash: str
    records: list = field(default_factory=list)

    def solvers(self) -> list:
        seen = []
        for r in self.records:
            if r.solver not in seen:
                seen.append(r.solver)
        return seen

    def summary(self) -> dict:
        out = {}
        for s in self.solvers():
            recs = sorted((r for r in self.records if r.solver == s), key=lambda r: r.frame)
            ct = np.array([r.completion for r in recs], dtype=float)
            dd = np.array([r.mean_delay for r in recs], dtype=float)
            out[s] = {
                "mean_ct": float(np.mean(ct)),
                "mean_dd": float(np.mean(dd)),
                "stderr_ct": _stderr(ct),
                "stderr_dd": _stderr(dd),
                "frames": len(recs),
                "guard_hits": sum(r.guard_hit for r in recs),
            }
        return out

    def per_frame(self, solver: str, attr: str = "completion") -> np.ndarray:
        recs = sorted((r for r in self.records if r.solver == solver), key=lambda r: r.frame)
        return np.array([getattr(r, attr) for r in recs], dtype=float)

    def to_json(self) -> str:
        return json.dumps({"config_hash": self.config_hash, "per_solver": self.summary()},
                          indent=2, sort_keys=True)

    def frames_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame", "solver", "completion", "mean_delay", "transmissions", "slots",
                    "guard_hit", "delays"])
        for r in self.records:
            w.writerow([r.frame, r.solver, r.completion, repr(r.mean_delay), r.transmissions,
                        r.slots, int(r.guard_hit), " ".join(map(str, r.delays))])
        return buf.getvalue()


def _stderr(x: np.ndarray) -> float:
    if len(x) < 2:
        return 0.0
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


def run_frame_session(config: ExperimentConfig, frame: int, solver, events=None, on_decision=None):
    """One frame (one full session) for one solver under the frame's streams."""
    streams = FrameStreams(config.seed, frame)
    fwd, bwd = draw_channels(config, streams.params)
    limited = config.feedback == "limited"
    scfg = SessionConfig(config.M, config.N, fwd, bwd if limited else None, limited=limited)
    solver = Solver(solver)
    if limited:
        policy = None if config.policy == "none" else BlindPolicy(config.policy)
        return run_limited_session(scfg, config.frame_config, solver, streams, policy,
                                   config.bpso, events=events, on_decision=on_decision)
    return run_perfect_session(scfg, solver, streams, config.bpso, events=events,
                               on_decision=on_decision)


def run_experiment(config: ExperimentConfig) -> RunStats:
    config.validate()
    stats = RunStats(config.config_hash())
    for frame in range(config.num_frames):
        for solver in config.solvers:
            try:
                res = run_frame_session(config, frame, solver)
                rec = FrameRecord(frame, Solver(solver).value, res.completion,
                                  float(np.mean(res.delay)), res.transmissions, res.slots,
                                  tuple(int(d) for d in res.delay))
            except GuardExceeded:
                rec = FrameRecord(frame, Solver(solver).value, -1, float("nan"), 0, 0, (), True)
            stats.records.append(rec)
    return stats


def sweep(config: ExperimentConfig, axis: str, values) -> list:
    """One experiment per axis value, all sharing the master seed."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    rows = []
    for v in values:
        if axis in ("M", "N"):
            cfg = dataclasses.replace(config, **{axis: int(v)})
        elif axis == "P":
            cfg = dataclasses.replace(config, P=float(v), erasure_model="memoryless")
        elif axis == "mu":
            cfg = dataclasses.replace(config, mu=float(v), erasure_model="gec")
        else:
            cfg = dataclasses.replace(config, bpso_iterations=int(v))
        stats = run_experiment(cfg.validate())
        for solver, agg in stats.summary().items():
            rows.append({"axis": axis, "value": v, "solver": solver, **agg})
    return rows


SWEEP_COLUMNS = ("axis", "value", "solver", "mean_ct", "mean_dd", "stderr_ct", "stderr_dd",
                 "frames", "guard_hits")


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in SWEEP_COLUMNS])
    return buf.getvalue()


def events_csv(events) -> str:
    buf = io.StringIO()
    cols = ["slot", "frame", "phase", "combination", "targeted", "outcomes", "delay_increments"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(events)
    return buf.getvalue()
