"""Command-line interface: ``run``, ``sweep``, ``validate`` and ``oracle``.

Exit codes: 0 on success, 1 for configuration or usage errors, 2 when a
validation check or internal assertion fails.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import experiment as ex
from . import oracles
from .graph import build_gidnc, build_lgidnc
from .beliefs import BeliefTable


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--frames", type=int, help="number of frames (overrides the config)")
    p.add_argument("--out", help="write the CSV table here")
    p.add_argument("--json", action="store_true", help="print a JSON summary on stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="idncsim", description="IDNC completion-time simulator")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    run = sub.add_parser("run", help="run one configuration")
    _common(run)
    run.add_argument("--events", help="write the per-slot event log of frame 0 here")

    sw = sub.add_parser("sweep", help="sweep one axis")
    _common(sw)
    sw.add_argument("--axis", required=True, choices=ex.SWEEP_AXES)
    sw.add_argument("--values", required=True, help="comma-separated axis values")

    val = sub.add_parser("validate", help="Monte-Carlo validation of the channel beliefs")
    val.add_argument("--seed", type=int, default=7)
    val.add_argument("--trials", type=int, default=1_000_000)
    val.add_argument("--channels", type=int, default=20)

    orc = sub.add_parser("oracle", help="brute-force optimality and graph checks")
    orc.add_argument("--seed", type=int, default=11)
    orc.add_argument("--instances", type=int, default=200)
    return parser


def _load(args) -> ex.ExperimentConfig:
    cfg = ex.load_config(args.config) if args.config else ex.ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.frames is not None:
        changes["num_frames"] = args.frames
    return dataclasses.replace(cfg, **changes).validate()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_run(args) -> int:
    cfg = _load(args)
    stats = ex.run_experiment(cfg)
    if args.out:
        _write(args.out, stats.frames_csv())
    if args.events:
        events = []
        ex.run_frame_session(cfg, 0, cfg.solvers[0], events=events)
        _write(args.events, ex.events_csv(events))
    if args.json:
        print(stats.to_json())
    else:
        for solver, agg in stats.summary().items():
            print(f"{solver}: mean completion {agg['mean_ct']:.4f} +/- {agg['stderr_ct']:.4f}, "
                  f"mean delay {agg['mean_dd']:.4f} +/- {agg['stderr_dd']:.4f} "
                  f"over {agg['frames']} frames")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    try:
        values = [float(v) if args.axis in ("P", "mu") else int(v)
                  for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ex.ConfigError(f"cannot parse --values {args.values!r}") from None
    rows = ex.sweep(cfg, args.axis, values)
    text = ex.sweep_csv(rows)
    if args.out:
        _write(args.out, text)
    if args.json:
        import json
        print(json.dumps({"config_hash": cfg.config_hash(), "rows": rows}, indent=2))
    elif not args.out:
        sys.stdout.write(text)
    return 0


def cmd_validate(args) -> int:
    rng = np.random.Generator(np.random.Philox(key=args.seed))
    checks = oracles.belief_validation(rng, args.channels, args.trials)
    checks += oracles.closed_form_checks(rng, args.channels)
    for c in checks:
        print(c.line())
    failed = sum(not c.ok for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 2


def cmd_oracle(args) -> int:
    rng = np.random.Generator(np.random.Philox(key=args.seed))
    failures = 0
    for limited in (False, True):
        bad = 0
        for _ in range(args.instances):
            ok, _, _ = oracles.optimality_check(oracles.random_instance(rng, limited))
            bad += not ok
        label = "limited" if limited else "perfect"
        print(f"{'PASS' if bad == 0 else 'FAIL'} optimality ({label}): "
              f"{args.instances - bad}/{args.instances} instances attain the maximum")
        failures += bad
    mismatches = 0
    for _ in range(args.instances):
        m, n = int(rng.integers(1, 7)), int(rng.integers(1, 9))
        wants = rng.random((m, n)) < 0.5
        bt = BeliefTable.perfect(wants, rng.uniform(0.05, 0.95, size=m))
        mismatches += build_gidnc(wants).edges() != build_lgidnc(None, bt).edges()
    print(f"{'PASS' if mismatches == 0 else 'FAIL'} graph degeneration: "
          f"{mismatches} mismatches in {args.instances} certainty states")
    return 0 if failures + mismatches == 0 else 2


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except AssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
