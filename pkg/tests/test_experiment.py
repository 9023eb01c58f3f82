import dataclasses

import numpy as np
import pytest

from idncsim.experiment import (
    SWEEP_COLUMNS,
    ConfigError,
    ExperimentConfig,
    draw_channels,
    load_config,
    parse_config,
    run_experiment,
    run_frame_session,
    sweep,
    sweep_csv,
)
from idncsim.rng import FrameStreams, stream

SMALL = ExperimentConfig(M=5, N=8, num_frames=3, seed=42)


class TestConfig:
    def test_parse(self):
        cfg = parse_config("""
            # comment
            M = 7
            N = 12   # trailing comment
            solver = DDC_Graph, SDD
            feedback = limited
            policy = realistic
        """)
        assert (cfg.M, cfg.N, cfg.feedback, cfg.policy) == (7, 12, "limited", "realistic")
        assert tuple(cfg.solvers) == ("DDC_Graph", "SDD")

    @pytest.mark.parametrize("text", [
        "M = 0", "N = -1", "bogus = 3", "M 5", "P = 1.5", "solver = Nope",
        "feedback = sometimes", "solver = Blind_NVE", "erasure_model = gec\np = 0.9\nq = 0.1",
        "policy = random", "T_d = 0", "M = three"])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_missing_file_named(self, tmp_path):
        missing = tmp_path / "nope.cfg"
        with pytest.raises(ConfigError, match="nope.cfg"):
            load_config(missing)

    def test_hash_stable_and_sensitive(self):
        a = ExperimentConfig().config_hash()
        assert a == ExperimentConfig().config_hash() and len(a) == 16
        assert a != dataclasses.replace(ExperimentConfig(), M=21).config_hash()

    def test_canonical_roundtrip(self):
        cfg = dataclasses.replace(SMALL, feedback="limited", solvers=("DDC_BPSO", "Blind_SVE"))
        assert parse_config(cfg.canonical().replace("psi = none", "")).config_hash() == \
            cfg.config_hash()


class TestStreams:
    def test_purposes_independent(self):
        s = FrameStreams(5, 3)
        draws = [getattr(s, k).random() for k in ("params", "forward", "backward", "solver")]
        assert len(set(draws)) == 4

    def test_frames_independent_of_count(self):
        assert stream(9, 2, "forward").random() == FrameStreams(9, 2).forward.random()

    def test_channel_draws(self):
        cfg = dataclasses.replace(SMALL, M=2000, P=0.4, spread=0.5)
        fwd, bwd = draw_channels(cfg, np.random.default_rng(0))
        e = np.array([c.b for c in fwd])
        assert e.min() >= 0.2 - 1e-12 and e.max() <= 0.6 + 1e-12
        assert abs(e.mean() - 0.4) < 0.01
        assert fwd == bwd

    def test_gec_channels(self):
        cfg = dataclasses.replace(SMALL, erasure_model="gec", mu=0.4, psi=0.1)
        fwd, bwd = draw_channels(cfg, np.random.default_rng(0))
        assert all(abs(c.mu - 0.4) < 1e-12 for c in fwd)
        assert all(abs(c.mu - 0.1) < 1e-12 for c in bwd)


class TestRuns:
    def test_deterministic(self):
        a, b = run_experiment(SMALL), run_experiment(SMALL)
        assert a.frames_csv() == b.frames_csv()
        assert a.to_json() == b.to_json()

    def test_frames_independent(self):
        short = run_experiment(dataclasses.replace(SMALL, num_frames=2)).frames_csv()
        long = run_experiment(SMALL).frames_csv()
        assert long.startswith(short)

    def test_seed_changes_results(self):
        a = run_experiment(SMALL).frames_csv()
        assert a != run_experiment(dataclasses.replace(SMALL, seed=43)).frames_csv()

    def test_summary(self):
        stats = run_experiment(SMALL)
        summ = stats.summary()
        assert set(summ) == {"DDC_Graph", "SSP"}
        for agg in summ.values():
            assert agg["frames"] == 3 and agg["guard_hits"] == 0
            assert agg["mean_ct"] > 0
        ct = stats.per_frame("SSP")
        assert np.isclose(summ["SSP"]["mean_ct"], ct.mean())

    def test_limited_and_bpso(self):
        cfg = dataclasses.replace(SMALL, feedback="limited", T_d=2, T_u=1,
                                  solvers=("DDC_BPSO", "Blind_NVE", "Blind_FVE", "Blind_SVE"),
                                  bpso_iterations=5, num_frames=2)
        stats = run_experiment(cfg)
        assert all(not r.guard_hit for r in stats.records)

    def test_events(self):
        events = []
        res = run_frame_session(SMALL, 0, "DDC_Graph", events=events)
        assert len(events) == res.transmissions
        assert all(len(e["combination"]) == SMALL.N for e in events)

    def test_sweep(self):
        rows = sweep(dataclasses.replace(SMALL, num_frames=2), "M", [3, 4])
        assert [(r["value"], r["solver"]) for r in rows] == \
            [(3, "DDC_Graph"), (3, "SSP"), (4, "DDC_Graph"), (4, "SSP")]
        lines = sweep_csv(rows).splitlines()
        assert lines[0].split(",") == list(SWEEP_COLUMNS) and len(lines) == 5

    def test_sweep_bad_axis(self):
        with pytest.raises(ConfigError):
            sweep(SMALL, "Q", [1])
