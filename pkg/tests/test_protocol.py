import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idncsim.gec import LOSSLESS, GecParams
from idncsim.protocol import (
    BlindPolicy,
    FrameConfig,
    Phase,
    blind_view,
    feedback_slot,
    once_attempted_mask,
    run_frame,
    uncertain_classes,
)
from idncsim.rng import FrameStreams
from idncsim.session import HAS, UNCERTAIN, WANTS, SessionConfig, run_initial_phase, session_from_matrices
from idncsim.simulate import run_limited_session
from idncsim.solvers import Solver

from conftest import philox

ALWAYS_LOST = GecParams(1.0, 0.0, 1.0, 1.0)


def limited_session(seed, m=4, n=6, erasure=0.3, backward=LOSSLESS):
    cfg = SessionConfig(m, n, [GecParams.memoryless(erasure)] * m, [backward] * m, limited=True)
    return run_initial_phase(cfg, philox(seed), philox(seed + 1))


class TestFrameConfig:
    @pytest.mark.parametrize("frame,T_f,T_u,T_ui,expected", [
        (2, 12, 4, 3, 23), (1, 2, 1, 1, 2), (3, 10, 2, 2, 30)])
    def test_feedback_slot(self, frame, T_f, T_u, T_ui, expected):
        cfg = FrameConfig(T_d=T_f - T_u, T_u=T_u, T_ui=(T_ui,))
        assert feedback_slot(frame, cfg, 0) == expected

    def test_default_uplink_index(self):
        cfg = FrameConfig(T_d=2, T_u=3)
        assert [cfg.uplink_index(i) for i in range(5)] == [1, 2, 3, 1, 2]
        assert cfg.T_f == 5

    def test_rejects_bad_frames(self):
        with pytest.raises(ValueError):
            FrameConfig(T_d=0)
        with pytest.raises(ValueError):
            FrameConfig(T_u=2, T_ui=(3,))
        with pytest.raises(ValueError):
            feedback_slot(0, FrameConfig(), 0)

    @given(st.integers(1, 50), st.integers(1, 6), st.integers(1, 6), st.integers(0, 20))
    def test_slot_inside_uplink_window(self, frame, T_d, T_u, user):
        cfg = FrameConfig(T_d, T_u)
        s = feedback_slot(frame, cfg, user)
        assert (frame - 1) * cfg.T_f + T_d < s <= frame * cfg.T_f


class TestOnceAttempted:
    def session(self, attempts):
        s = session_from_matrices(np.zeros((2, 3), bool), limited=True)
        s.fm[1] = [HAS, HAS, WANTS]
        s.frame = 1
        opp = s.ledgers[0].open_opportunity(1)
        opp.attempts.update(attempts)
        return s

    def test_no_attempts(self):
        assert once_attempted_mask(self.session({})).tolist() == [[1, 1, 1], [0, 0, 1]]

    def test_single_once_attempted_protected(self):
        mask = once_attempted_mask(self.session({0: [1]}))
        assert mask[0].tolist() == [False, True, True]

    def test_two_once_attempted(self):
        mask = once_attempted_mask(self.session({0: [1], 1: [2]}))
        assert mask[0].tolist() == [True, True, True]

    def test_twice_attempted_is_free(self):
        mask = once_attempted_mask(self.session({0: [1, 2], 1: [3]}))
        assert mask[0].tolist() == [True, False, True]

    def test_unattainable_window_exempt(self):
        mask = once_attempted_mask(self.session({0: [1, 2], 1: [3, 4], 2: [5, 6]}))
        assert mask[0].tolist() == [True, True, True]

    def test_single_want_exempt(self):
        s = self.session({})
        s.ledgers[1].open_opportunity(1).attempts[2] = [1]
        assert once_attempted_mask(s)[1, 2]


class TestBlindView:
    def session(self):
        s = session_from_matrices(np.zeros((3, 3), bool), limited=True)
        s.fm[:] = [[UNCERTAIN, WANTS, HAS], [UNCERTAIN, UNCERTAIN, HAS], [UNCERTAIN, HAS, HAS]]
        s.ledgers[0].frame_marks = {0}
        s.ledgers[1].frame_marks = {1}
        return s

    def test_classes(self):
        down, up = uncertain_classes(self.session())
        assert np.argwhere(down).tolist() == [[0, 0], [1, 1]]
        assert np.argwhere(up).tolist() == [[1, 0], [2, 0]]
        d, u = uncertain_classes(self.session(), Phase.UPLINK)
        assert not d.any() and u.sum() == 4

    def test_none_keeps_everything(self):
        removed, hidden = blind_view(self.session(), None)
        assert not removed.any() and not hidden.any()

    def test_pessimist_hides_downlink_class(self):
        removed, hidden = blind_view(self.session(), BlindPolicy.PESSIMIST)
        assert not removed.any()
        assert np.argwhere(hidden).tolist() == [[0, 0], [1, 1]]

    def test_optimist(self):
        removed, hidden = blind_view(self.session(), "optimist")
        # users 1 and 2 hold only uncertain entries, so their older ones survive
        assert np.argwhere(removed).tolist() == [[0, 0], [1, 1]]
        assert not hidden.any()

    def test_realistic_rate(self):
        s = session_from_matrices(np.zeros((200, 5), bool),
                                  forward=[GecParams.from_memory(0.5, 0.3, 0.1, 0.9)] * 200,
                                  backward=[GecParams.from_memory(0.5, 0.6, 0.1, 0.9)] * 200,
                                  limited=True)
        s.fm[:] = UNCERTAIN
        for led in s.ledgers:
            led.frame_marks = {0, 1}
        removed, _ = blind_view(s, "realistic", philox(3))
        kept_down = 1 - removed[:, :2].mean()
        kept_up = 1 - removed[:, 2:].mean()
        assert abs(kept_down - 0.3) < 4 * np.sqrt(0.21 / 400)
        assert abs(kept_up - 0.6) < 4 * np.sqrt(0.24 / 600)


class TestRunFrame:
    def test_lossless_uplink_clears_uncertainty(self):
        for seed in range(20):
            s = limited_session(seed)
            for _ in range(3):
                if s.sender_complete():
                    break
                run_frame(s, FrameConfig(2, 1), rng=philox(seed + 99))
                assert not s.uncertain().any()
                assert (s.fm == np.where(s.has_true, HAS, WANTS)).all()

    def test_lost_feedback_keeps_uncertainty(self):
        s = limited_session(5, erasure=0.0, backward=ALWAYS_LOST)
        before = s.uncertain().sum()
        assert before == s.M * s.N
        tx = run_frame(s, FrameConfig(1, 1), rng=philox(0))
        assert tx and s.uncertain().sum() == before
        for led in s.ledgers:
            assert led.last_feedback_time is None

    def test_untargeted_users_unchanged(self):
        s = session_from_matrices([[0, 1], [1, 0], [0, 0]], limited=True)
        s.forward.p[:] = 1.0   # every forward slot erased
        s.forward.q[:] = 1.0
        fm = s.fm.copy()
        sent = run_frame(s, FrameConfig(1, 1), rng=philox(1))
        for i in range(3):
            if i not in sent[0].targeted:
                assert (s.fm[i] == fm[i]).all()

    def test_feedback_slot_recorded(self):
        s = limited_session(2, backward=GecParams.memoryless(0.3))
        run_frame(s, FrameConfig(3, 2), rng=philox(2))
        for i, led in enumerate(s.ledgers):
            opp = led.current(s.frame)
            if opp is not None:
                assert opp.feedback_slot == feedback_slot(1, FrameConfig(3, 2), i)


@settings(max_examples=25)
@given(st.integers(0, 2**32), st.sampled_from([None, "pessimist", "optimist", "realistic"]),
       st.sampled_from([Solver.DDC_GRAPH, Solver.SSP, Solver.BLIND_SVE]))
def test_limited_session_conservation(seed, policy, solver):
    m, n = 4, 6
    rng = philox(seed)
    fwd = [GecParams.from_memory(rng.uniform(0, 0.6), 0.25, 0.05, 0.7) for _ in range(m)]
    bwd = [GecParams.memoryless(rng.uniform(0, 0.4)) for _ in range(m)]
    cfg = SessionConfig(m, n, fwd, bwd, limited=True)
    res = run_limited_session(cfg, FrameConfig(2, 2), solver, FrameStreams(seed % 2**32, 1), policy)
    active = res.initial_wants > 0
    # every wanted packet ends up decoded: completion = W0 + D + E
    assert (res.user_completion[active] ==
            (res.initial_wants + res.delay + res.erasures)[active]).all()
    assert res.completion == res.user_completion.max()
