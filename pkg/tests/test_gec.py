import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from idncsim.gec import (
    LOSSLESS,
    ChannelBank,
    ChannelState,
    DegenerateChain,
    GecParams,
    ImpossibleObservation,
    Observation,
    average_erasure,
    clamp_prob,
    conditional_erasure_belief,
    erasure_belief_array,
    feedback_loss_belief,
    k_step_transition,
    memory_factor,
    posterior_state,
    sample_slot,
    steady_state,
)
from idncsim.oracles import mc_conditional_erasure

from conftest import philox

# exact values frozen after agreeing with a 10^6-trial conditional Monte Carlo
# (0.24687 +/- 0.00051 and 0.26544 +/- 0.00052 respectively)
RECEIVED_K3 = 0.2476275862068966
FEEDBACK_K5 = 0.26514593103448286

REF = GecParams(g=0.3, b=0.1, p=0.1, q=0.8)


@st.composite
def gec_params(draw, strict=True):
    lo = 0.01 if strict else 0.0
    g = draw(st.floats(lo, 1.0 - lo))
    b = draw(st.floats(lo, 1.0 - g))
    p = draw(st.floats(0.0, 1.0))
    q = draw(st.floats(p, 1.0))
    return GecParams(g, b, p, q)


def stationary_chain(params, n, rng):
    """Long single chain; returns (bad-state flags, erasure flags)."""
    bank = ChannelBank([params], rng)
    bad = np.empty(n, dtype=bool)
    erased = np.empty(n, dtype=bool)
    for t in range(n):
        bad[t] = bank.state[0] == ChannelState.BAD
        erased[t] = bank.step()[0]
    return bad, erased


class TestParams:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            GecParams(1.2, 0.1, 0.0, 1.0)

    def test_rejects_negative_memory(self):
        with pytest.raises(ValueError):
            GecParams(0.7, 0.6, 0.0, 1.0)

    def test_rejects_p_above_q(self):
        with pytest.raises(ValueError):
            GecParams(0.3, 0.1, 0.9, 0.2)

    def test_from_memory_round_trip(self):
        c = GecParams.from_memory(0.2, 0.25, 0.1, 0.8)
        assert c.mu == pytest.approx(0.2)
        assert steady_state(c)[1] == pytest.approx(0.25)
        assert c.alpha == pytest.approx(0.275)

    def test_memoryless_has_zero_memory(self):
        c = GecParams.memoryless(0.3)
        assert c.mu == pytest.approx(0.0)
        assert c.alpha == pytest.approx(0.3)


class TestSteadyState:
    def test_symmetric(self):
        assert steady_state(GecParams(0.25, 0.25, 0, 1)) == (0.5, 0.5)

    def test_absorbing_good(self):
        assert steady_state(GecParams(1.0, 0.0, 0, 1)) == (1.0, 0.0)

    def test_reference(self):
        assert steady_state(REF) == pytest.approx((0.75, 0.25))

    def test_degenerate(self):
        with pytest.raises(DegenerateChain):
            steady_state(GecParams(0.0, 0.0, 0.0, 1.0))
        with pytest.raises(DegenerateChain):
            average_erasure(GecParams(0.0, 0.0, 0.0, 1.0))

    def test_monte_carlo_occupancy(self):
        bad, erased = stationary_chain(REF, 200_000, philox(3))
        assert bad.mean() == pytest.approx(0.25, abs=1e-2)
        assert erased.mean() == pytest.approx(0.275, abs=1e-2)


class TestMemoryAndErasure:
    @pytest.mark.parametrize("g,b,mu", [(0.1, 0.1, 0.8), (0.5, 0.5, 0.0), (0.2, 0.2, 0.6)])
    def test_memory_factor(self, g, b, mu):
        assert memory_factor(GecParams(g, b, 0, 1)) == pytest.approx(mu)

    def test_average_erasure_examples(self):
        assert average_erasure(GecParams(0.3, 0.1, 0, 1)) == pytest.approx(0.25)
        assert average_erasure(REF) == pytest.approx(0.275)

    @given(gec_params(), st.floats(0, 1))
    def test_state_independent_erasure(self, c, e):
        assert average_erasure(GecParams(c.g, c.b, e, e)) == pytest.approx(e)


class TestSampling:
    def test_good_state_never_erases_when_p_zero(self, rng):
        c = GecParams(0.3, 0.1, 0.0, 1.0)
        assert not any(sample_slot(c, ChannelState.GOOD, rng).erased for _ in range(200))
        assert all(sample_slot(c, ChannelState.BAD, rng).erased for _ in range(200))

    def test_bank_rate(self):
        bank = ChannelBank([REF] * 50, philox(9))
        rate = np.mean([bank.step() for _ in range(20_000)])
        assert rate == pytest.approx(0.275, abs=1e-2)

    def test_bank_draws_fixed_uniforms_per_step(self):
        a, b = philox(5), philox(5)
        ChannelBank([REF] * 3, a).step()
        b.random(3)
        b.random((3, 2))
        assert a.random() == b.random()


class TestTransitions:
    def test_one_step(self):
        assert k_step_transition(REF, ChannelState.BAD, ChannelState.GOOD, 1) == pytest.approx(0.3)

    def test_two_step_matches_matrix_square(self):
        c = GecParams(0.2, 0.2, 0, 1)
        T = np.array([[0.8, 0.2], [0.2, 0.8]])
        expected = (T @ T)[1, 0]
        assert expected == pytest.approx(0.32)
        assert k_step_transition(c, ChannelState.BAD, ChannelState.GOOD, 2) == pytest.approx(expected)

    def test_limit_is_stationary(self):
        v = k_step_transition(REF, ChannelState.GOOD, ChannelState.BAD, 10**6)
        assert v == pytest.approx(0.25, abs=1e-6)

    def test_zero_steps(self):
        assert k_step_transition(REF, ChannelState.GOOD, ChannelState.GOOD, 0) == 1.0
        assert k_step_transition(REF, ChannelState.GOOD, ChannelState.BAD, 0) == 0.0

    @given(gec_params(strict=False), st.integers(0, 40), st.sampled_from(list(ChannelState)))
    def test_rows_sum_to_one(self, c, k, src):
        total = sum(k_step_transition(c, src, dst, k) for dst in ChannelState)
        assert total == pytest.approx(1.0)

    @given(gec_params(), st.integers(1, 12))
    def test_matches_matrix_power(self, c, k):
        T = np.array([[1 - c.b, c.b], [c.g, 1 - c.g]])
        Tk = np.linalg.matrix_power(T, k)
        for s in ChannelState:
            for d in ChannelState:
                assert k_step_transition(c, s, d, k) == pytest.approx(Tk[s, d], abs=1e-12)


class TestPosterior:
    def test_uninformative(self):
        c = GecParams(0.3, 0.1, 0.4, 0.4)
        for obs in (True, False):
            assert posterior_state(c, obs) == pytest.approx(steady_state(c))

    def test_good_cannot_erase(self):
        assert posterior_state(GecParams(0.3, 0.1, 0.0, 0.7), True) == (0.0, 1.0)

    def test_reference_enumeration(self):
        joint_g, joint_b = 0.75 * 0.1, 0.25 * 0.8
        z = joint_g + joint_b
        assert posterior_state(REF, True) == pytest.approx((joint_g / z, joint_b / z))
        assert posterior_state(REF, True) == pytest.approx((0.2727, 0.7273), abs=1e-3)

    def test_impossible(self):
        with pytest.raises(ImpossibleObservation):
            posterior_state(GecParams(0.3, 0.1, 0.0, 0.0), True)


class TestBeliefs:
    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
           st.sampled_from(list(Observation)), st.integers(1, 30))
    def test_memoryless_collapse(self, g, p, dq, obs, k):
        c = GecParams(g, 1.0 - g, p, min(1.0, p + dq))
        if g in (0.0, 1.0):
            return
        try:
            v = conditional_erasure_belief(c, obs, k)
        except ImpossibleObservation:
            return
        assert v == pytest.approx(average_erasure(c), abs=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 5, 17])
    def test_erased_branch_closed_form(self, k):
        c = GecParams.from_memory(0.6, 0.3, 0.0, 1.0)
        s = sum(c.mu ** i for i in range(k))
        assert conditional_erasure_belief(c, Observation.ERASED, k) == pytest.approx(
            1 - c.g * s, abs=1e-12)

    @pytest.mark.parametrize("k", [1, 3, 8])
    def test_feedback_closed_form(self, k):
        c = GecParams.from_memory(0.5, 0.2, 0.0, 1.0)
        s = sum(c.mu ** i for i in range(k))
        assert feedback_loss_belief(c, k) == pytest.approx(c.b * s, abs=1e-12)

    def test_reference_received_k3(self):
        assert conditional_erasure_belief(REF, Observation.RECEIVED, 3) == pytest.approx(
            RECEIVED_K3, abs=1e-12)

    def test_reference_feedback_k5(self):
        assert feedback_loss_belief(REF, 5) == pytest.approx(FEEDBACK_K5, abs=1e-12)

    def test_reference_against_monte_carlo(self):
        freq, se, _ = mc_conditional_erasure(REF, False, 3, 1_000_000, philox(1))
        assert abs(freq - RECEIVED_K3) < 1e-2
        freq, se, _ = mc_conditional_erasure(REF, False, 5, 1_000_000, philox(2))
        assert abs(freq - FEEDBACK_K5) < 1e-2

    def test_elapsed_must_be_positive(self):
        with pytest.raises(ValueError):
            conditional_erasure_belief(REF, Observation.RECEIVED, 0)

    @given(gec_params(), st.sampled_from(list(Observation)), st.integers(1, 200))
    def test_bounded_by_state_erasures(self, c, obs, k):
        try:
            v = conditional_erasure_belief(c, obs, k)
        except ImpossibleObservation:
            return
        assert min(c.p, c.q) - 1e-12 <= v <= max(c.p, c.q) + 1e-12

    @given(gec_params(), st.sampled_from(list(Observation)))
    def test_converges_to_average(self, c, obs):
        if c.mu <= 0:
            k = 1
        else:
            k = max(1, math.ceil(math.log(1e-10) / math.log(c.mu)) + 1)
        try:
            v = conditional_erasure_belief(c, obs, k)
        except ImpossibleObservation:
            return
        assert v == pytest.approx(average_erasure(c), abs=1e-9)

    @given(st.lists(gec_params(), min_size=1, max_size=6), st.integers(1, 50), st.data())
    def test_vectorized_matches_scalar(self, cs, k, data):
        erased = [data.draw(st.booleans()) for _ in cs]
        vec = erasure_belief_array([c.g for c in cs], [c.b for c in cs], [c.p for c in cs],
                                   [c.q for c in cs], erased, [k] * len(cs))
        for c, obs, v in zip(cs, erased, vec):
            try:
                ref = conditional_erasure_belief(c, Observation(int(obs)), k)
            except ImpossibleObservation:
                ref = average_erasure(c)
            assert v == pytest.approx(ref, abs=1e-12)


def test_clamp():
    assert clamp_prob(1.0) == 1 - 1e-12
    assert clamp_prob(0.0) == 1e-12
    assert np.all(clamp_prob(np.array([0.0, 0.5, 1.0])) == np.array([1e-12, 0.5, 1 - 1e-12]))


def test_lossless_constant():
    assert average_erasure(LOSSLESS) == 0.0


@pytest.mark.slow
def test_feedback_belief_large_sample():
    # the channel behind the single 3.2-SE miss of the seeded 10^6-trial
    # validation; a 2*10^7-trial sample on a fresh stream sits well inside
    params = GecParams(g=0.14960290164454995, b=0.13618740304710572,
                       p=0.30696231315229455, q=0.8898018177010694)
    freq, se, _ = mc_conditional_erasure(params, False, 1, 20_000_000, philox(999))
    assert abs(freq - feedback_loss_belief(params, 1)) < 3 * se
