"""Importance metric math against hand-computed and brute-force oracles.

Expected values follow the documented formulas:
  naive  [2, -1, 0.5] taking action 0: mu = 0.5, population sigma = sqrt(1.5),
         radical = 1.5 / sqrt(1.5) = sqrt(1.5) ~= 1.22474
  entropy pi = (0.8, 0.2): H = -(0.8 ln 0.8 + 0.2 ln 0.2) ~= 0.500402,
         radical = 1 - H / ln 2 ~= 0.278072
  kl     pi = (0.8, 0.2) vs uniform: 0.8 ln 1.6 + 0.2 ln 0.4 ~= 0.192745
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import trajlens as tl
from trajlens.agent import PolicySnapshot, QTable, ValueView
from trajlens.errors import ConfigError
from trajlens.importance import (
    MetricConfig,
    RadicalKind,
    delta_q,
    radical_bellman,
    radical_entropy,
    radical_kl,
    radical_naive,
    radical_vgoal,
    radical_vnorm,
    step_importance,
)
from trajlens.trajstore import Trajectory

from oracles import brute_force_importance


def qtable_from(rows, gamma=0.9):
    values = np.array(rows, dtype=np.float64)
    return QTable(values, np.zeros_like(values, dtype=np.int64), gamma, "grid", "h")


class TestDeltaQ:
    def test_direct_evaluation(self):
        q = qtable_from([[2.0, -1.0, 0.5]])
        assert delta_q(q, 0) == 3.0

    def test_constant_row_is_zero(self):
        q = qtable_from([[1.5, 1.5, 1.5]])
        assert delta_q(q, 0) == 0.0

    def test_oracle_start_state_matches_enumeration(self, grid3, grid3_oracle):
        start = grid3.state_id((0, 0))
        row = [grid3_oracle.values[start, a] for a in range(4)]
        assert abs(delta_q(grid3_oracle, start) - (max(row) - min(row))) < 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(min_value=-100, max_value=100, allow_nan=False),
                    min_size=2, max_size=6),
           st.floats(min_value=-50, max_value=50, allow_nan=False),
           st.floats(min_value=0.01, max_value=20))
    def test_shift_invariant_and_scale_covariant(self, row, shift, scale):
        base = delta_q(qtable_from([row]), 0)
        shifted = delta_q(qtable_from([[x + shift for x in row]]), 0)
        scaled = delta_q(qtable_from([[x * scale for x in row]]), 0)
        assert base >= 0.0
        assert math.isclose(shifted, base, rel_tol=1e-9, abs_tol=1e-9)
        assert math.isclose(scaled, base * scale, rel_tol=1e-9, abs_tol=1e-9)


class TestNaive:
    def test_hand_example(self):
        q = qtable_from([[2.0, -1.0, 0.5]])
        value, fallback = radical_naive(q, 0, 0)
        assert not fallback
        assert abs(value - math.sqrt(1.5)) < 1e-9

    def test_constant_row_flags_fallback(self):
        q = qtable_from([[1.0, 1.0]])
        value, fallback = radical_naive(q, 0, 0)
        assert value == 0.0 and fallback

    def test_symmetric_argmax_is_exactly_one(self):
        q = qtable_from([[-3.0, 3.0]])
        value, fallback = radical_naive(q, 0, 1)
        assert abs(value - 1.0) < 1e-12 and not fallback

    def test_signed_below_average(self):
        q = qtable_from([[-3.0, 3.0]])
        value, _ = radical_naive(q, 0, 0)
        assert abs(value + 1.0) < 1e-12  # kept signed, not clamped


class TestBellman:
    def test_substitution_example(self):
        # Q(s, a) = 1.0, r = -1, gamma = 0.99, greedy Q(s', a') = 2.0
        q = qtable_from([[1.0, 0.0], [2.0, 0.5]], gamma=0.99)
        t = tl.Transition(0, 0, -1.0, 1, False)
        assert abs(radical_bellman(q, t) - 0.02) < 1e-12

    def test_consistent_terminal_is_zero(self):
        q = qtable_from([[-1.0, 0.0], [0.0, 0.0]])
        t = tl.Transition(0, 0, -1.0, 1, True)
        assert radical_bellman(q, t) == 0.0

    def test_greedy_transitions_on_oracle_below_tolerance(self, grid3, grid3_oracle):
        s = grid3.reset()
        while not grid3.done:
            t = grid3.step(grid3_oracle.greedy_action(s))
            assert radical_bellman(grid3_oracle, t) < 1e-9
            s = t.next_state


class TestEntropy:
    def test_uniform_is_zero(self):
        q = qtable_from([[1.0, 1.0, 1.0, 1.0]])
        assert radical_entropy(PolicySnapshot(q), 0) == 0.0

    def test_deterministic_is_one(self):
        q = qtable_from([[1000.0, 0.0, 0.0, 0.0]])
        value = radical_entropy(PolicySnapshot(q, temperature=0.01), 0)
        assert abs(value - 1.0) < 1e-9

    def test_hand_example(self):
        # softmax logits (ln 4, 0) give pi = (0.8, 0.2)
        q = qtable_from([[math.log(4.0), 0.0]])
        p = PolicySnapshot(q).probabilities(0)
        assert np.allclose(p, [0.8, 0.2])
        h = -(0.8 * math.log(0.8) + 0.2 * math.log(0.2))
        expected = 1.0 - h / math.log(2)
        assert abs(radical_entropy(PolicySnapshot(q), 0) - expected) < 1e-9
        assert abs(expected - 0.27807190511263773) < 1e-12

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.floats(min_value=-30, max_value=30, allow_nan=False),
                    min_size=2, max_size=6),
           st.floats(min_value=0.05, max_value=10))
    def test_bounded_zero_one(self, row, temperature):
        q = qtable_from([row])
        value = radical_entropy(PolicySnapshot(q, temperature=temperature), 0)
        assert 0.0 <= value <= 1.0


class TestVNorm:
    def _view(self):
        values = [[-10.0, -20.0], [-5.0, -9.0], [0.0, -1.0]]
        return ValueView(qtable_from(values))

    def test_endpoints(self):
        view = self._view()
        assert radical_vnorm(view, 2) == (1.0, False)
        assert radical_vnorm(view, 0) == (0.0, False)

    def test_midpoint_exact(self):
        view = self._view()
        value, fallback = radical_vnorm(view, 1)
        assert value == 0.5 and not fallback

    def test_degenerate_range_flags(self):
        view = ValueView(qtable_from([[1.0, 0.0], [1.0, -5.0]]))
        assert radical_vnorm(view, 0) == (0.0, True)


class TestVGoal:
    def test_self_ratio_is_one(self):
        view = ValueView(qtable_from([[-5.0, -9.0], [-1.0, -2.0]]))
        value, fallback = radical_vgoal(view, 1, goal_value=-1.0)
        assert value == 1.0 and not fallback

    def test_substitution(self):
        view = ValueView(qtable_from([[-5.0, -9.0], [-1.0, -2.0]]))
        value, _ = radical_vgoal(view, 0, goal_value=-1.0)
        assert value == 5.0

    def test_near_zero_reference_falls_back_to_vnorm(self):
        view = ValueView(qtable_from([[-10.0, -20.0], [-5.0, -9.0], [0.0, -1.0]]))
        value, fallback = radical_vgoal(view, 1, goal_value=1e-9)
        assert fallback
        assert value == radical_vnorm(view, 1)[0]


class TestKL:
    def test_identical_distributions_zero(self):
        q = qtable_from([[1.0, 1.0, 1.0, 1.0]])
        assert abs(radical_kl(PolicySnapshot(q), 0, "uniform")) < 1e-12

    def test_deterministic_vs_uniform_closed_form(self):
        q = qtable_from([[1000.0, 0.0, 0.0, 0.0]])
        value = radical_kl(PolicySnapshot(q, temperature=0.01), 0, "uniform")
        assert abs(value - math.log(4)) < 1e-6

    def test_hand_example(self):
        q = qtable_from([[math.log(4.0), 0.0]])
        value = radical_kl(PolicySnapshot(q), 0, "uniform")
        expected = 0.8 * math.log(1.6) + 0.2 * math.log(0.4)
        assert abs(value - expected) < 1e-9
        assert abs(expected - 0.19274475702175742) < 1e-12

    def test_zero_mass_reference_is_error(self):
        q = qtable_from([[1.0, 2.0]])
        with pytest.raises(ConfigError):
            radical_kl(PolicySnapshot(q), 0, "greedy")  # point mass, pi > 0 everywhere

    def test_custom_weights(self):
        q = qtable_from([[math.log(4.0), 0.0]])
        value = radical_kl(PolicySnapshot(q), 0, "1,1")
        assert abs(value - radical_kl(PolicySnapshot(q), 0, "uniform")) < 1e-12

    def test_requires_experimental_flag(self):
        with pytest.raises(ConfigError):
            MetricConfig(kind=RadicalKind.KL, kl_reference="uniform")
        with pytest.raises(ConfigError):
            MetricConfig(kind=RadicalKind.KL, experimental=True)
        MetricConfig(kind=RadicalKind.KL, kl_reference="uniform", experimental=True)


class TestStepAndTrajectory:
    def test_classic_kind_returns_delta_q(self):
        q = qtable_from([[2.0, -1.0, 0.5]])
        t = tl.Transition(0, 0, -1.0, 0, True)
        d, r, p, fb = step_importance(q, PolicySnapshot(q), ValueView(q), t,
                                      MetricConfig(kind=RadicalKind.CLASSIC))
        assert (d, r, p, fb) == (3.0, 1.0, 3.0, False)

    def test_constant_row_annihilates_every_kind(self):
        q = qtable_from([[2.0, 2.0], [2.0, 2.0]])
        t = tl.Transition(0, 0, -1.0, 1, False)
        for kind in (RadicalKind.CLASSIC, RadicalKind.NAIVE, RadicalKind.BELLMAN,
                     RadicalKind.ENTROPY, RadicalKind.VNORM):
            d, r, p, fb = step_importance(q, PolicySnapshot(q), ValueView(q), t,
                                          MetricConfig(kind=kind))
            assert p == 0.0

    def test_product_identity_bit_exact(self, grid5_dataset, grid5_training):
        env, result = grid5_training
        for kind in (RadicalKind.CLASSIC, RadicalKind.NAIVE, RadicalKind.BELLMAN,
                     RadicalKind.ENTROPY, RadicalKind.VNORM, RadicalKind.VGOAL):
            breakdowns = tl.score_dataset(grid5_dataset, result.final,
                                          MetricConfig(kind=kind))
            for b in breakdowns:
                for d, r, p in zip(b.delta_q, b.radical, b.product):
                    assert p == d * r
                assert b.i_tau == sum(b.product) / len(b.product)

    def test_single_step_trajectory_mean(self):
        q = qtable_from([[2.0, -1.0, 0.5]])
        traj = Trajectory("t", [tl.Transition(0, 0, -1.0, 0, True)], 1.0, 0, -1.0, 1)
        b = tl.trajectory_importance(traj, q, MetricConfig(kind=RadicalKind.CLASSIC))
        assert b.i_tau == 3.0

    def test_arithmetic_mean_of_products(self):
        # three states whose delta-q values are 1, 2, 3 under classic
        q = qtable_from([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [0.0, 0.0]])
        transitions = [tl.Transition(0, 0, -1.0, 1, False),
                       tl.Transition(1, 0, -1.0, 2, False),
                       tl.Transition(2, 0, -1.0, 3, True)]
        traj = Trajectory("t", transitions, 1.0, 0, -3.0, 3)
        b = tl.trajectory_importance(traj, q, MetricConfig(kind=RadicalKind.CLASSIC))
        assert b.i_tau == 2.0

    def test_empty_trajectory_is_error(self):
        q = qtable_from([[1.0, 0.0]])
        traj = Trajectory("t", [], 1.0, 0, 0.0, 0)
        with pytest.raises(ConfigError):
            tl.trajectory_importance(traj, q, MetricConfig(kind=RadicalKind.CLASSIC))

    def test_vgoal_chain_full_hand_enumeration(self):
        # 3-state chain with hand-built values; goal reference from the
        # trajectory's own final decision state (V = -1)
        q = qtable_from([[-2.71, -3.0], [-1.9, -2.2], [-1.0, -1.5]])
        transitions = [tl.Transition(0, 0, -1.0, 1, False),
                       tl.Transition(1, 0, -1.0, 2, False),
                       tl.Transition(2, 0, -1.0, 2, True)]
        traj = Trajectory("t", transitions, 1.0, 0, -3.0, 3)
        metric = MetricConfig(kind=RadicalKind.VGOAL, vgoal_reference="trajectory")
        b = tl.trajectory_importance(traj, q, metric)
        v = [-2.71, -1.9, -1.0]
        deltas = [0.29, 0.3, 0.5]
        expected = [d * abs(x / -1.0) for d, x in zip(deltas, v)]
        for got, want in zip(b.product, expected):
            assert abs(got - want) < 1e-12
        assert abs(b.i_tau - sum(expected) / 3) < 1e-12
        assert b.goal_value == -1.0

    def test_classic_mean_is_permutation_invariant(self, grid5_dataset, grid5_training):
        env, result = grid5_training
        traj = grid5_dataset.trajectories[0]
        metric = MetricConfig(kind=RadicalKind.CLASSIC)
        base = tl.trajectory_importance(traj, result.final, metric).i_tau
        reversed_traj = Trajectory("r", list(reversed(traj.transitions)), 1.0, 0,
                                   traj.total_reward, traj.length)
        flipped = tl.trajectory_importance(reversed_traj, result.final, metric).i_tau
        assert math.isclose(base, flipped, rel_tol=1e-12)

    def test_breakdown_matches_brute_force_oracle(self, grid5_dataset, grid5_training):
        env, result = grid5_training
        q_rows = result.final.values.tolist()
        policy = PolicySnapshot(result.final)
        probs = {s: policy.probabilities(s).tolist()
                 for s in range(result.final.state_count)}
        traj = max(grid5_dataset.trajectories, key=lambda t: t.length)
        raw = [(t.state, t.action, t.reward, t.next_state, t.done)
               for t in traj.transitions]
        for kind in ("classic", "naive", "bellman", "entropy", "vnorm", "vgoal"):
            metric = MetricConfig(kind=RadicalKind(kind), vgoal_reference="trajectory")
            b = tl.trajectory_importance(traj, result.final, metric)
            goal_value = ValueView(result.final).value(traj.transitions[-1].state)
            products, i_tau = brute_force_importance(
                q_rows, 0.6, raw, kind, policy_probs=probs, goal_value=goal_value)
            assert len(products) == len(b.product)
            for got, want in zip(b.product, products):
                assert math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-9)
            assert math.isclose(b.i_tau, i_tau, rel_tol=1e-9, abs_tol=1e-9)


def test_dataset_best_goal_reference_uses_best_outcome(grid5_dataset, grid5_training):
    env, result = grid5_training
    metric = MetricConfig(kind=RadicalKind.VGOAL)  # dataset_best default
    breakdowns = tl.score_dataset(grid5_dataset, result.final, metric)
    best = min(grid5_dataset.trajectories, key=lambda t: (-t.total_reward, t.length))
    expected_ref = ValueView(result.final).value(best.transitions[-1].state)
    assert all(b.goal_value == expected_ref for b in breakdowns)
