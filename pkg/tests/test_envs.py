"""Environment and discretizer behavior, checked against independent oracles.

The BFS shortest-path oracle here is deliberately separate from the package's
internal reachability check: it recomputes distances from scratch so the
tests do not trust the code they exercise.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import trajlens as tl
from trajlens.errors import ConfigError, EpisodeFinishedError

from oracles import bfs_distances


# ---------------------------------------------------------------------------
# gridworld
# ---------------------------------------------------------------------------

class TestGridWorld:
    def test_3x3_optimal_episode(self, grid3):
        # manhattan distance: 4 steps, one reward of -1 each
        dist = bfs_distances(3, 3, (), (0, 0))[(2, 2)]
        assert dist == 4
        s = grid3.reset()
        total = 0.0
        for action in (3, 3, 1, 1):  # right right down down
            t = grid3.step(action)
            total += t.reward
        assert t.done and grid3.terminal_kind(t) == "goal"
        assert total == -4.0

    def test_1x2_single_step(self, grid1x2):
        grid1x2.reset()
        t = grid1x2.step(3)
        assert t.done and t.reward == -1.0
        assert grid1x2.terminal_kind(t) == "goal"

    def test_wall_detour_matches_bfs_oracle(self):
        # wall column with a gap at the bottom forces a detour
        walls = [(2, 0), (2, 1), (2, 2), (2, 3)]
        env = tl.GridWorld(5, 5, (0, 0), (4, 0), walls=walls)
        oracle = bfs_distances(5, 5, walls, (0, 0))
        assert oracle[(4, 0)] == 12  # down around the wall and back up
        q = tl.value_iteration(env, gamma=1.0, tolerance=1e-12)
        s = env.reset()
        steps = 0
        while not env.done:
            t = env.step(q.greedy_action(s))
            s = t.next_state
            steps += 1
        assert steps == oracle[(4, 0)]
        assert env.terminal_kind(t) == "goal"

    def test_wall_bounce_keeps_position_and_costs(self):
        env = tl.GridWorld(3, 3, (0, 0), (2, 2), walls=[(1, 0)])
        env.reset()
        t = env.step(3)  # right into the wall
        assert t.next_state == t.state
        assert t.reward == -1.0 and not t.done

    def test_boundary_bounce(self, grid3):
        grid3.reset()
        t = grid3.step(0)  # up from the top row
        assert t.next_state == t.state

    def test_return_equals_negative_length(self, grid3):
        rng = np.random.default_rng(3)
        for _ in range(20):
            s = grid3.reset()
            transitions = []
            while not grid3.done:
                transitions.append(grid3.step(int(rng.integers(4))))
            assert sum(t.reward for t in transitions) == -len(transitions)
            assert len(transitions) <= grid3.spec.max_steps

    def test_construction_errors(self):
        with pytest.raises(ConfigError):
            tl.GridWorld(3, 3, (0, 0), (0, 0))  # start == goal
        with pytest.raises(ConfigError):
            tl.GridWorld(3, 3, (0, 0), (5, 5))  # out of bounds
        with pytest.raises(ConfigError):
            tl.GridWorld(3, 3, (0, 0), (2, 2), walls=[(2, 2)])  # goal walled
        with pytest.raises(ConfigError):
            # goal fully enclosed: flood fill must fail
            tl.GridWorld(3, 3, (0, 0), (2, 2), walls=[(1, 2), (2, 1)])

    def test_step_after_done_is_distinct_error(self, grid1x2):
        grid1x2.reset()
        grid1x2.step(3)
        with pytest.raises(EpisodeFinishedError):
            grid1x2.step(3)
        grid1x2.reset()
        with pytest.raises(ValueError):
            grid1x2.step(9)

    def test_replay_determinism(self, grid5):
        rng = np.random.default_rng(11)
        actions = [int(rng.integers(4)) for _ in range(40)]
        def run():
            out = []
            grid5.reset()
            for a in actions:
                if grid5.done:
                    break
                out.append(grid5.step(a))
            return out
        assert run() == run()

    def test_config_hash_sensitivity(self):
        a = tl.GridWorld(3, 3, (0, 0), (2, 2))
        b = tl.GridWorld(3, 3, (0, 0), (2, 2))
        c = tl.GridWorld(3, 3, (0, 0), (2, 1))
        assert a.config_hash == b.config_hash
        assert a.config_hash != c.config_hash


# ---------------------------------------------------------------------------
# mini-lander
# ---------------------------------------------------------------------------

class TestMiniLander:
    def test_degenerate_start_is_immediate_safe_landing(self):
        env = tl.MiniLander(start_altitude=0.0)
        env.reset()
        t = env.step(0)
        assert t.done and t.reward == 100.0
        assert env.terminal_kind(t) == "landed"

    def test_always_noop_crashes(self, lander):
        lander.reset()
        transitions = []
        while not lander.done:
            transitions.append(lander.step(0))
        assert transitions[-1].reward == -100.0
        assert lander.terminal_kind(transitions[-1]) == "crashed"

    def test_value_iteration_optimum_is_achieved_by_greedy(self, lander):
        q = tl.value_iteration(lander, gamma=0.9, tolerance=1e-12)
        s = lander.reset()
        transitions = []
        while not lander.done:
            t = lander.step(q.greedy_action(s))
            transitions.append(t)
            s = t.next_state
        assert lander.terminal_kind(transitions[-1]) == "landed"
        # discounted return of the rollout must equal the oracle value of
        # the start state (deterministic MDP, exact dynamic programming)
        ret = 0.0
        for t in reversed(transitions):
            ret = t.reward + 0.9 * ret
        start = tl.MiniLander(start_altitude=13.0, max_steps=80).reset()
        assert abs(ret - q.state_value(start)) < 1e-6

    def test_transition_table_matches_hand_integration(self, lander):
        d = lander.discretizer
        # three states integrated by hand from their cell representatives:
        # gravity 0.8, thrust 1.6, dt 1, h then advances by the new velocity
        cases = [
            # (h, v), action 0: v' = v - 0.8, h' = h + v'
            ((9.75, 0.0), 0),
            ((9.75, 0.0), 1),   # thrust: v' = v + 0.8
            ((0.75, -1.0), 0),  # noop near ground: touchdown at v' = -1.8
        ]
        for (h, v), action in cases:
            state = d.discretize((h, v))
            assert d.representative(state) == (h, v)
            accel = (1.6 if action == 1 else 0.0) - 0.8
            v2 = v + accel
            h2 = h + v2
            reward, next_state, terminal = lander.transition_model(state, action)
            if h2 <= 0:
                assert terminal
                expected = 100.0 if abs(v2) <= 1.0 else -100.0
                assert reward == expected
                assert next_state == d.discretize((0.0, v2))
            else:
                assert not terminal
                assert reward == -0.1
                assert next_state == d.discretize((h2, v2))

    def test_cap_ends_episode_without_bonus(self):
        env = tl.MiniLander(start_altitude=13.0, max_steps=5)
        env.reset()
        transitions = []
        while not env.done:
            transitions.append(env.step(1))  # thrust forever: never lands
        assert len(transitions) == 5
        assert transitions[-1].reward == -0.1
        assert env.terminal_kind(transitions[-1]) == "cap"

    def test_construction_errors(self):
        with pytest.raises(ConfigError):
            tl.MiniLander(gravity=0.0)
        with pytest.raises(ConfigError):
            tl.MiniLander(gravity=1.0, thrust=0.5)  # thrust below gravity
        with pytest.raises(ConfigError):
            tl.MiniLander(bins_h=3)
        with pytest.raises(ConfigError):
            tl.MiniLander(safe_speed=0.0)

    def test_replay_determinism(self, lander):
        actions = [0, 1, 0, 0, 1, 1, 1, 0, 1, 1, 0, 1]
        def run():
            out = []
            env = tl.MiniLander(start_altitude=13.0, max_steps=80)
            env.reset()
            for a in actions:
                if env.done:
                    break
                out.append(env.step(a))
            return out
        assert run() == run()


# ---------------------------------------------------------------------------
# discretizer
# ---------------------------------------------------------------------------

class TestDiscretizer:
    def test_edge_value_goes_to_higher_bin(self):
        d = tl.Discretizer([0.0], [4.0], [4])  # edges at 1, 2, 3
        assert d.bin_index(0, 1.0) == 1
        assert d.bin_index(0, 2.0) == 2
        assert d.bin_index(0, 0.999999) == 0

    def test_clamping(self):
        d = tl.Discretizer([0.0], [4.0], [4])
        assert d.bin_index(0, -100.0) == 0
        assert d.bin_index(0, 100.0) == 3

    def test_row_major_cell_ids_by_exhaustive_enumeration(self):
        d = tl.Discretizer([0.0, 0.0], [3.0, 4.0], [3, 4])
        # oracle: enumerate every (i, j) pair and check id = i * 4 + j
        seen = set()
        for i in range(3):
            for j in range(4):
                obs = (0.5 + i, 0.5 + j)
                cell = d.discretize(obs)
                assert cell == i * 4 + j
                assert d.bin_indices(cell) == (i, j)
                seen.add(cell)
        assert seen == set(range(12))
        assert d.cell_count == 12

    def test_dimension_mismatch(self):
        d = tl.Discretizer([0.0, 0.0], [1.0, 1.0], [2, 2])
        with pytest.raises(ValueError):
            d.discretize((0.5,))

    @settings(max_examples=60, deadline=None)
    @given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
           st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
    def test_total_function(self, a, b):
        d = tl.Discretizer([-10.0, -5.0], [10.0, 5.0], [7, 5])
        cell = d.discretize((a, b))
        assert 0 <= cell < d.cell_count

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=34))
    def test_idempotent_on_representatives(self, cell):
        d = tl.Discretizer([-10.0, -5.0], [10.0, 5.0], [7, 5])
        assert d.discretize(d.representative(cell)) == cell


def test_config_file_round_trip(tmp_path):
    cfg_path = tmp_path / "env.cfg"
    cfg_path.write_text(
        "# comment\n"
        "env = grid\n"
        "width = 3\n"
        "height = 3\n"
        "start = 0,0\n"
        "goal = 2,2\n"
        "walls = 1,0\n"
        "max_steps = 20\n"
    )
    env = tl.build_env(tl.envs.parse_config_file(cfg_path))
    assert isinstance(env, tl.GridWorld)
    assert env.walls == frozenset({(1, 0)})
    assert env.spec.max_steps == 20
    rebuilt = tl.build_env(dict(env.config_descriptor()))
    assert rebuilt.config_hash == env.config_hash


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("env grid\n")
    with pytest.raises(ConfigError):
        tl.envs.parse_config_file(bad)
    with pytest.raises(ConfigError):
        tl.build_env({"env": "rocketship"})
