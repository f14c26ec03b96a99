"""Ranking order, tie-breaking, and explanation-target selection."""

import math

import numpy as np
import pytest

import trajlens as tl
from trajlens.agent import QTable
from trajlens.errors import ConfigError
from trajlens.importance import MetricConfig, RadicalKind
from trajlens.ranking import rank, select_explanation_target
from trajlens.trajstore import Dataset, Trajectory


def _dataset_with_scores(scores, lengths=None, rewards=None):
    """Single-step trajectories whose classic importance equals ``scores``."""
    lengths = lengths or [1] * len(scores)
    rewards = rewards or [-1.0] * len(scores)
    rows = [[s, 0.0] for s in scores]
    q = QTable(np.array(rows), np.zeros((len(scores), 2), dtype=np.int64),
               0.9, "grid", "h")
    trajs = []
    for i, (score, length, reward) in enumerate(zip(scores, lengths, rewards)):
        transitions = [tl.Transition(i, 0, reward / length, i, step == length - 1)
                       for step in range(length)]
        trajs.append(Trajectory(f"t{i}", transitions, 1.0, 0,
                                float(reward), length))
    return Dataset(trajs, "grid", "h"), q


def test_descending_order_with_index_tie_break():
    ds, q = _dataset_with_scores([3.2, 5.1, 5.1, 0.4])
    report = rank(ds, q, MetricConfig(kind=RadicalKind.CLASSIC), k=2)
    assert report.top_k_ids == ["t1", "t2"]
    assert report.ranked_ids == ["t1", "t2", "t0", "t3"]
    assert report.scores == sorted(report.scores, reverse=True)


def test_k_clamps_to_dataset_size():
    ds, q = _dataset_with_scores([1.0, 2.0])
    report = rank(ds, q, MetricConfig(kind=RadicalKind.CLASSIC), k=10)
    assert len(report.top_k_ids) == 2


def test_empty_or_bad_k_rejected():
    ds, q = _dataset_with_scores([1.0])
    with pytest.raises(ConfigError):
        rank(ds, q, MetricConfig(kind=RadicalKind.CLASSIC), k=0)
    empty = Dataset([], "grid", "h")
    with pytest.raises(ConfigError):
        rank(empty, q, MetricConfig(kind=RadicalKind.CLASSIC), k=1)


def test_selection_reward_then_length_then_index():
    rewards = [-70.0, -69.0, -69.0, -72.0, -71.0]
    lengths = [71, 70, 69, 73, 72]
    ds, q = _dataset_with_scores([5, 4, 3, 2, 1], lengths, rewards)
    report = rank(ds, q, MetricConfig(kind=RadicalKind.CLASSIC), k=5)
    assert report.selected_id == "t2"  # max reward tie, then shortest
    assert select_explanation_target(report, ds) == "t2"


def test_single_element_topk_selects_it():
    ds, q = _dataset_with_scores([1.0, 9.0])
    report = rank(ds, q, MetricConfig(kind=RadicalKind.CLASSIC), k=1)
    assert report.top_k_ids == ["t1"]
    assert report.selected_id == "t1"


def test_aggregates_recomputable():
    ds, q = _dataset_with_scores([5, 4, 3], [10, 20, 30], [-10.0, -20.0, -30.0])
    report = rank(ds, q, MetricConfig(kind=RadicalKind.CLASSIC), k=2)
    members = [ds.get(t) for t in report.top_k_ids]
    assert report.avg_length == sum(t.length for t in members) / 2
    assert report.avg_reward == sum(t.total_reward for t in members) / 2


def test_permutation_changes_only_exact_ties():
    scores = [3.0, 7.0, 7.0, 1.0, 5.0]
    ds, q = _dataset_with_scores(scores)
    fwd = rank(ds, q, MetricConfig(kind=RadicalKind.CLASSIC), k=5)
    perm = [3, 1, 4, 0, 2]  # reorder the same trajectories
    ds2 = Dataset([ds.trajectories[i] for i in perm], "grid", "h")
    rev = rank(ds2, q, MetricConfig(kind=RadicalKind.CLASSIC), k=5)
    # scores in rank order are identical; only the t1/t2 tie may flip,
    # following each dataset's own index order
    assert fwd.scores == rev.scores
    assert set(fwd.top_k_ids) == set(rev.top_k_ids)
    assert fwd.ranked_ids[:2] == ["t1", "t2"]
    assert rev.ranked_ids[:2] == ["t1", "t2"]  # t1 now precedes t2 in ds2 too


def test_identical_trajectories_rank_identically_across_kinds(grid3):
    q = tl.value_iteration(grid3, gamma=0.9)
    ds = tl.collect(grid3, [tl.Checkpoint(1.0, q)], 6, rollout_mode="greedy", seed=0)
    ds.attach_qtable(q)
    classic = rank(ds, q, MetricConfig(kind=RadicalKind.CLASSIC), k=5)
    vgoal = rank(ds, q, MetricConfig(kind=RadicalKind.VGOAL), k=5)
    assert classic.top_k_ids == vgoal.top_k_ids
    assert classic.selected_id == vgoal.selected_id


def test_mini_lander_vgoal_selects_successful_landing(lander_dataset, lander_training):
    env, result = lander_training
    report = rank(lander_dataset, result.final, MetricConfig(kind=RadicalKind.VGOAL), k=5)
    target = lander_dataset.get(report.selected_id)
    assert env.terminal_kind(target.transitions[-1]) == "landed"


def test_rank_against_independent_sort(grid5_dataset, grid5_training):
    env, result = grid5_training
    metric = MetricConfig(kind=RadicalKind.VGOAL)
    report = rank(grid5_dataset, result.final, metric, k=5)
    # brute force: score each trajectory independently, then a full sort
    scored = [(tl.trajectory_importance(t, result.final, metric,
                                        goal_value=report_goal(grid5_dataset, result.final)).i_tau, i)
              for i, t in enumerate(grid5_dataset.trajectories)]
    order = sorted(range(len(scored)), key=lambda i: (-scored[i][0], i))
    expected = [grid5_dataset.trajectories[i].id for i in order]
    assert report.ranked_ids == expected


def report_goal(dataset, qtable):
    from trajlens.agent import ValueView
    from trajlens.importance import resolve_goal_value
    return resolve_goal_value(dataset, ValueView(qtable),
                              MetricConfig(kind=RadicalKind.VGOAL))


def test_report_round_trips_to_json(tmp_path, grid5_dataset, grid5_training):
    import json
    env, result = grid5_training
    report = rank(grid5_dataset, result.final, MetricConfig(kind=RadicalKind.VGOAL), k=5)
    path = tmp_path / "r.json"
    report.save(path)
    raw = json.loads(path.read_text())
    assert raw["format"] == "ranking"
    assert raw["selected_id"] == report.selected_id
    assert [e["id"] for e in raw["ranked"]] == report.ranked_ids
