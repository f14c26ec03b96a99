"""Forbid-one-action counterfactual rollouts and contrastive comparison.

For a target trajectory, each step index i and each action other than the
original a_i yields one rollout: the original prefix is replayed, the
alternative action is forced at step i, and the greedy policy under the
analysis Q-table runs the episode to termination or the step cap.  Because
the environments are deterministic the whole set is an exact function of
(env config, Q-table, target).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .agent import QTable
from .envs import Env, Transition
from .errors import ConfigError, DataError, ReplayDivergenceError
from .trajstore import Trajectory

CFSET_FORMAT = "cfset"
CFSET_VERSION = 1


@dataclass(frozen=True)
class Outcome:
    total_reward: float
    length: int
    terminal: str

    def to_json_dict(self) -> dict:
        return {"total_reward": self.total_reward, "length": self.length,
                "terminal": self.terminal}

    @classmethod
    def from_json_dict(cls, raw: dict) -> "Outcome":
        return cls(float(raw["total_reward"]), int(raw["length"]), str(raw["terminal"]))


@dataclass
class CounterfactualRollout:
    deviation_step: int
    forced_action: int
    trajectory: Trajectory
    outcome: Outcome

    def to_json_dict(self) -> dict:
        return {
            "deviation_step": self.deviation_step,
            "forced_action": self.forced_action,
            "transitions": [t.to_list() for t in self.trajectory.transitions],
            "outcome": self.outcome.to_json_dict(),
        }


@dataclass
class CounterfactualSet:
    original_id: str
    original_outcome: Outcome
    rollouts: list[CounterfactualRollout]
    config_hash: str
    seed: int
    budget: int | None
    stride: int
    dominance_reward: float
    dominance_length: float

    def to_json_dict(self) -> dict:
        return {
            "format": CFSET_FORMAT,
            "version": CFSET_VERSION,
            "original_id": self.original_id,
            "original_outcome": self.original_outcome.to_json_dict(),
            "config_hash": self.config_hash,
            "seed": self.seed,
            "budget": self.budget,
            "stride": self.stride,
            "dominance_reward": self.dominance_reward,
            "dominance_length": self.dominance_length,
            "rollouts": [r.to_json_dict() for r in self.rollouts],
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")


def load_cfset(path) -> CounterfactualSet:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    if raw.get("format") != CFSET_FORMAT:
        raise DataError(f"{path}: not a counterfactual set")
    if raw.get("version") != CFSET_VERSION:
        raise DataError(f"{path}: unsupported version {raw.get('version')}")
    rollouts = []
    for entry in raw["rollouts"]:
        transitions = [Transition.from_list(row) for row in entry["transitions"]]
        traj = Trajectory.from_transitions(
            f"{raw['original_id']}-cf{entry['deviation_step']}a{entry['forced_action']}",
            transitions, 1.0, int(raw.get("seed", 0)))
        rollouts.append(CounterfactualRollout(
            deviation_step=int(entry["deviation_step"]),
            forced_action=int(entry["forced_action"]),
            trajectory=traj,
            outcome=Outcome.from_json_dict(entry["outcome"]),
        ))
    return CounterfactualSet(
        original_id=str(raw["original_id"]),
        original_outcome=Outcome.from_json_dict(raw["original_outcome"]),
        rollouts=rollouts,
        config_hash=str(raw["config_hash"]),
        seed=int(raw.get("seed", 0)),
        budget=raw.get("budget"),
        stride=int(raw.get("stride", 1)),
        dominance_reward=float(raw["dominance_reward"]),
        dominance_length=float(raw["dominance_length"]),
    )


def verify_replay(env: Env, target: Trajectory) -> None:
    """Replay the target's actions from reset and demand bit-equality.

    Raises ReplayDivergenceError with the first divergent step index when the
    trajectory does not belong to this environment configuration.
    """
    env.reset()
    for i, expected in enumerate(target.transitions):
        if env.done:
            raise ReplayDivergenceError(i, "environment terminated early")
        actual = env.step(expected.action)
        if actual != expected:
            raise ReplayDivergenceError(i, f"expected {expected}, got {actual}")


def _replay_prefix(env: Env, target: Trajectory, steps: int) -> int:
    state = env.reset()
    for t in target.transitions[:steps]:
        state = env.step(t.action).next_state
    return state


def outcome_of(env: Env, transitions: list[Transition]) -> Outcome:
    total = float(sum(t.reward for t in transitions))
    kind = env.terminal_kind(transitions[-1]) or "cap"
    return Outcome(total, len(transitions), kind)


def single_rollout(env: Env, q: QTable, target: Trajectory,
                   step: int, action: int) -> CounterfactualRollout:
    """One counterfactual: replay prefix [0..step), force ``action``, then
    follow the greedy policy to termination or the step cap."""
    if not 0 <= step < target.length:
        raise ConfigError(f"deviation step {step} out of range [0, {target.length})")
    original_action = target.transitions[step].action
    if action == original_action:
        raise ConfigError(f"action {action} equals the original at step {step}")
    if not 0 <= action < env.spec.action_count:
        raise ConfigError(f"invalid action {action}")
    state = _replay_prefix(env, target, step)
    transitions: list[Transition] = list(target.transitions[:step])
    t = env.step(action)
    transitions.append(t)
    state = t.next_state
    while not env.done:
        t = env.step(q.greedy_action(state))
        transitions.append(t)
        state = t.next_state
    traj = Trajectory.from_transitions(
        f"{target.id}-cf{step}a{action}", transitions, 1.0, target.seed)
    return CounterfactualRollout(step, action, traj, outcome_of(env, transitions))


def deviation_steps(length: int, action_count: int, budget: int | None) -> tuple[list[int], int]:
    """Deviation step indices under an optional rollout budget.

    Without a budget every step deviates.  With one, steps are subsampled at
    a fixed stride so the rollout count stays within budget; the stride is
    returned for the output record.
    """
    per_step = action_count - 1
    if budget is None or length * per_step <= budget:
        return list(range(length)), 1
    max_steps = max(1, budget // per_step)
    stride = math.ceil(length / max_steps)
    return list(range(0, length, stride)), stride


def generate(env: Env, q: QTable, target: Trajectory,
             budget: int | None = None, seed: int = 0) -> CounterfactualSet:
    """Exhaustive counterfactual set for ``target``.

    The target must replay exactly on ``env`` (checked first).  Rollouts are
    ordered by (deviation step, forced action).  ``seed`` is recorded for
    provenance; generation itself is deterministic.
    """
    if q.config_hash != env.config_hash:
        raise DataError("Q-table config hash does not match the environment")
    verify_replay(env, target)
    original = outcome_of(env, target.transitions)
    steps, stride = deviation_steps(target.length, env.spec.action_count, budget)
    rollouts: list[CounterfactualRollout] = []
    for i in steps:
        original_action = target.transitions[i].action
        for a in range(env.spec.action_count):
            if a == original_action:
                continue
            rollouts.append(single_rollout(env, q, target, i, a))
    if not rollouts:
        raise ConfigError("no counterfactual rollouts were generated")
    worse_reward = sum(1 for r in rollouts if r.outcome.total_reward <= original.total_reward)
    worse_length = sum(1 for r in rollouts if r.outcome.length >= original.length)
    return CounterfactualSet(
        original_id=target.id,
        original_outcome=original,
        rollouts=rollouts,
        config_hash=env.config_hash,
        seed=seed,
        budget=budget,
        stride=stride,
        dominance_reward=worse_reward / len(rollouts),
        dominance_length=worse_length / len(rollouts),
    )


@dataclass
class ContrastiveSummary:
    """Per-rollout deltas against the original plus histogram-ready arrays."""

    original_id: str
    original_reward: float
    original_length: int
    rows: list[dict]
    dominance_reward: float
    dominance_length: float
    lengths: list[int]
    rewards: list[float]

    def to_json_dict(self) -> dict:
        return {
            "original_id": self.original_id,
            "original_reward": self.original_reward,
            "original_length": self.original_length,
            "dominance_reward": self.dominance_reward,
            "dominance_length": self.dominance_length,
            "rows": self.rows,
        }


def compare(cfset: CounterfactualSet) -> ContrastiveSummary:
    """Contrast every rollout with the original trajectory."""
    if not cfset.rollouts:
        raise ConfigError("cannot compare an empty counterfactual set")
    orig = cfset.original_outcome
    rows = []
    for r in cfset.rollouts:
        rows.append({
            "deviation_step": r.deviation_step,
            "forced_action": r.forced_action,
            "length": r.outcome.length,
            "reward": r.outcome.total_reward,
            "terminal": r.outcome.terminal,
            "length_delta": r.outcome.length - orig.length,
            "reward_delta": r.outcome.total_reward - orig.total_reward,
        })
    return ContrastiveSummary(
        original_id=cfset.original_id,
        original_reward=orig.total_reward,
        original_length=orig.length,
        rows=rows,
        dominance_reward=cfset.dominance_reward,
        dominance_length=cfset.dominance_length,
        lengths=[r.outcome.length for r in cfset.rollouts],
        rewards=[r.outcome.total_reward for r in cfset.rollouts],
    )
