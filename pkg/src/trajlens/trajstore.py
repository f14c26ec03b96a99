"""Trajectory collection and JSONL persistence.

Datasets mix rollouts from several training checkpoints so they contain
both polished and clumsy behavior.  Files are one JSON object per line with
a self-describing header record, which keeps them streamable and diffable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .agent import Checkpoint, QTable, derive_seed
from .envs import Env, Transition
from .errors import ConfigError, DataError, InvariantViolation

DATASET_FORMAT = "traj.jsonl"
DATASET_VERSION = 1


@dataclass
class Trajectory:
    """One episode: an ordered transition chain plus collection metadata."""

    id: str
    transitions: list[Transition]
    checkpoint_fraction: float
    seed: int
    total_reward: float
    length: int

    @classmethod
    def from_transitions(cls, tid: str, transitions: list[Transition],
                         checkpoint_fraction: float, seed: int) -> "Trajectory":
        return cls(
            id=tid,
            transitions=list(transitions),
            checkpoint_fraction=checkpoint_fraction,
            seed=seed,
            total_reward=float(sum(t.reward for t in transitions)),
            length=len(transitions),
        )

    def validate(self) -> None:
        """Recompute derived fields and check the chain invariant."""
        if self.length != len(self.transitions):
            raise InvariantViolation(f"{self.id}: length {self.length} != "
                                     f"{len(self.transitions)} transitions")
        total = float(sum(t.reward for t in self.transitions))
        if total != self.total_reward:
            raise InvariantViolation(f"{self.id}: total_reward {self.total_reward} "
                                     f"!= recomputed {total}")
        if not 0.0 < self.checkpoint_fraction <= 1.0:
            raise InvariantViolation(f"{self.id}: checkpoint_fraction out of (0, 1]")
        for i in range(len(self.transitions) - 1):
            if self.transitions[i].next_state != self.transitions[i + 1].state:
                raise InvariantViolation(
                    f"{self.id}: chain broken between steps {i} and {i + 1}")
            if self.transitions[i].done:
                raise InvariantViolation(f"{self.id}: done=true before the final step")

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "checkpoint_fraction": self.checkpoint_fraction,
            "seed": self.seed,
            "total_reward": self.total_reward,
            "length": self.length,
            "transitions": [t.to_list() for t in self.transitions],
        }

    @classmethod
    def from_json_dict(cls, raw: dict) -> "Trajectory":
        return cls(
            id=str(raw["id"]),
            transitions=[Transition.from_list(row) for row in raw["transitions"]],
            checkpoint_fraction=float(raw["checkpoint_fraction"]),
            seed=int(raw["seed"]),
            total_reward=float(raw["total_reward"]),
            length=int(raw["length"]),
        )


@dataclass
class Dataset:
    """Trajectories sharing one environment configuration."""

    trajectories: list[Trajectory]
    env_name: str
    config_hash: str
    seed: int = 0
    qtable: QTable | None = None
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {t.id: i for i, t in enumerate(self.trajectories)}
        if len(self.index) != len(self.trajectories):
            raise InvariantViolation("duplicate trajectory ids in dataset")

    def __len__(self) -> int:
        return len(self.trajectories)

    def get(self, tid: str) -> Trajectory:
        if tid not in self.index:
            raise KeyError(tid)
        return self.trajectories[self.index[tid]]

    def validate(self) -> None:
        if not self.trajectories:
            raise InvariantViolation("dataset is empty")
        for traj in self.trajectories:
            traj.validate()

    def attach_qtable(self, qtable: QTable) -> None:
        if qtable.config_hash != self.config_hash:
            raise DataError(
                "config hash mismatch: dataset was collected on "
                f"{self.config_hash[:12]}..., Q-table belongs to "
                f"{qtable.config_hash[:12]}...")
        self.qtable = qtable


def best_outcome_index(trajectories: list[Trajectory]) -> int:
    """Index of the best-outcome trajectory.

    Best outcome means maximal total reward, then minimal length, then the
    lowest index; the same rule the explanation-target selection uses.
    """
    if not trajectories:
        raise ConfigError("no trajectories to choose from")
    best = 0
    for i in range(1, len(trajectories)):
        cand, cur = trajectories[i], trajectories[best]
        if (cand.total_reward, -cand.length) > (cur.total_reward, -cur.length):
            best = i
    return best


def collect(
    env: Env,
    checkpoints: list[Checkpoint],
    episodes_per_checkpoint: int,
    *,
    rollout_mode: str = "epsilon",
    epsilon: float = 0.1,
    seed: int = 0,
) -> Dataset:
    """Roll out episodes from each checkpoint's Q-table.

    ``rollout_mode`` is either ``"greedy"`` or ``"epsilon"`` (epsilon-greedy
    with the given epsilon).  Everything is driven by one RNG derived from
    ``seed``, so the dataset is a pure function of (env config, checkpoints,
    arguments).
    """
    if not checkpoints:
        raise ConfigError("need at least one checkpoint to collect from")
    if episodes_per_checkpoint < 1:
        raise ConfigError("episodes_per_checkpoint must be >= 1")
    if rollout_mode not in ("greedy", "epsilon"):
        raise ConfigError(f"unknown rollout mode {rollout_mode!r}")
    if rollout_mode == "epsilon" and not 0.0 <= epsilon <= 1.0:
        raise ConfigError("epsilon must be in [0, 1]")

    rng = np.random.default_rng(derive_seed(seed, "collect"))
    trajectories: list[Trajectory] = []
    for ckpt in checkpoints:
        if ckpt.qtable.config_hash != env.config_hash:
            raise DataError("checkpoint Q-table does not match the environment config")
        tag = f"cp{round(ckpt.fraction * 100):03d}"
        for episode in range(episodes_per_checkpoint):
            state = env.reset()
            transitions: list[Transition] = []
            while not env.done:
                if rollout_mode == "epsilon" and rng.random() < epsilon:
                    action = int(rng.integers(env.spec.action_count))
                else:
                    action = ckpt.qtable.greedy_action(state)
                t = env.step(action)
                transitions.append(t)
                state = t.next_state
            trajectories.append(Trajectory.from_transitions(
                f"{tag}-e{episode:03d}", transitions, ckpt.fraction, seed))
    return Dataset(trajectories, env.spec.name, env.config_hash, seed=seed)


def save_dataset(dataset: Dataset, path) -> None:
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "env": dataset.env_name,
        "config_hash": dataset.config_hash,
        "seed": dataset.seed,
        "trajectory_count": len(dataset.trajectories),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for traj in dataset.trajectories:
            fh.write(json.dumps(traj.to_json_dict(), sort_keys=True,
                                separators=(",", ":")) + "\n")


def load_dataset(path, qtable: QTable | None = None) -> Dataset:
    """Load and fully validate a ``.traj.jsonl`` file.

    Malformed lines are reported with their line number.  If ``qtable`` is
    given its config hash must match the file header.
    """
    trajectories: list[Trajectory] = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON line: {exc}") from exc
            if lineno == 1:
                header = obj
                if header.get("format") != DATASET_FORMAT:
                    raise DataError(f"{path}:1: not a trajectory dataset")
                if header.get("version") != DATASET_VERSION:
                    raise DataError(f"{path}:1: unsupported version "
                                    f"{header.get('version')}")
                continue
            try:
                trajectories.append(Trajectory.from_json_dict(obj))
            except (KeyError, ValueError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad trajectory record: {exc}") from exc
    if header is None:
        raise DataError(f"{path}: empty file")
    expected = header.get("trajectory_count")
    if expected is not None and expected != len(trajectories):
        raise DataError(f"{path}: header promises {expected} trajectories, "
                        f"found {len(trajectories)} (truncated file?)")
    dataset = Dataset(trajectories, header.get("env", ""), header.get("config_hash", ""),
                      seed=int(header.get("seed", 0)))
    dataset.validate()
    if qtable is not None:
        dataset.attach_qtable(qtable)
    return dataset
