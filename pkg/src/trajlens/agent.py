"""Tabular Q-learning and the exact dynamic-programming oracle.

The trainer produces a dense ``QTable`` plus frozen copies at checkpoint
fractions; the oracle solves the same MDP by value iteration so tests and
acceptance checks can compare the two.  Both live here on purpose: they are
independent routes to the same values and must stay independent.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .envs import Env
from .errors import ConfigError, DataError, OracleConvergenceError

QTABLE_FORMAT = "qtable"
QTABLE_VERSION = 1


def derive_seed(base: int, stage: str) -> int:
    """Stage-keyed seed derivation so pipeline stages draw independent
    streams from one user-facing seed."""
    digest = hashlib.sha256(f"{base}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class QTable:
    """Dense action-value table for one environment configuration."""

    values: np.ndarray
    visit_counts: np.ndarray
    gamma: float
    env_name: str
    config_hash: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.visit_counts = np.asarray(self.visit_counts, dtype=np.int64)
        if self.values.ndim != 2:
            raise ConfigError("Q-table must be 2-D (states x actions)")
        if self.values.shape != self.visit_counts.shape:
            raise ConfigError("values and visit_counts must share a shape")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must be in (0, 1]")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("Q-table contains non-finite entries")

    @classmethod
    def zeros(cls, state_count: int, action_count: int, gamma: float,
              env_name: str, config_hash: str) -> "QTable":
        return cls(
            values=np.zeros((state_count, action_count)),
            visit_counts=np.zeros((state_count, action_count), dtype=np.int64),
            gamma=gamma,
            env_name=env_name,
            config_hash=config_hash,
        )

    @property
    def state_count(self) -> int:
        return self.values.shape[0]

    @property
    def action_count(self) -> int:
        return self.values.shape[1]

    def row(self, state: int) -> np.ndarray:
        return self.values[state]

    def greedy_action(self, state: int) -> int:
        # ties break to the lowest action index
        return int(np.argmax(self.values[state]))

    def state_value(self, state: int) -> float:
        return float(np.max(self.values[state]))

    def copy(self) -> "QTable":
        return QTable(self.values.copy(), self.visit_counts.copy(),
                      self.gamma, self.env_name, self.config_hash)

    # -- persistence ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "format": QTABLE_FORMAT,
            "version": QTABLE_VERSION,
            "env": self.env_name,
            "config_hash": self.config_hash,
            "gamma": self.gamma,
            "shape": list(self.values.shape),
            "values": [float(x) for x in self.values.ravel()],
            "visit_counts": [int(x) for x in self.visit_counts.ravel()],
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "QTable":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON: {exc}") from exc
        if raw.get("format") != QTABLE_FORMAT:
            raise DataError(f"{path}: not a Q-table dump")
        if raw.get("version") != QTABLE_VERSION:
            raise DataError(f"{path}: unsupported version {raw.get('version')}")
        shape = tuple(raw["shape"])
        values = np.array(raw["values"], dtype=np.float64).reshape(shape)
        counts = np.array(raw["visit_counts"], dtype=np.int64).reshape(shape)
        return cls(values, counts, float(raw["gamma"]), raw["env"], raw["config_hash"])


class PolicySnapshot:
    """Frozen softmax/greedy view over a Q-table."""

    def __init__(self, qtable: QTable, temperature: float = 1.0):
        if temperature <= 0:
            raise ConfigError("softmax temperature must be positive")
        self.qtable = qtable
        self.temperature = float(temperature)

    def probabilities(self, state: int) -> np.ndarray:
        logits = self.qtable.row(state) / self.temperature
        logits = logits - np.max(logits)
        exp = np.exp(logits)
        return exp / np.sum(exp)

    def greedy_action(self, state: int) -> int:
        return self.qtable.greedy_action(state)


class ValueView:
    """Greedy state values V(s) = max_a Q(s, a), with cached extremes."""

    def __init__(self, qtable: QTable):
        self.qtable = qtable
        self._v = np.max(qtable.values, axis=1)
        self.v_min = float(np.min(self._v))
        self.v_max = float(np.max(self._v))

    def value(self, state: int) -> float:
        return float(self._v[state])


def greedy_action(policy: PolicySnapshot, state: int) -> int:
    """Lowest-index argmax action for ``state``."""
    return policy.greedy_action(state)


@dataclass
class Checkpoint:
    fraction: float
    qtable: QTable


@dataclass
class TrainResult:
    final: QTable
    checkpoints: list[Checkpoint] = field(default_factory=list)


DEFAULT_CHECKPOINT_FRACTIONS = (0.1, 0.25, 0.5, 0.75, 1.0)


def train(
    env: Env,
    episodes: int,
    alpha: float,
    gamma: float,
    *,
    eps_start: float = 1.0,
    eps_end: float = 0.05,
    checkpoint_fractions=DEFAULT_CHECKPOINT_FRACTIONS,
    seed: int = 0,
) -> TrainResult:
    """Run epsilon-greedy tabular Q-learning.

    Exploration decays linearly from ``eps_start`` to ``eps_end`` over the
    episode count.  Episodes truncated by the step cap bootstrap from the
    final state (the cap is a truncation, not part of the MDP), while true
    terminals do not.  The run is reproducible from ``seed``.
    """
    if episodes < 1:
        raise ConfigError("episodes must be >= 1")
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("alpha must be in (0, 1]")
    if not 0.0 < gamma <= 1.0:
        raise ConfigError("gamma must be in (0, 1]")
    fractions = sorted(set(float(f) for f in checkpoint_fractions))
    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise ConfigError("checkpoint fractions must lie in (0, 1]")

    rng = np.random.default_rng(derive_seed(seed, "train"))
    q = QTable.zeros(env.spec.state_count, env.spec.action_count,
                     gamma, env.spec.name, env.config_hash)
    marks = {max(1, round(f * episodes)): f for f in fractions}
    checkpoints: list[Checkpoint] = []

    for episode in range(episodes):
        eps = eps_start if episodes == 1 else (
            eps_start + (eps_end - eps_start) * episode / (episodes - 1)
        )
        state = env.reset()
        while not env.done:
            if rng.random() < eps:
                action = int(rng.integers(env.spec.action_count))
            else:
                action = q.greedy_action(state)
            t = env.step(action)
            true_terminal = t.done and env.terminal_kind(t) != "cap"
            bootstrap = 0.0 if true_terminal else q.state_value(t.next_state)
            target = t.reward + gamma * bootstrap
            q.values[t.state, t.action] += alpha * (target - q.values[t.state, t.action])
            q.visit_counts[t.state, t.action] += 1
            state = t.next_state
        done_count = episode + 1
        if done_count in marks:
            checkpoints.append(Checkpoint(marks[done_count], q.copy()))

    return TrainResult(final=q.copy(), checkpoints=checkpoints)


def value_iteration(
    env: Env,
    gamma: float,
    tolerance: float = 1e-9,
    max_sweeps: int = 100_000,
) -> QTable:
    """Exact Q* for any built-in environment via synchronous value iteration.

    Converges when the sup-norm change of a sweep drops below ``tolerance``;
    raises OracleConvergenceError (with the residual) if the sweep cap is
    hit first.
    """
    if not 0.0 < gamma <= 1.0:
        raise ConfigError("gamma must be in (0, 1]")
    states = env.model_states()
    n_states = env.spec.state_count
    n_actions = env.spec.action_count

    # precompute the deterministic model once
    rewards = np.zeros((n_states, n_actions))
    nexts = np.zeros((n_states, n_actions), dtype=np.int64)
    terminals = np.zeros((n_states, n_actions), dtype=bool)
    source = np.zeros(n_states, dtype=bool)
    for s in states:
        source[s] = True
        for a in range(n_actions):
            r, ns, term = env.transition_model(s, a)
            rewards[s, a] = r
            nexts[s, a] = ns
            terminals[s, a] = term

    q = np.zeros((n_states, n_actions))
    residual = np.inf
    for _ in range(max_sweeps):
        v = np.max(q, axis=1)
        target = rewards + gamma * np.where(terminals, 0.0, v[nexts])
        target[~source] = 0.0
        residual = float(np.max(np.abs(target - q)))
        q = target
        if residual < tolerance:
            return QTable(
                values=q,
                visit_counts=np.zeros_like(q, dtype=np.int64),
                gamma=gamma,
                env_name=env.spec.name,
                config_hash=env.config_hash,
            )
    raise OracleConvergenceError(residual, max_sweeps)
