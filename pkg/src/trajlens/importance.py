"""State and trajectory importance metrics.

Every metric has the shape ``importance(s, a) = delta_q(s) * radical`` where
``delta_q`` is the spread between the best and worst action value in a state
and the radical is one of several goal-affinity or confidence terms.  A
trajectory's score is the arithmetic mean of its per-step products.

The v-goal radical divides by a reference "goal value".  Two resolutions are
supported: ``trajectory`` uses the value of the trajectory's own final
decision state, ``dataset_best`` uses the final decision state of the
best-outcome trajectory in the dataset (one shared reference per analysis).
``dataset_best`` is the default: with the per-trajectory reference, episodes
that end in low-value states get their radicals inflated by the small
denominator, which rewards exactly the wrong trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .agent import PolicySnapshot, QTable, ValueView
from .envs import Transition
from .errors import ConfigError
from .trajstore import Dataset, Trajectory, best_outcome_index

SIGMA_GUARD = 1e-12
VGOAL_GUARD = 1e-6


class RadicalKind(str, Enum):
    CLASSIC = "classic"
    NAIVE = "naive"
    BELLMAN = "bellman"
    ENTROPY = "entropy"
    VNORM = "vnorm"
    VGOAL = "vgoal"
    KL = "kl"


#: metrics safe to run without the experimental flag
STANDARD_KINDS = (
    RadicalKind.CLASSIC,
    RadicalKind.NAIVE,
    RadicalKind.BELLMAN,
    RadicalKind.ENTROPY,
    RadicalKind.VNORM,
    RadicalKind.VGOAL,
)


@dataclass(frozen=True)
class MetricConfig:
    """Fully pinned metric selection for one analysis run."""

    kind: RadicalKind
    temperature: float = 1.0
    vgoal_reference: str = "dataset_best"  # or "trajectory"
    kl_reference: str | None = None
    experimental: bool = False

    def __post_init__(self):
        if self.kind == RadicalKind.KL:
            if not self.experimental:
                raise ConfigError("the KL metric is experimental; pass experimental=True")
            if not self.kl_reference:
                raise ConfigError("the KL metric requires a reference distribution")
        if self.vgoal_reference not in ("dataset_best", "trajectory"):
            raise ConfigError(f"unknown vgoal reference {self.vgoal_reference!r}")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")


@dataclass
class ImportanceBreakdown:
    """Per-step factors plus the trajectory aggregate."""

    trajectory_id: str
    kind: RadicalKind
    delta_q: list[float]
    radical: list[float]
    product: list[float]
    fallback: list[bool]
    i_tau: float
    goal_value: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "trajectory_id": self.trajectory_id,
            "kind": self.kind.value,
            "delta_q": self.delta_q,
            "radical": self.radical,
            "product": self.product,
            "fallback": self.fallback,
            "i_tau": self.i_tau,
            "goal_value": self.goal_value,
        }


# ---------------------------------------------------------------------------
# per-state / per-step terms
# ---------------------------------------------------------------------------

def delta_q(q: QTable, state: int) -> float:
    """Best-minus-worst action value; non-negative by construction."""
    row = q.row(state)
    return float(np.max(row) - np.min(row))


def radical_naive(q: QTable, state: int, action: int) -> tuple[float, bool]:
    """Z-score of the taken action within its Q-row (population std).

    Returns 0 with the fallback flag set when the row is constant.  The sign
    is kept: below-average actions score negative on purpose.
    """
    row = q.row(state)
    sigma = float(np.std(row))
    if sigma < SIGMA_GUARD:
        return 0.0, True
    return float((row[action] - np.mean(row)) / sigma), False


def radical_bellman(q: QTable, t: Transition) -> float:
    """Absolute temporal-difference error of the transition.

    The bootstrap action at the next state is the greedy one; terminal
    transitions bootstrap from zero.
    """
    bootstrap = 0.0
    if not t.done:
        a_next = q.greedy_action(t.next_state)
        bootstrap = float(q.values[t.next_state, a_next])
    target = t.reward + q.gamma * bootstrap
    return abs(float(q.values[t.state, t.action]) - target)


def entropy(probabilities: np.ndarray) -> float:
    """Shannon entropy in nats; 0 * log 0 counts as 0."""
    p = np.asarray(probabilities, dtype=np.float64)
    nonzero = p[p > 0]
    return float(-np.sum(nonzero * np.log(nonzero)))


def radical_entropy(policy: PolicySnapshot, state: int) -> float:
    """Policy decisiveness: 1 - H(pi(.|s)) / log|A|, in [0, 1]."""
    p = policy.probabilities(state)
    n = p.shape[0]
    value = 1.0 - entropy(p) / math.log(n)
    # clip float dust so the documented range holds exactly
    return float(min(1.0, max(0.0, value)))


def radical_vnorm(values: ValueView, state: int) -> tuple[float, bool]:
    """State value rescaled to [0, 1] over the table's value range."""
    span = values.v_max - values.v_min
    if span <= 0.0:
        return 0.0, True
    return float((values.value(state) - values.v_min) / span), False


def radical_vgoal(values: ValueView, state: int, goal_value: float) -> tuple[float, bool]:
    """|V(s) / V(goal reference)| with a guard for near-zero references.

    When |goal_value| < 1e-6 the ratio is undefined in practice, so the
    v-normalization form is used instead and the fallback flag is set.
    """
    if abs(goal_value) < VGOAL_GUARD:
        value, _ = radical_vnorm(values, state)
        return value, True
    return abs(values.value(state) / goal_value), False


def kl_reference_distribution(reference: str, policy: PolicySnapshot, state: int) -> np.ndarray:
    """Build the reference distribution X(s) for the KL radical."""
    n = policy.qtable.action_count
    if reference == "uniform":
        return np.full(n, 1.0 / n)
    if reference == "greedy":
        x = np.zeros(n)
        x[policy.greedy_action(state)] = 1.0
        return x
    try:
        weights = np.array([float(w) for w in reference.split(",")], dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"cannot parse KL reference {reference!r}: expected "
                          "'uniform', 'greedy', or comma-separated weights") from exc
    if weights.shape[0] != n:
        raise ConfigError(f"KL reference needs {n} weights, got {weights.shape[0]}")
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ConfigError("KL reference weights must be non-negative and sum > 0")
    return weights / weights.sum()


def radical_kl(policy: PolicySnapshot, state: int, reference: str) -> float:
    """KL(pi(.|s) || X(s)) against a named reference distribution.

    A reference that assigns zero mass to an action the policy can take is a
    usage error: the divergence is undefined there.
    """
    p = policy.probabilities(state)
    x = kl_reference_distribution(reference, policy, state)
    if np.any((x <= 0) & (p > 0)):
        raise ConfigError("KL undefined: reference gives zero probability to an "
                          "action the policy takes with positive probability")
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / x[mask])))


# ---------------------------------------------------------------------------
# combined step and trajectory scores
# ---------------------------------------------------------------------------

def step_importance(
    q: QTable,
    policy: PolicySnapshot,
    values: ValueView,
    t: Transition,
    metric: MetricConfig,
    goal_value: float | None = None,
) -> tuple[float, float, float, bool]:
    """Score one transition; returns (delta_q, radical, product, fallback)."""
    delta = delta_q(q, t.state)
    fallback = False
    kind = metric.kind
    if kind == RadicalKind.CLASSIC:
        radical = 1.0
    elif kind == RadicalKind.NAIVE:
        radical, fallback = radical_naive(q, t.state, t.action)
    elif kind == RadicalKind.BELLMAN:
        radical = radical_bellman(q, t)
    elif kind == RadicalKind.ENTROPY:
        radical = radical_entropy(policy, t.state)
    elif kind == RadicalKind.VNORM:
        radical, fallback = radical_vnorm(values, t.state)
    elif kind == RadicalKind.VGOAL:
        if goal_value is None:
            raise ConfigError("vgoal scoring needs a resolved goal value")
        radical, fallback = radical_vgoal(values, t.state, goal_value)
    elif kind == RadicalKind.KL:
        radical = radical_kl(policy, t.state, metric.kl_reference)
    else:  # pragma: no cover - enum is closed
        raise ConfigError(f"unhandled metric kind {kind}")
    return delta, radical, delta * radical, fallback


def trajectory_importance(
    traj: Trajectory,
    q: QTable,
    metric: MetricConfig,
    *,
    policy: PolicySnapshot | None = None,
    values: ValueView | None = None,
    goal_value: float | None = None,
) -> ImportanceBreakdown:
    """Mean per-step importance with every factor retained.

    For the v-goal metric in ``trajectory`` reference mode the goal value is
    the value of this trajectory's final decision state; in ``dataset_best``
    mode the caller passes the shared reference (see ``score_dataset``).
    """
    if not traj.transitions:
        raise ConfigError(f"trajectory {traj.id} is empty")
    policy = policy or PolicySnapshot(q, metric.temperature)
    values = values or ValueView(q)
    if metric.kind == RadicalKind.VGOAL and goal_value is None:
        if metric.vgoal_reference != "trajectory":
            raise ConfigError("dataset_best vgoal reference requires a resolved "
                              "goal value; score via score_dataset()")
        goal_value = values.value(traj.transitions[-1].state)

    deltas: list[float] = []
    radicals: list[float] = []
    products: list[float] = []
    flags: list[bool] = []
    for t in traj.transitions:
        d, r, p, fb = step_importance(q, policy, values, t, metric, goal_value)
        deltas.append(d)
        radicals.append(r)
        products.append(p)
        flags.append(fb)
    i_tau = float(sum(products) / len(products))
    return ImportanceBreakdown(
        trajectory_id=traj.id,
        kind=metric.kind,
        delta_q=deltas,
        radical=radicals,
        product=products,
        fallback=flags,
        i_tau=i_tau,
        goal_value=goal_value if metric.kind == RadicalKind.VGOAL else None,
    )


def resolve_goal_value(dataset: Dataset, values: ValueView, metric: MetricConfig) -> float | None:
    """Shared v-goal reference for ``dataset_best`` mode, else None."""
    if metric.kind != RadicalKind.VGOAL or metric.vgoal_reference != "dataset_best":
        return None
    best = dataset.trajectories[best_outcome_index(dataset.trajectories)]
    return values.value(best.transitions[-1].state)


def score_dataset(
    dataset: Dataset,
    q: QTable,
    metric: MetricConfig,
) -> list[ImportanceBreakdown]:
    """Score every trajectory in the dataset under one metric."""
    if not dataset.trajectories:
        raise ConfigError("cannot score an empty dataset")
    policy = PolicySnapshot(q, metric.temperature)
    values = ValueView(q)
    goal_value = resolve_goal_value(dataset, values, metric)
    return [
        trajectory_importance(t, q, metric, policy=policy, values=values,
                              goal_value=goal_value)
        for t in dataset.trajectories
    ]
