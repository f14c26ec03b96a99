"""Trajectory ranking and explanation-target selection."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .agent import QTable
from .errors import ConfigError
from .importance import ImportanceBreakdown, MetricConfig, score_dataset
from .trajstore import Dataset, best_outcome_index

RANKING_FORMAT = "ranking"
RANKING_VERSION = 1


@dataclass
class RankingReport:
    """Descending score order plus top-k aggregates for one metric."""

    metric: MetricConfig
    k: int
    ranked_ids: list[str]
    scores: list[float]
    top_k_ids: list[str]
    selected_id: str
    avg_length: float
    avg_reward: float
    config_hash: str
    dataset_seed: int

    def to_json_dict(self) -> dict:
        return {
            "format": RANKING_FORMAT,
            "version": RANKING_VERSION,
            "metric": self.metric.kind.value,
            "k": self.k,
            "config_hash": self.config_hash,
            "dataset_seed": self.dataset_seed,
            "ranked": [{"id": tid, "score": score}
                       for tid, score in zip(self.ranked_ids, self.scores)],
            "top_k": self.top_k_ids,
            "selected_id": self.selected_id,
            "avg_length": self.avg_length,
            "avg_reward": self.avg_reward,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")


def rank(
    dataset: Dataset,
    q: QTable,
    metric: MetricConfig,
    k: int = 5,
    breakdowns: list[ImportanceBreakdown] | None = None,
) -> RankingReport:
    """Rank the dataset by trajectory importance, descending.

    Exact score ties resolve to the lower dataset index, so permuting the
    input only reshuffles genuinely tied entries.  ``k`` clamps to the
    dataset size.  Precomputed breakdowns may be passed to avoid re-scoring.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    if not dataset.trajectories:
        raise ConfigError("cannot rank an empty dataset")
    if breakdowns is None:
        breakdowns = score_dataset(dataset, q, metric)
    scores = [b.i_tau for b in breakdowns]
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    ranked_ids = [dataset.trajectories[i].id for i in order]
    ranked_scores = [scores[i] for i in order]
    top = order[: min(k, len(order))]
    top_ids = [dataset.trajectories[i].id for i in top]
    selected = select_explanation_target_indices(dataset, top)
    top_trajs = [dataset.trajectories[i] for i in top]
    avg_length = sum(t.length for t in top_trajs) / len(top_trajs)
    avg_reward = sum(t.total_reward for t in top_trajs) / len(top_trajs)
    return RankingReport(
        metric=metric,
        k=k,
        ranked_ids=ranked_ids,
        scores=ranked_scores,
        top_k_ids=top_ids,
        selected_id=dataset.trajectories[selected].id,
        avg_length=float(avg_length),
        avg_reward=float(avg_reward),
        config_hash=dataset.config_hash,
        dataset_seed=dataset.seed,
    )


def select_explanation_target_indices(dataset: Dataset, top_indices: list[int]) -> int:
    """Best-outcome member of the top-k: max reward, then min length, then
    lowest dataset index."""
    if not top_indices:
        raise ConfigError("empty top-k")
    candidates = [dataset.trajectories[i] for i in sorted(top_indices)]
    best_local = best_outcome_index(candidates)
    return sorted(top_indices)[best_local]


def select_explanation_target(report: RankingReport, dataset: Dataset) -> str:
    """Re-derive the explanation target id from a report's top-k."""
    indices = [dataset.index[tid] for tid in report.top_k_ids]
    return dataset.trajectories[select_explanation_target_indices(dataset, indices)].id
