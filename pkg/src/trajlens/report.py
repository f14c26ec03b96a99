"""Tabular and figure-ready outputs for completed analyses.

The core emits data, never images: a per-metric top-k table (CSV and plain
text) and flat CSV arrays behind the counterfactual distribution figures.
Every cell is recomputable from the dataset and Q-table; ``verify_table``
does exactly that and reports any drift.
"""

from __future__ import annotations

from dataclasses import dataclass

from .agent import QTable
from .counterfactual import CounterfactualSet
from .errors import ConfigError, InvariantViolation
from .importance import STANDARD_KINDS, MetricConfig, RadicalKind
from .ranking import RankingReport, rank
from .trajstore import Dataset


@dataclass
class RankingTable:
    """Rows of (metric, top-k average length, top-k average reward)."""

    k: int
    rows: list[tuple[str, float, float]]
    config_hash: str

    def to_csv(self) -> str:
        lines = ["metric,avg_length,avg_reward"]
        for name, avg_len, avg_rew in self.rows:
            lines.append(f"{name},{avg_len!r},{avg_rew!r}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max(len(name) for name, _, _ in self.rows)
        lines = [f"top-{self.k} ranked trajectories per metric",
                 f"{'metric'.ljust(width)}  avg_length  avg_reward"]
        for name, avg_len, avg_rew in self.rows:
            lines.append(f"{name.ljust(width)}  {avg_len:10.3f}  {avg_rew:10.3f}")
        return "\n".join(lines) + "\n"


def default_metric_configs(vgoal_reference: str = "dataset_best",
                           temperature: float = 1.0) -> list[MetricConfig]:
    return [MetricConfig(kind=k, temperature=temperature,
                         vgoal_reference=vgoal_reference)
            for k in STANDARD_KINDS]


def ranking_table(
    dataset: Dataset,
    q: QTable,
    metrics: list[MetricConfig] | None = None,
    k: int = 5,
) -> RankingTable:
    """Top-k aggregate table across metrics (one row per metric)."""
    if not dataset.trajectories:
        raise ConfigError("cannot build a table from an empty dataset")
    metrics = metrics if metrics is not None else default_metric_configs()
    rows = []
    for metric in metrics:
        report = rank(dataset, q, metric, k=k)
        rows.append((metric.kind.value, report.avg_length, report.avg_reward))
    return RankingTable(k=k, rows=rows, config_hash=dataset.config_hash)


def verify_table(table: RankingTable, dataset: Dataset, q: QTable,
                 metrics: list[MetricConfig] | None = None) -> None:
    """Recompute every cell and raise InvariantViolation on any mismatch."""
    metrics = metrics if metrics is not None else default_metric_configs()
    fresh = ranking_table(dataset, q, metrics, k=table.k)
    if fresh.rows != table.rows:
        diffs = [f"{a} != {b}" for a, b in zip(table.rows, fresh.rows) if a != b]
        raise InvariantViolation("ranking table drift: " + "; ".join(diffs))


def counterfactual_figure_rows(cfset: CounterfactualSet) -> str:
    """CSV of (deviation_step, forced_action, length, reward) per rollout."""
    if not cfset.rollouts:
        raise ConfigError("cannot emit figure data for an empty set")
    lines = ["deviation_step,forced_action,length,reward"]
    for r in cfset.rollouts:
        lines.append(f"{r.deviation_step},{r.forced_action},"
                     f"{r.outcome.length},{r.outcome.total_reward!r}")
    return "\n".join(lines) + "\n"


def counterfactual_original_line(cfset: CounterfactualSet) -> str:
    """The original's outcome as a one-row CSV (the reference line)."""
    orig = cfset.original_outcome
    return ("original_length,original_reward\n"
            f"{orig.length},{orig.total_reward!r}\n")


def metric_row_lookup(table: RankingTable) -> dict[str, tuple[float, float]]:
    return {name: (avg_len, avg_rew) for name, avg_len, avg_rew in table.rows}


def vgoal_is_column_minimum_length(table: RankingTable) -> bool:
    """True when the v-goal row has the (weak) minimum average length."""
    rows = metric_row_lookup(table)
    if RadicalKind.VGOAL.value not in rows:
        raise ConfigError("table has no vgoal row")
    vgoal_len = rows[RadicalKind.VGOAL.value][0]
    return all(vgoal_len <= avg_len for avg_len, _ in rows.values())
