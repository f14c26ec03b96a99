"""Read-only HTTP API over one analysis bundle.

The bundle (env config + Q-table + dataset) is loaded once at startup and
never mutated; its content hash is echoed in the ``X-Bundle-Hash`` header of
every response so clients can detect a restart with different data.
Counterfactual rollouts are computed on demand with a small LRU cache keyed
by (trajectory id, step, action); a request may pin ``bundle_hash`` and gets
409 if it no longer matches.
"""

from __future__ import annotations

import hashlib
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import counterfactual, ranking
from .agent import QTable
from .envs import Env, build_env, parse_config_file
from .errors import ConfigError, DataError
from .importance import (
    STANDARD_KINDS,
    ImportanceBreakdown,
    MetricConfig,
    RadicalKind,
    score_dataset,
)
from .trajstore import Dataset, load_dataset

CF_CACHE_SIZE = 256


# ---------------------------------------------------------------------------
# bundle
# ---------------------------------------------------------------------------

@dataclass
class AnalysisBundle:
    env: Env
    qtable: QTable
    dataset: Dataset
    bundle_hash: str
    temperature: float = 1.0
    vgoal_reference: str = "dataset_best"
    scores: dict[str, dict[str, float]] = field(default_factory=dict)
    breakdown_cache: dict[str, list[ImportanceBreakdown]] = field(default_factory=dict)

    @classmethod
    def load(cls, config_path, qtable_path, dataset_path) -> "AnalysisBundle":
        cfg = parse_config_file(config_path)
        env = build_env(cfg)
        qtable = QTable.load(qtable_path)
        if qtable.config_hash != env.config_hash:
            raise DataError("Q-table config hash does not match the config file")
        dataset = load_dataset(dataset_path, qtable=qtable)
        if dataset.config_hash != env.config_hash:
            raise DataError("dataset config hash does not match the config file")
        digest = hashlib.sha256()
        for path in (config_path, qtable_path, dataset_path):
            with open(path, "rb") as fh:
                digest.update(fh.read())
        bundle = cls(
            env=env,
            qtable=qtable,
            dataset=dataset,
            bundle_hash=digest.hexdigest(),
            temperature=float(cfg.get("temperature", "1.0")),
            vgoal_reference=cfg.get("vgoal_reference", "dataset_best"),
        )
        bundle._score_all()
        return bundle

    def metric_config(self, kind: RadicalKind) -> MetricConfig:
        return MetricConfig(kind=kind, temperature=self.temperature,
                            vgoal_reference=self.vgoal_reference)

    def _score_all(self) -> None:
        for kind in STANDARD_KINDS:
            breakdowns = score_dataset(self.dataset, self.qtable, self.metric_config(kind))
            self.breakdown_cache[kind.value] = breakdowns
            for traj, b in zip(self.dataset.trajectories, breakdowns):
                self.scores.setdefault(traj.id, {})[kind.value] = b.i_tau

    def breakdown(self, tid: str, kind: RadicalKind) -> ImportanceBreakdown:
        idx = self.dataset.index[tid]
        return self.breakdown_cache[kind.value][idx]

    def fresh_env(self) -> Env:
        # per-request environment instance; bundle env is never stepped
        return build_env(dict(_descriptor_to_cfg(self.env.config_descriptor())))


def _descriptor_to_cfg(descriptor: dict[str, str]) -> dict[str, str]:
    return dict(descriptor)


# ---------------------------------------------------------------------------
# response models
# ---------------------------------------------------------------------------

class TransitionModel(BaseModel):
    state: int
    action: int
    reward: float
    next_state: int
    done: bool


class TrajectorySummary(BaseModel):
    id: str
    length: int
    total_reward: float
    checkpoint_fraction: float
    scores: dict[str, float]


class TrajectoryPage(BaseModel):
    items: list[TrajectorySummary]
    page: int
    page_size: int
    total: int


class BreakdownModel(BaseModel):
    kind: str
    delta_q: list[float]
    radical: list[float]
    product: list[float]
    fallback: list[bool]
    i_tau: float
    goal_value: float | None = None


class TrajectoryDetail(BaseModel):
    id: str
    length: int
    total_reward: float
    checkpoint_fraction: float
    transitions: list[TransitionModel]
    breakdown: BreakdownModel


class RankingEntry(BaseModel):
    id: str
    score: float


class RankingModel(BaseModel):
    metric: str
    k: int
    ranked: list[RankingEntry]
    top_k: list[str]
    selected_id: str
    avg_length: float
    avg_reward: float


class CounterfactualRequest(BaseModel):
    trajectory_id: str
    step: int = Field(ge=0)
    action: int = Field(ge=0)
    bundle_hash: str | None = None


class OutcomeModel(BaseModel):
    total_reward: float
    length: int
    terminal: str


class RolloutModel(BaseModel):
    original_id: str
    deviation_step: int
    forced_action: int
    transitions: list[TransitionModel]
    outcome: OutcomeModel
    original_outcome: OutcomeModel
    reward_delta: float
    length_delta: int


class HealthModel(BaseModel):
    status: str
    bundle_hash: str
    env: str
    trajectory_count: int
    metrics: list[str]


def _transition_models(transitions) -> list[TransitionModel]:
    return [TransitionModel(state=t.state, action=t.action, reward=t.reward,
                            next_state=t.next_state, done=t.done)
            for t in transitions]


# ---------------------------------------------------------------------------
# app factory
# ---------------------------------------------------------------------------

def create_app(bundle: AnalysisBundle) -> FastAPI:
    app = FastAPI(title="trajlens", version="0.1.0",
                  description="read-only trajectory explanation API")
    # the explorer UI is served separately; the API is read-only and local
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
        expose_headers=["X-Bundle-Hash"],
    )
    cf_cache: OrderedDict[tuple[str, int, int], RolloutModel] = OrderedDict()
    cf_lock = threading.Lock()

    @app.middleware("http")
    async def stamp_bundle_hash(request: Request, call_next):
        response = await call_next(request)
        response.headers["X-Bundle-Hash"] = bundle.bundle_hash
        return response

    @app.get("/health", response_model=HealthModel)
    def health():
        return HealthModel(
            status="ok",
            bundle_hash=bundle.bundle_hash,
            env=bundle.env.spec.name,
            trajectory_count=len(bundle.dataset),
            metrics=[k.value for k in STANDARD_KINDS],
        )

    @app.get("/trajectories", response_model=TrajectoryPage)
    def list_trajectories(page: int = Query(0, ge=0),
                          page_size: int = Query(50, ge=1, le=500)):
        trajs = bundle.dataset.trajectories
        start = page * page_size
        window = trajs[start:start + page_size]  # past-the-end pages are empty
        items = [
            TrajectorySummary(
                id=t.id, length=t.length, total_reward=t.total_reward,
                checkpoint_fraction=t.checkpoint_fraction,
                scores=bundle.scores[t.id],
            )
            for t in window
        ]
        return TrajectoryPage(items=items, page=page, page_size=page_size,
                              total=len(trajs))

    def _metric_or_422(metric: str) -> RadicalKind:
        try:
            kind = RadicalKind(metric)
        except ValueError:
            raise HTTPException(422, f"unknown metric {metric!r}")
        if kind not in STANDARD_KINDS:
            raise HTTPException(422, f"metric {metric!r} is not served")
        return kind

    @app.get("/trajectories/{tid}", response_model=TrajectoryDetail)
    def trajectory_detail(tid: str, metric: str = "vgoal"):
        kind = _metric_or_422(metric)
        if tid not in bundle.dataset.index:
            raise HTTPException(404, f"unknown trajectory id {tid!r}")
        traj = bundle.dataset.get(tid)
        b = bundle.breakdown(tid, kind)
        return TrajectoryDetail(
            id=traj.id,
            length=traj.length,
            total_reward=traj.total_reward,
            checkpoint_fraction=traj.checkpoint_fraction,
            transitions=_transition_models(traj.transitions),
            breakdown=BreakdownModel(
                kind=b.kind.value, delta_q=b.delta_q, radical=b.radical,
                product=b.product, fallback=b.fallback, i_tau=b.i_tau,
                goal_value=b.goal_value,
            ),
        )

    @app.get("/ranking", response_model=RankingModel)
    def ranking_report(metric: str = "vgoal", k: int = Query(5, ge=1)):
        kind = _metric_or_422(metric)
        rep = ranking.rank(
            bundle.dataset, bundle.qtable, bundle.metric_config(kind), k=k,
            breakdowns=bundle.breakdown_cache[kind.value],
        )
        return RankingModel(
            metric=kind.value,
            k=rep.k,
            ranked=[RankingEntry(id=i, score=s)
                    for i, s in zip(rep.ranked_ids, rep.scores)],
            top_k=rep.top_k_ids,
            selected_id=rep.selected_id,
            avg_length=rep.avg_length,
            avg_reward=rep.avg_reward,
        )

    @app.get("/environment")
    def environment_layout():
        return bundle.env.layout()

    @app.post("/counterfactual", response_model=RolloutModel)
    def counterfactual_rollout(req: CounterfactualRequest):
        if req.bundle_hash is not None and req.bundle_hash != bundle.bundle_hash:
            raise HTTPException(409, "bundle hash mismatch: reload the bundle")
        if req.trajectory_id not in bundle.dataset.index:
            raise HTTPException(404, f"unknown trajectory id {req.trajectory_id!r}")
        key = (req.trajectory_id, req.step, req.action)
        with cf_lock:
            if key in cf_cache:
                cf_cache.move_to_end(key)
                return cf_cache[key]
        target = bundle.dataset.get(req.trajectory_id)
        try:
            rollout = counterfactual.single_rollout(
                bundle.fresh_env(), bundle.qtable, target, req.step, req.action)
        except ConfigError as exc:
            raise HTTPException(422, str(exc))
        original = counterfactual.outcome_of(bundle.env, target.transitions)
        model = RolloutModel(
            original_id=target.id,
            deviation_step=rollout.deviation_step,
            forced_action=rollout.forced_action,
            transitions=_transition_models(rollout.trajectory.transitions),
            outcome=OutcomeModel(**rollout.outcome.to_json_dict()),
            original_outcome=OutcomeModel(**original.to_json_dict()),
            reward_delta=rollout.outcome.total_reward - original.total_reward,
            length_delta=rollout.outcome.length - original.length,
        )
        with cf_lock:
            cf_cache[key] = model
            cf_cache.move_to_end(key)
            while len(cf_cache) > CF_CACHE_SIZE:
                cf_cache.popitem(last=False)
        return model

    return app
