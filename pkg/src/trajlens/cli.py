"""Command-line pipeline: train, collect, rank, cf, report, validate, serve.

Each command reads and writes only the documented file formats, all file
names are deterministic functions of (config hash, seed, parameters), and
every timestamp goes to the ``run.log`` sidecar so repeated runs with the
same seed produce byte-identical artifacts.

Exit codes: 0 success, 2 configuration error, 3 data/file error,
4 invariant violation.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import agent, counterfactual, importance, ranking, report, trajstore
from .envs import Env, build_env, parse_config_file
from .errors import ConfigError, DataError, InvariantViolation, TrajlensError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INVARIANT = 4


# ---------------------------------------------------------------------------
# config access
# ---------------------------------------------------------------------------

@dataclass
class TrainParams:
    episodes: int
    alpha: float
    gamma: float
    eps_start: float
    eps_end: float
    checkpoints: tuple[float, ...]


@dataclass
class CollectParams:
    episodes_per_checkpoint: int
    rollout_mode: str
    epsilon: float


@dataclass
class AnalysisParams:
    k: int
    temperature: float
    budget: int | None
    vgoal_reference: str


def _get(cfg: dict, key: str, conv, default):
    if key not in cfg:
        return default
    try:
        return conv(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"bad config value for {key}: {cfg[key]!r}") from exc


def train_params(cfg: dict) -> TrainParams:
    raw_fracs = cfg.get("checkpoints", "0.1,0.25,0.5,0.75,1.0")
    try:
        fracs = tuple(float(f) for f in raw_fracs.split(",") if f.strip())
    except ValueError as exc:
        raise ConfigError(f"bad checkpoints list: {raw_fracs!r}") from exc
    return TrainParams(
        episodes=_get(cfg, "episodes", int, 500),
        alpha=_get(cfg, "alpha", float, 0.3),
        gamma=_get(cfg, "gamma", float, 0.95),
        eps_start=_get(cfg, "eps_start", float, 1.0),
        eps_end=_get(cfg, "eps_end", float, 0.05),
        checkpoints=fracs,
    )


def collect_params(cfg: dict) -> CollectParams:
    mode = cfg.get("rollout", "epsilon")
    if mode not in ("greedy", "epsilon"):
        raise ConfigError(f"rollout must be 'greedy' or 'epsilon', got {mode!r}")
    return CollectParams(
        episodes_per_checkpoint=_get(cfg, "episodes_per_checkpoint", int, 8),
        rollout_mode=mode,
        epsilon=_get(cfg, "epsilon", float, 0.1),
    )


def analysis_params(cfg: dict) -> AnalysisParams:
    budget = _get(cfg, "budget", int, 0)
    return AnalysisParams(
        k=_get(cfg, "k", int, 5),
        temperature=_get(cfg, "temperature", float, 1.0),
        budget=budget if budget > 0 else None,
        vgoal_reference=cfg.get("vgoal_reference", "dataset_best"),
    )


def load_config(path: str) -> tuple[dict, Env]:
    cfg = parse_config_file(path)
    return cfg, build_env(cfg)


def metric_from_args(args, params: AnalysisParams) -> importance.MetricConfig:
    kind = importance.RadicalKind(args.metric)
    return importance.MetricConfig(
        kind=kind,
        temperature=params.temperature,
        vgoal_reference=params.vgoal_reference,
        kl_reference=getattr(args, "kl_reference", None),
        experimental=getattr(args, "experimental", False),
    )


# ---------------------------------------------------------------------------
# file naming
# ---------------------------------------------------------------------------

def _h8(config_hash: str) -> str:
    return config_hash[:8]


def qtable_name(fraction: float | None, seed: int, config_hash: str) -> str:
    if fraction is None:
        return f"qtable-seed{seed}-{_h8(config_hash)}.json"
    return f"qtable-cp{round(fraction * 100):03d}-seed{seed}-{_h8(config_hash)}.json"


def manifest_name(seed: int, config_hash: str) -> str:
    return f"train-manifest-seed{seed}-{_h8(config_hash)}.json"


def dataset_name(seed: int, config_hash: str) -> str:
    return f"dataset-seed{seed}-{_h8(config_hash)}.traj.jsonl"


def ranking_name(metric: str, k: int, seed: int, config_hash: str) -> str:
    return f"ranking-{metric}-k{k}-seed{seed}-{_h8(config_hash)}.json"


def cfset_name(metric: str, target: str, seed: int, config_hash: str) -> str:
    return f"cfset-{metric}-{target}-seed{seed}-{_h8(config_hash)}.cfset.json"


def _sidecar_log(out_dir: Path, message: str) -> None:
    # the one place timestamps are allowed; everything else must be
    # byte-reproducible
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    with open(out_dir / "run.log", "a", encoding="utf-8") as fh:
        fh.write(f"{stamp} {message}\n")


def _write_text(path: Path, content: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg, env = load_config(args.config)
    params = train_params(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = agent.train(
        env,
        episodes=params.episodes,
        alpha=params.alpha,
        gamma=params.gamma,
        eps_start=params.eps_start,
        eps_end=params.eps_end,
        checkpoint_fractions=params.checkpoints,
        seed=args.seed,
    )
    manifest = {
        "format": "train-manifest",
        "version": 1,
        "config_hash": env.config_hash,
        "seed": args.seed,
        "episodes": params.episodes,
        "alpha": params.alpha,
        "gamma": params.gamma,
        "final": qtable_name(None, args.seed, env.config_hash),
        "checkpoints": [],
    }
    for ckpt in result.checkpoints:
        name = qtable_name(ckpt.fraction, args.seed, env.config_hash)
        ckpt.qtable.save(out / name)
        manifest["checkpoints"].append({"fraction": ckpt.fraction, "path": name})
    result.final.save(out / manifest["final"])
    _write_text(out / manifest_name(args.seed, env.config_hash),
                json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n")
    _sidecar_log(out, f"train config={args.config} seed={args.seed}")
    print(f"trained {params.episodes} episodes; wrote {manifest['final']} "
          f"and {len(result.checkpoints)} checkpoints to {out}")
    return EXIT_OK


def _load_manifest(out: Path, seed: int, config_hash: str) -> dict:
    path = out / manifest_name(seed, config_hash)
    if not path.exists():
        raise DataError(f"no training manifest at {path}; run 'train' first")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def cmd_collect(args) -> int:
    cfg, env = load_config(args.config)
    params = collect_params(cfg)
    if args.episodes_per_checkpoint is not None:
        params.episodes_per_checkpoint = args.episodes_per_checkpoint
    if args.rollout is not None:
        params.rollout_mode = args.rollout
    if args.epsilon is not None:
        params.epsilon = args.epsilon
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _load_manifest(out, args.seed, env.config_hash)
    checkpoints = []
    for entry in manifest["checkpoints"]:
        qt = agent.QTable.load(out / entry["path"])
        if qt.config_hash != env.config_hash:
            raise DataError(f"{entry['path']}: config hash mismatch against {args.config}")
        checkpoints.append(agent.Checkpoint(entry["fraction"], qt))
    dataset = trajstore.collect(
        env,
        checkpoints,
        params.episodes_per_checkpoint,
        rollout_mode=params.rollout_mode,
        epsilon=params.epsilon,
        seed=args.seed,
    )
    path = out / dataset_name(args.seed, env.config_hash)
    trajstore.save_dataset(dataset, path)
    _sidecar_log(out, f"collect config={args.config} seed={args.seed}")
    lengths = [t.length for t in dataset.trajectories]
    print(f"collected {len(dataset)} trajectories "
          f"(lengths {min(lengths)}..{max(lengths)}) -> {path}")
    return EXIT_OK


def _load_analysis_inputs(args) -> tuple[dict, Env, agent.QTable, trajstore.Dataset]:
    cfg, env = load_config(args.config)
    qt = agent.QTable.load(args.qtable)
    if qt.config_hash != env.config_hash:
        raise DataError(f"{args.qtable}: config hash mismatch against {args.config}")
    dataset = trajstore.load_dataset(args.dataset, qtable=qt)
    if dataset.config_hash != env.config_hash:
        raise DataError(f"{args.dataset}: config hash mismatch against {args.config}")
    return cfg, env, qt, dataset


def cmd_rank(args) -> int:
    cfg, env, qt, dataset = _load_analysis_inputs(args)
    params = analysis_params(cfg)
    if args.k is not None:
        params.k = args.k
    metric = metric_from_args(args, params)
    rep = ranking.rank(dataset, qt, metric, k=params.k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / ranking_name(metric.kind.value, params.k, dataset.seed, env.config_hash)
    rep.save(path)
    _sidecar_log(out, f"rank metric={metric.kind.value} k={params.k}")
    print(f"top-{params.k} by {metric.kind.value}: selected {rep.selected_id} "
          f"(avg length {rep.avg_length:.2f}, avg reward {rep.avg_reward:.2f}) -> {path}")
    return EXIT_OK


def cmd_cf(args) -> int:
    cfg, env, qt, dataset = _load_analysis_inputs(args)
    params = analysis_params(cfg)
    if args.k is not None:
        params.k = args.k
    if args.budget is not None:
        params.budget = args.budget if args.budget > 0 else None
    metric = metric_from_args(args, params)
    if args.trajectory_id:
        try:
            target = dataset.get(args.trajectory_id)
        except KeyError:
            raise DataError(f"unknown trajectory id {args.trajectory_id!r}")
    else:
        rep = ranking.rank(dataset, qt, metric, k=params.k)
        target = dataset.get(rep.selected_id)

    if (args.step is None) != (args.action is None):
        raise ConfigError("--step and --action must be given together")
    if args.step is not None:
        rollout = counterfactual.single_rollout(env, qt, target, args.step, args.action)
        payload = rollout.to_json_dict()
        payload["original_id"] = target.id
        print(json.dumps(payload, sort_keys=True, separators=(",", ":")))
        return EXIT_OK

    cfset = counterfactual.generate(env, qt, target, budget=params.budget, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / cfset_name(metric.kind.value, target.id, dataset.seed, env.config_hash)
    cfset.save(path)
    _sidecar_log(out, f"cf target={target.id} metric={metric.kind.value}")
    print(f"{len(cfset.rollouts)} counterfactuals for {target.id} "
          f"(reward dominance {cfset.dominance_reward:.2f}, "
          f"length dominance {cfset.dominance_length:.2f}) -> {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg, env, qt, dataset = _load_analysis_inputs(args)
    params = analysis_params(cfg)
    if args.k is not None:
        params.k = args.k
    metrics = report.default_metric_configs(
        vgoal_reference=params.vgoal_reference, temperature=params.temperature)
    table = report.ranking_table(dataset, qt, metrics, k=params.k)
    if args.verify:
        report.verify_table(table, dataset, qt, metrics)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = f"ranking-table-k{params.k}-seed{dataset.seed}-{_h8(env.config_hash)}"
    _write_text(out / f"{base}.csv", table.to_csv())
    _write_text(out / f"{base}.txt", table.to_text())
    written = [f"{base}.csv", f"{base}.txt"]
    if args.cfset:
        cfset = counterfactual.load_cfset(args.cfset)
        if cfset.config_hash != env.config_hash:
            raise DataError(f"{args.cfset}: config hash mismatch against {args.config}")
        stem = f"figure-cf-{cfset.original_id}-seed{cfset.seed}-{_h8(env.config_hash)}"
        _write_text(out / f"{stem}.csv", report.counterfactual_figure_rows(cfset))
        _write_text(out / f"{stem}-original.csv",
                    report.counterfactual_original_line(cfset))
        written += [f"{stem}.csv", f"{stem}-original.csv"]
    _sidecar_log(out, f"report k={params.k}")
    print(table.to_text(), end="")
    print(f"wrote {', '.join(written)} to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    qt = agent.QTable.load(args.qtable) if args.qtable else None
    dataset = trajstore.load_dataset(args.dataset, qtable=qt)
    if args.config:
        _, env = load_config(args.config)
        if dataset.config_hash != env.config_hash:
            raise DataError(f"{args.dataset}: config hash mismatch against {args.config}")
        for traj in dataset.trajectories:
            counterfactual.verify_replay(env, traj)
        print(f"{args.dataset}: {len(dataset)} trajectories valid, replay verified")
    else:
        print(f"{args.dataset}: {len(dataset)} trajectories valid")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import AnalysisBundle, create_app

    bundle = AnalysisBundle.load(args.config, args.qtable, args.dataset)
    app = create_app(bundle)
    print(f"serving bundle {bundle.bundle_hash[:12]} on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_analysis_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="environment config file")
    p.add_argument("--dataset", required=True, help=".traj.jsonl dataset path")
    p.add_argument("--qtable", required=True, help="Q-table JSON dump path")
    p.add_argument("--metric", default="vgoal",
                   choices=[k.value for k in importance.RadicalKind],
                   help="importance metric (default vgoal)")
    p.add_argument("--kl-reference", default=None,
                   help="KL reference: uniform, greedy, or comma weights")
    p.add_argument("--experimental", action="store_true",
                   help="enable experimental metrics (required for kl)")
    p.add_argument("--k", type=int, default=None, help="top-k size override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajlens",
        description="train tabular agents, rank their trajectories, and "
                    "explain the best one with counterfactual rollouts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a Q-table with checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("collect", help="roll out a mixed-checkpoint dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--episodes-per-checkpoint", type=int, default=None)
    p.add_argument("--rollout", choices=["greedy", "epsilon"], default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("rank", help="rank trajectories by importance")
    _add_analysis_args(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("cf", help="generate counterfactual rollouts")
    _add_analysis_args(p)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trajectory-id", default=None,
                   help="explicit target (default: metric-selected)")
    p.add_argument("--step", type=int, default=None,
                   help="single-rollout mode: deviation step")
    p.add_argument("--action", type=int, default=None,
                   help="single-rollout mode: forced action")
    p.add_argument("--budget", type=int, default=None,
                   help="rollout budget (0 disables the cap)")
    p.set_defaults(func=cmd_cf)

    p = sub.add_parser("report", help="emit ranking table and figure data")
    _add_analysis_args(p)
    p.add_argument("--out", default="out")
    p.add_argument("--cfset", default=None, help="counterfactual set for figure data")
    p.add_argument("--verify", action="store_true",
                   help="recompute every table cell and fail on drift")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="re-check dataset invariants")
    p.add_argument("--dataset", required=True)
    p.add_argument("--qtable", default=None)
    p.add_argument("--config", default=None,
                   help="also replay every trajectory against the env")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="serve the analysis bundle over HTTP")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--qtable", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: missing file: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrajlensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
