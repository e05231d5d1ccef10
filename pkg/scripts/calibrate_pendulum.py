"""Desk-scale pendulum calibration sweep (throwaway experiment script)."""

import os
import sys

import numpy as np

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import time

from opstep import problems
from opstep.config import build_operator_net, default_config
from opstep.metrics import rel_l2
from opstep.rollout import OperatorPropagator, RolloutPlan, rollout
from opstep.sampling import make_train_set
from opstep.training import train


def run(tag, lr0, s2_range, iters=30000):
    space = {"low": (-3.0, -s2_range), "high": (3.0, s2_range)}
    problem = problems.get("pendulum", input_space=space)
    cfg = default_config("pendulum", "desk")
    net = build_operator_net(cfg)
    ts = make_train_set(problem, cfg.n_train, cfg.n_cond, cfg.n_colloc, seed=cfg.seed_data)
    t0 = time.perf_counter()
    _, log = train(problem, net, ts, iters=iters, batch_size=cfg.batch_size,
                   seed=cfg.seed_train, lr0=lr0, log_every=2000)
    dt_train = time.perf_counter() - t0

    rng = np.random.default_rng(123)
    ics = rng.uniform(-2, 2, size=(20, 2))
    plan = RolloutPlan.make(20.0, 1.0, points_per_window=11)
    prop = OperatorPropagator(net)
    errs = []
    for ic in ics:
        res = rollout(prop, ic, plan)
        ref = problems.reference_trajectory(problem, ic, res.times)
        errs.append(rel_l2(res.field, ref))
    errs = np.array(errs)
    times = np.linspace(0, 1, 11)
    e1 = [rel_l2(prop.propagate(ic, times), problems.reference_trajectory(problem, ic, times))
          for ic in ics]
    print(f"[{tag}] lr0={lr0:g} s2r={s2_range:g}: train {dt_train:.0f}s | "
          f"final-loss {np.mean(log.totals()[-3:]):.2e} | one-window {np.mean(e1):.4f} | "
          f"T20 mean {errs.mean():.4f} max {errs.max():.4f}", flush=True)
    from opstep.artifacts import save_checkpoint
    save_checkpoint(f"/tmp/pend_{tag}", net, "pendulum", iteration=iters)
    return errs.mean()


if __name__ == "__main__":
    which = sys.argv[1]
    if which == "a":
        run("lr5e4_s3", 5e-4, 3.0)
        run("lr1e3_s6", 1e-3, 6.0)
    else:
        run("lr5e4_s6", 5e-4, 6.0)
        run("lr1e3_s45", 1e-3, 4.5)
