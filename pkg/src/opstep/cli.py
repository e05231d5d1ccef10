"""Command-line surface tying training, rollout, reference solving, and
evaluation together.

Subcommands::

    train         --config cfg.json [--seed S] [--out DIR]
    rollout       --checkpoint path|fixture:NAME --ic SPEC --T t [--dt-grid K]
    reference     --problem ID --ic SPEC|FILE --T t [--out DIR]
    eval          --checkpoint path|fixture:exact:ID --testset FILE --Ts 1,5,10
    sweep-dt      --problem diffusion-reaction --dts 0.5,1,2 [--T t]
    baseline-pinn --T 20 [--iters N]

Every command writes a run manifest (resolved config + seeds + git describe)
alongside its outputs.  ``fixture:`` checkpoints resolve to built-in exact
propagators, used to exercise the pipeline without a trained model.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import problems
from .artifacts import load_checkpoint, read_blob, save_checkpoint, write_blob, write_run_manifest
from .config import RunConfig, build_operator_net, default_config
from .errors import OpstepError
from .metrics import rel_l2
from .networks import Mlp, MlpSpec
from .operator_nets import SensorGrid
from .rollout import (
    FlowMapPropagator,
    OperatorPropagator,
    RolloutPlan,
    error_vs_horizon,
    rollout,
)
from .sampling import grf_sample, GrfSpec, make_train_set, sensor_grid_for
from .training import train as train_loop


def _args_dict(args):
    return {k: v for k, v in vars(args).items() if not callable(v)}


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
    return path


def _parse_ic(spec, problem=None, m=None):
    """IC specs: comma floats | grf:SEED | soliton:a,c | a .field file path."""
    if isinstance(spec, str) and spec.startswith("grf:"):
        seed = int(spec.split(":", 1)[1])
        grid = sensor_grid_for(problem, m)
        u = grf_sample(GrfSpec(problem.input_space["l"], grid), seed)
        if problem.input_space.get("kind") == "grf-sine":
            u = u * np.sin(np.pi * grid.points)
        return u
    if isinstance(spec, str) and spec.startswith("soliton:"):
        a, c = (float(v) for v in spec.split(":", 1)[1].split(","))
        grid = sensor_grid_for(problem, m)
        return problems.soliton(grid.points, 0.0, a, c)
    p = Path(spec)
    if p.suffix == ".json" or p.name.endswith(".field.json") or p.exists():
        arrays, _ = read_blob(spec, kind="field")
        return arrays["u"]
    return np.array([float(v) for v in spec.split(",")])


class _Fixtures:
    """Built-in exact propagators addressable as fixture: checkpoints."""

    @staticmethod
    def resolve(name):
        if name == "linear-decay":
            return FlowMapPropagator(lambda u, t: u[None, :] * np.exp(-t)[:, None]), None
        if name.startswith("exact:"):
            problem = problems.get(name.split(":", 1)[1])
            return _ExactProblemPropagator(problem), problem
        raise OpstepError(f"unknown fixture {name!r}")


class _ExactProblemPropagator:
    """Reference-solver-backed 'perfect' operator stub."""

    def __init__(self, problem):
        self.problem = problem

    def propagate(self, u, times, x_grid=None):
        return problems.reference_trajectory(self.problem, u, times, x_grid=x_grid)


def _load_propagator(spec):
    if spec.startswith("fixture:"):
        prop, problem = _Fixtures.resolve(spec.split(":", 1)[1])
        return prop, problem, None
    net, manifest = load_checkpoint(spec)
    problem = problems.get(manifest["problem"]) if manifest["problem"] else None
    return OperatorPropagator(net), problem, manifest


def cmd_train(args):
    cfg = RunConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed_data, cfg.seed_init, cfg.seed_train = args.seed, args.seed + 1, args.seed + 2
    if args.out:
        cfg.out_dir = args.out
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = problems.get(cfg.problem, dt=cfg.dt, loss_weights=cfg.loss_weights or None)
    net = build_operator_net(cfg)
    trainset = make_train_set(
        problem, cfg.n_train, cfg.n_cond, cfg.n_colloc, seed=cfg.seed_data,
        m=cfg.m or None,
    )
    write_run_manifest(out, cfg.to_dict(), seeds={
        "data": cfg.seed_data, "init": cfg.seed_init, "train": cfg.seed_train,
    })
    _, log = train_loop(
        problem, net, trainset, cfg.iters, cfg.batch_size, cfg.seed_train,
        lr0=cfg.lr0, clip_norm=cfg.clip_norm or None,
    )
    (out / "training_log.csv").write_text(log.to_csv())
    save_checkpoint(out / "model", net, problem.id, iteration=cfg.iters, seeds={
        "data": cfg.seed_data, "init": cfg.seed_init, "train": cfg.seed_train,
    })
    print(f"trained {cfg.problem} for {cfg.iters} iterations -> {out}/model.ckpt.json")
    return 0


def cmd_rollout(args):
    prop, problem, manifest = _load_propagator(args.checkpoint)
    out = Path(args.out or "runs/rollout")
    out.mkdir(parents=True, exist_ok=True)
    dt = args.dt if args.dt else (problem.dt if problem else 1.0)
    x_grid = None
    m = None
    if problem is not None and problem.x_domain is not None:
        if isinstance(prop, OperatorPropagator):
            m = prop.net.branches[0].spec.in_dim
        else:
            m = args.m
        x_grid = sensor_grid_for(problem, m).points
    ic = _parse_ic(args.ic, problem, m)
    plan = RolloutPlan.make(args.T, dt, points_per_window=args.dt_grid, x_grid=x_grid)
    res = rollout(prop, ic, plan)
    arrays = {"times": res.times, "field": res.field, "restarts": res.restarts}
    meta = {"T": args.T, "dt": dt, "problem": problem.id if problem else "",
            "checkpoint": args.checkpoint}
    write_blob(out / "trajectory", arrays, meta=meta, kind="field")
    rows = [(float(t),) + tuple(float(v) for v in row) for t, row in zip(res.times, res.field)]
    ncols = res.field.shape[1]
    _write_csv(out / "trajectory.csv", ["t"] + [f"s{i+1}" for i in range(ncols)], rows)
    write_run_manifest(out, _args_dict(args) | {"command": "rollout"})
    print(f"rollout to T={args.T} -> {out}/trajectory.csv")
    return 0


def cmd_reference(args):
    problem = problems.get(args.problem)
    out = Path(args.out or "runs/reference")
    out.mkdir(parents=True, exist_ok=True)
    m = args.m
    x_grid = sensor_grid_for(problem, m).points if problem.x_domain is not None else None
    ic = _parse_ic(args.ic, problem, m)
    times = np.linspace(0.0, args.T, int(round(args.T / problem.dt)) * 10 + 1)
    u_desc = None
    if problem.id == "kdv" and args.ic.startswith("soliton:"):
        a, c = (float(v) for v in args.ic.split(":", 1)[1].split(","))
        u_desc = {"a": a, "c": c}
    field = problems.reference_trajectory(
        problem, ic, times, u_descriptor=u_desc, x_grid=x_grid
    )
    write_blob(out / "reference", {"times": times, "field": field},
               meta={"problem": problem.id, "T": args.T}, kind="field")
    write_run_manifest(out, _args_dict(args) | {"command": "reference"})
    print(f"reference for {problem.id} to T={args.T} -> {out}/reference.field.json")
    return 0


def cmd_eval(args):
    prop, problem, manifest = _load_propagator(args.checkpoint)
    if problem is None:
        raise OpstepError("eval needs a checkpoint that names its problem")
    arrays, meta = read_blob(args.testset, kind="data")
    ts_list = [float(v) for v in args.Ts.split(",")]
    out = Path(args.out or "runs/eval")
    out.mkdir(parents=True, exist_ok=True)

    x_grid = None
    if problem.x_domain is not None:
        m = arrays["u"].shape[1]
        x_grid = sensor_grid_for(problem, m).points

    def run(ic, plan):
        return rollout(prop, ic, plan)

    def ref(ic, times):
        return problems.reference_trajectory(problem, ic, times, x_grid=x_grid)

    table = error_vs_horizon(
        run, ref, list(arrays["u"]), ts_list,
        plan_for=lambda T: RolloutPlan.make(T, problem.dt, points_per_window=11, x_grid=x_grid),
    )
    _write_csv(out / "error_vs_T.csv", ["T", "mean_rel_l2"], table)
    write_run_manifest(out, _args_dict(args) | {"command": "eval"})
    for T, err in table:
        print(f"T={T:g}: mean relative L2 error {err:.6g}")
    return 0


def cmd_sweep_dt(args):
    out = Path(args.out or "runs/sweep_dt")
    out.mkdir(parents=True, exist_ok=True)
    dts = [float(v) for v in args.dts.split(",")]
    rows = []
    for dt in dts:
        cfg = default_config(args.problem, scale="desk", dt=dt)
        if args.iters:
            cfg.iters = args.iters
        cfg.out_dir = str(out / f"dt_{dt:g}")
        problem = problems.get(cfg.problem, dt=dt)
        net = build_operator_net(cfg)
        trainset = make_train_set(problem, cfg.n_train, cfg.n_cond, cfg.n_colloc,
                                  seed=cfg.seed_data, m=cfg.m)
        _, log = train_loop(problem, net, trainset, cfg.iters, cfg.batch_size,
                            cfg.seed_train, lr0=cfg.lr0)
        save_checkpoint(Path(cfg.out_dir) / "model", net, problem.id, iteration=cfg.iters)
        err = _dr_sweep_error(problem, net, args.T, n_test=args.n_test)
        rows.append((dt, err))
        print(f"dt={dt:g}: mean relative L2 error {err:.4g} at T={args.T:g}")
    _write_csv(out / "error_vs_dt.csv", ["dt", "mean_rel_l2"], rows)
    write_run_manifest(out, _args_dict(args) | {"command": "sweep-dt"})
    return 0


def _dr_sweep_error(problem, net, T, n_test=10, seed=777):
    m = net.branches[0].spec.in_dim
    grid = sensor_grid_for(problem, m)
    prop = OperatorPropagator(net)
    plan = RolloutPlan.make(T, problem.dt, points_per_window=11, x_grid=grid.points)
    errs = []
    for i in range(n_test):
        u0 = grf_sample(GrfSpec(problem.input_space["l"], grid), (seed, i))
        res = rollout(prop, u0, plan)
        ref = problems.reference_trajectory(problem, u0, res.times, x_grid=grid.points)
        errs.append(rel_l2(res.field, ref))
    return float(np.mean(errs))


def cmd_baseline_pinn(args):
    out = Path(args.out or "runs/baseline_pinn")
    out.mkdir(parents=True, exist_ok=True)
    net = Mlp.glorot(MlpSpec(1, 2, width=args.width, depth=args.depth), seed=args.seed)
    times, traj, log = problems.pinn_baseline(
        net, args.T, args.iters, seed=args.seed, n_colloc=args.n_colloc
    )
    problem = problems.get("pendulum")
    ref = problems.reference_trajectory(problem, np.array([1.0, 1.0]), times)
    early = times <= args.T / 2
    err_early = rel_l2(traj[early], ref[early])
    err_late = rel_l2(traj[~early], ref[~early])
    _write_csv(out / "trajectory.csv", ["t", "s1", "s2", "ref1", "ref2"],
               [(float(t), float(a), float(b), float(c), float(d))
                for t, (a, b), (c, d) in zip(times, traj, ref)])
    (out / "training_log.csv").write_text(log.to_csv())
    write_run_manifest(out, _args_dict(args) | {"command": "baseline-pinn"})
    print(f"relative L2 error on [0,{args.T/2:g}]: {err_early:.4g}")
    print(f"relative L2 error on [{args.T/2:g},{args.T:g}]: {err_late:.4g}")
    print(f"late/early ratio: {err_late/err_early:.3g}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="opstep", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train an operator from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", default=None)
    t.set_defaults(fn=cmd_train)

    r = sub.add_parser("rollout", help="compose a trained operator over [0, T]")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--ic", required=True)
    r.add_argument("--T", type=float, required=True)
    r.add_argument("--dt", type=float, default=None)
    r.add_argument("--dt-grid", dest="dt_grid", type=int, default=101)
    r.add_argument("--m", type=int, default=100)
    r.add_argument("--out", default=None)
    r.set_defaults(fn=cmd_rollout)

    f = sub.add_parser("reference", help="classical reference solution")
    f.add_argument("--problem", required=True)
    f.add_argument("--ic", required=True)
    f.add_argument("--T", type=float, required=True)
    f.add_argument("--m", type=int, default=100)
    f.add_argument("--out", default=None)
    f.set_defaults(fn=cmd_reference)

    e = sub.add_parser("eval", help="error-vs-horizon table over a test set")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--testset", required=True)
    e.add_argument("--Ts", default="1,5,10")
    e.add_argument("--out", default=None)
    e.set_defaults(fn=cmd_eval)

    s = sub.add_parser("sweep-dt", help="train at several window sizes")
    s.add_argument("--problem", default="diffusion-reaction")
    s.add_argument("--dts", default="0.5,1,2")
    s.add_argument("--T", type=float, default=10.0)
    s.add_argument("--iters", type=int, default=None)
    s.add_argument("--n-test", dest="n_test", type=int, default=10)
    s.add_argument("--out", default=None)
    s.set_defaults(fn=cmd_sweep_dt)

    b = sub.add_parser("baseline-pinn", help="whole-domain PINN pendulum baseline")
    b.add_argument("--T", type=float, default=20.0)
    b.add_argument("--iters", type=int, default=20_000)
    b.add_argument("--width", type=int, default=64)
    b.add_argument("--depth", type=int, default=4)
    b.add_argument("--n-colloc", dest="n_colloc", type=int, default=128)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None)
    b.set_defaults(fn=cmd_baseline_pinn)

    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (OpstepError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
