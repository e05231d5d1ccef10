"""Run configuration: JSON-loadable, validated, with per-problem defaults.

``scale="paper"`` reproduces the published full-scale settings (sample
counts, iteration budgets, architectures); ``scale="desk"`` is the reduced
configuration sized for a single desktop core, used by the acceptance suite.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import problems
from .networks import Mlp, MlpSpec
from .operator_nets import OperatorNet

__all__ = ["RunConfig", "default_config", "build_operator_net"]


@dataclass
class RunConfig:
    problem: str
    branch_depth: int
    branch_width: int
    trunk_depth: int
    trunk_width: int
    variant: str
    latent: int
    partition: list
    out_scale: list
    m: int                      # sensors per input function (0 = state-vector input)
    n_train: int
    n_cond: int                 # P
    n_colloc: int               # Q
    dt: float
    iters: int
    batch_size: int
    lr0: float = 1e-3
    loss_weights: dict = field(default_factory=dict)
    clip_norm: float = 0.0      # 0 disables clipping
    seed_data: int = 0
    seed_init: int = 1
    seed_train: int = 2
    out_dir: str = "runs/out"

    REQUIRED = (
        "problem", "branch_depth", "branch_width", "trunk_depth", "trunk_width",
        "variant", "latent", "partition", "m", "n_train", "n_cond", "n_colloc",
        "dt", "iters", "batch_size",
    )

    def __post_init__(self):
        if self.problem not in problems.PROBLEM_IDS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.partition[0] != 0 or self.partition[-1] != self.latent:
            raise ValueError("partition must run from 0 to the latent width")
        if not self.out_scale:
            self.out_scale = [1.0] * (len(self.partition) - 1)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        missing = [k for k in cls.REQUIRED if k not in d]
        if missing:
            raise ValueError(f"config is missing required fields: {missing}")
        known = {f_.name for f_ in cls.__dataclass_fields__.values()}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"config has unknown fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n")


# full-scale settings from the published experiments; (depth, width) pairs
# apply to both branch and trunk
_PAPER = {
    "pendulum": dict(depth=8, width=100, variant="modified", latent=200,
                     partition=[0, 100, 200], m=0, n_train=50_000, n_cond=1,
                     n_colloc=100, iters=300_000),
    "inhom-ode": dict(depth=7, width=100, variant="modified", latent=100,
                  partition=[0, 100], m=100, n_train=50_000, n_cond=1,
                  n_colloc=100, iters=200_000),
    "stiff-kinetics": dict(depth=7, width=100, variant="modified", latent=300,
                  partition=[0, 100, 200, 300], m=0, n_train=50_000, n_cond=1,
                  n_colloc=1000, iters=400_000,
                  out_scale=[1.0, 1e-4, 1.0]),
    "wave": dict(depth=5, width=200, variant="modified", latent=200,
                 partition=[0, 200], m=100, n_train=10_000, n_cond=100,
                 n_colloc=200, iters=200_000),
    "diffusion-reaction": dict(depth=5, width=100, variant="modified", latent=100,
               partition=[0, 100], m=100, n_train=10_000, n_cond=100,
               n_colloc=100, iters=200_000),
    "kdv": dict(depth=7, width=200, variant="modified", latent=200,
                partition=[0, 200], m=200, n_train=5_000, n_cond=200,
                n_colloc=200, iters=200_000),
}

# reduced settings for a single desktop core (acceptance-suite scale)
_DESK = {
    "pendulum": dict(depth=4, width=64, variant="modified", latent=64,
                     partition=[0, 32, 64], m=0, n_train=2_000, n_cond=1,
                     n_colloc=50, iters=30_000, batch_size=16),
    "inhom-ode": dict(depth=4, width=64, variant="modified", latent=64,
                  partition=[0, 64], m=64, n_train=2_000, n_cond=1,
                  n_colloc=50, iters=20_000, batch_size=32),
    "stiff-kinetics": dict(depth=4, width=64, variant="modified", latent=96,
                  partition=[0, 32, 64, 96], m=0, n_train=2_000, n_cond=1,
                  n_colloc=100, iters=20_000, batch_size=32,
                  out_scale=[1.0, 1e-4, 1.0]),
    "wave": dict(depth=4, width=64, variant="modified", latent=64,
                 partition=[0, 64], m=64, n_train=1_000, n_cond=50,
                 n_colloc=80, iters=20_000, batch_size=16),
    "diffusion-reaction": dict(depth=4, width=48, variant="modified", latent=48,
               partition=[0, 48], m=48, n_train=1_000, n_cond=48,
               n_colloc=60, iters=12_000, batch_size=16),
    "kdv": dict(depth=4, width=64, variant="modified", latent=64,
                partition=[0, 64], m=96, n_train=500, n_cond=96,
                n_colloc=96, iters=15_000, batch_size=32),
}


def default_config(problem_id, scale="desk", **overrides):
    problem_id = problems._ALIASES.get(problem_id, problem_id)
    table = {"paper": _PAPER, "desk": _DESK}[scale]
    if problem_id not in table:
        raise ValueError(f"unknown problem {problem_id!r}")
    row = dict(table[problem_id])
    problem = problems.get(problem_id)
    cfg = dict(
        problem=problem_id,
        branch_depth=row["depth"],
        branch_width=row["width"],
        trunk_depth=row["depth"],
        trunk_width=row["width"],
        variant=row["variant"],
        latent=row["latent"],
        partition=row["partition"],
        out_scale=row.get("out_scale", [1.0] * (len(row["partition"]) - 1)),
        m=row["m"],
        n_train=row["n_train"],
        n_cond=row["n_cond"],
        n_colloc=row["n_colloc"],
        dt=problem.dt,
        iters=row["iters"],
        batch_size=row.get("batch_size", 10_000),
    )
    cfg.update(overrides)
    return RunConfig(**cfg)


def _branch_in_dims(cfg: RunConfig):
    problem = problems.get(cfg.problem)
    if cfg.problem in ("pendulum", "stiff-kinetics"):
        return [problem.n_out]
    if cfg.problem == "inhom-ode":
        return [cfg.m, 1]
    return [cfg.m]


def build_operator_net(cfg: RunConfig):
    """Glorot-initialized OperatorNet per the config (deterministic per seed)."""
    problem = problems.get(cfg.problem)
    branch_ins = _branch_in_dims(cfg)
    branches = [
        Mlp.glorot(
            MlpSpec(in_dim, cfg.latent, cfg.branch_width, cfg.branch_depth, cfg.variant),
            seed=cfg.seed_init + 101 * (i + 1),
        )
        for i, in_dim in enumerate(branch_ins)
    ]
    trunk = Mlp.glorot(
        MlpSpec(problem.trunk_in_dim, cfg.latent, cfg.trunk_width, cfg.trunk_depth, cfg.variant),
        seed=cfg.seed_init,
    )
    return OperatorNet(branches, trunk, cfg.partition, out_scale=cfg.out_scale)
