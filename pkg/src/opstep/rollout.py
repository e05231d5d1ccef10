"""Iterative composition of a short-horizon operator into a long trajectory.

Each window evaluates the operator on the current input function over
``[0, dt]``; the prediction at ``t = dt`` (on the sensor grid, read directly
from the evaluated block, never interpolated) becomes the next window's
input.  Blocks are concatenated with the duplicated window-boundary sample
kept once: the exported value at global time ``k*dt`` is exactly the restart
vector ``u^k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import RolloutDivergedError
from .metrics import rel_l2

__all__ = [
    "RolloutPlan",
    "RolloutResult",
    "OperatorPropagator",
    "FlowMapPropagator",
    "QuadraturePropagator",
    "rollout",
    "rollout_forced",
    "error_vs_horizon",
]

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class RolloutPlan:
    """Window schedule and per-window evaluation grid.

    ``times`` are window-relative, must start at 0 and end exactly at ``dt``
    so the restart reads an evaluated sample.  ``x_grid`` is the sensor grid
    for field-valued problems, None for state-vector problems.
    """

    n_steps: int
    dt: float
    times: np.ndarray
    x_grid: Optional[np.ndarray] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if self.n_steps < 1:
            raise ValueError("need at least one window")
        if times[0] != 0.0 or times[-1] != self.dt or np.any(np.diff(times) <= 0):
            raise ValueError("window times must increase from 0 to dt exactly")
        object.__setattr__(self, "times", times)
        if self.x_grid is not None:
            object.__setattr__(self, "x_grid", np.asarray(self.x_grid, dtype=np.float64))

    @classmethod
    def make(cls, T, dt, points_per_window=101, x_grid=None):
        n = int(round(T / dt))
        if abs(n * dt - T) > 1e-9 * max(T, 1.0):
            raise ValueError("T must be an integer multiple of dt")
        return cls(n, float(dt), np.linspace(0.0, dt, points_per_window), x_grid)

    @property
    def T(self):
        return self.n_steps * self.dt


@dataclass
class RolloutResult:
    times: np.ndarray      # global, strictly increasing, single-valued
    field: np.ndarray      # (len(times), state_dim_or_m)
    restarts: np.ndarray   # (n_steps + 1, state_dim_or_m); row 0 is u^0


class OperatorPropagator:
    """Evaluate a trained OperatorNet over one window."""

    def __init__(self, net):
        self.net = net

    def propagate(self, u, times, x_grid=None):
        if x_grid is None:
            outs = self.net.eval(u[None, :], times.reshape(-1, 1))
            return np.column_stack([o[0] for o in outs])
        nt, m = times.size, x_grid.size
        q = np.column_stack([np.tile(x_grid, nt), np.repeat(times, m)])
        (out,) = self.net.eval(u[None, :], q)
        return out[0].reshape(nt, m)

    def propagate_forced(self, u0, forcing, t_offset, times, sensor_times):
        f_window = np.atleast_1d(forcing(t_offset + sensor_times))
        (out,) = self.net.eval(
            f_window[None, :], times.reshape(-1, 1), u0=np.array([[u0]])
        )
        return out[0].reshape(-1, 1)


class FlowMapPropagator:
    """Exact flow map ``(u, times) -> (nt, k)``; oracle for the plumbing."""

    def __init__(self, flow):
        self.flow = flow

    def propagate(self, u, times, x_grid=None):
        return self.flow(u, times)


class QuadraturePropagator:
    """Exact propagator of ds/dt = f(t) by Gauss-Legendre quadrature."""

    def __init__(self, n_nodes=40):
        self.nodes, self.weights = np.polynomial.legendre.leggauss(n_nodes)

    def propagate_forced(self, u0, forcing, t_offset, times, sensor_times=None):
        out = np.empty((times.size, 1))
        for i, tau in enumerate(times):
            if tau == 0.0:
                out[i, 0] = u0
                continue
            half = 0.5 * tau
            pts = t_offset + half * (self.nodes + 1.0)
            out[i, 0] = u0 + half * float(self.weights @ forcing(pts))
        return out


def _check_block(block, window):
    if not np.all(np.isfinite(block)) or np.max(np.abs(block)) > DIVERGENCE_LIMIT:
        raise RolloutDivergedError(window)


def _concat(blocks, plan):
    nt = plan.times.size
    out_t = [plan.times]
    out_f = [blocks[0]]
    for k in range(1, len(blocks)):
        out_t.append(k * plan.dt + plan.times[1:])
        out_f.append(blocks[k][1:])
    return np.concatenate(out_t), np.concatenate(out_f, axis=0)


def rollout(propagator, u0, plan: RolloutPlan):
    """Compose the operator over ``plan.n_steps`` windows starting from u0.

    The kept sample at each internal window boundary is the restart vector
    itself (window k's prediction at t=dt), so the global field is
    single-valued by construction.
    """
    u = np.asarray(u0, dtype=np.float64).copy()
    if plan.x_grid is not None and u.size != plan.x_grid.size:
        raise ValueError("initial profile must live on the plan's sensor grid")
    blocks = []
    restarts = [u.copy()]
    for k in range(1, plan.n_steps + 1):
        block = propagator.propagate(u, plan.times, plan.x_grid)
        _check_block(block, k)
        # blocks cover [ (k-1) dt, k dt ]; restart row is block[-1], except
        # the very first sample of window 1 which is the given u0
        blocks.append(block)
        u = block[-1].copy()
        restarts.append(u.copy())
    times, field = _concat(blocks, plan)
    return RolloutResult(times, field, np.array(restarts))


def rollout_forced(propagator, u0, forcing, plan: RolloutPlan, sensor_times=None):
    """Rollout for the forced scalar ODE: window k sees the forcing slice
    ``f((k-1) dt + tau)`` on the forcing sensors plus the scalar restart value."""
    if sensor_times is None and isinstance(propagator, OperatorPropagator):
        m = propagator.net.branches[0].spec.in_dim
        sensor_times = np.linspace(0.0, plan.dt, m)
    u0 = float(np.asarray(u0).reshape(()))
    blocks = []
    restarts = [np.array([u0])]
    u = u0
    for k in range(1, plan.n_steps + 1):
        block = propagator.propagate_forced(
            u, forcing, (k - 1) * plan.dt, plan.times, sensor_times
        )
        _check_block(block, k)
        blocks.append(block)
        u = float(block[-1, 0])
        restarts.append(np.array([u]))
    times, field = _concat(blocks, plan)
    return RolloutResult(times, field, np.array(restarts))


def error_vs_horizon(run_fn, reference_fn, test_inputs, T_list, plan_for):
    """Mean relative L2 error per horizon, averaged over test inputs.

    ``run_fn(test_input, plan)`` produces a RolloutResult; ``reference_fn
    (test_input, times)`` the matching ground truth.  A single rollout to
    max(T_list) per input is truncated for the shorter horizons.  Returns a
    list of (T, mean_error) rows, one per requested T, in input order.
    """
    T_list = list(T_list)
    t_max = max(T_list)
    per_T = {T: [] for T in T_list}
    for ti in test_inputs:
        plan = plan_for(t_max)
        result = run_fn(ti, plan)
        ref = reference_fn(ti, result.times)
        for T in T_list:
            mask = result.times <= T + 1e-12
            per_T[T].append(rel_l2(result.field[mask], ref[mask]))
    return [(T, float(np.mean(per_T[T]))) for T in T_list]
