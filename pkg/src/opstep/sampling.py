"""Input-function and collocation-point generation.

Gaussian random fields use a squared-exponential kernel
``K_ij = exp(-(x_i-x_j)^2 / (2 l^2))`` sampled by Cholesky factorization with
a small diagonal jitter (the kernel choice is recorded in every train-set
manifest and run manifest).  Where a sample must be known both on the sensor
grid and at its own random points (forcing at collocation times, initial
profiles at condition points), the field is drawn jointly at the union of
points, so no interpolation is involved.

Every draw derives a per-sample generator from ``(seed, sample_index)``;
serial and parallel generation therefore agree bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGridError
from .operator_nets import SensorGrid
from .problems import soliton

__all__ = [
    "GrfSpec",
    "TrainSet",
    "grf_sample",
    "make_train_set",
    "sensor_grid_for",
    "fourier_field_function",
    "KERNEL",
]

KERNEL = "squared-exponential"
_JITTER0 = 1e-10
_JITTER_MAX = 1e-6


@dataclass(frozen=True)
class GrfSpec:
    length_scale: float
    grid: SensorGrid
    jitter: float = _JITTER0

    def __post_init__(self):
        if self.length_scale <= 0:
            raise ValueError("length scale must be positive")
        if self.jitter <= 0:
            raise ValueError("jitter must be positive")


def _se_cholesky(points, length_scale, jitter):
    """Cholesky factor of the squared-exponential Gram matrix, escalating the
    diagonal jitter by 10x up to 1e-6 before giving up."""
    d = points[:, None] - points[None, :]
    k = np.exp(-0.5 * (d / length_scale) ** 2)
    while True:
        try:
            return np.linalg.cholesky(k + jitter * np.eye(len(points)))
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > _JITTER_MAX:
                raise DegenerateGridError(
                    f"covariance not positive definite at jitter {jitter / 10.0:g}"
                )


def _grf_draw(points, length_scale, rng, jitter=_JITTER0):
    chol = _se_cholesky(np.asarray(points, dtype=np.float64), length_scale, jitter)
    return chol @ rng.standard_normal(len(points))


def grf_sample(spec: GrfSpec, seed):
    """One zero-mean draw on the spec's grid; deterministic per seed."""
    rng = np.random.default_rng(seed)
    return _grf_draw(spec.grid.points, spec.length_scale, rng, spec.jitter)


def fourier_field_function(length_scale, seed, n_features=256):
    """An analytic random function approximately distributed as the SE-kernel
    field, via random Fourier features, together with its exact antiderivative.

    Used for test-time forcings: the function is defined everywhere (not just
    on a grid) and its integral is available in closed form, which gives an
    exact reference trajectory for the forced-ODE benchmark.
    """
    rng = np.random.default_rng(seed)
    omega = rng.normal(0.0, 1.0 / length_scale, size=n_features)
    amp_cos = rng.normal(size=n_features) / np.sqrt(n_features)
    amp_sin = rng.normal(size=n_features) / np.sqrt(n_features)

    def f(t):
        t = np.asarray(t, dtype=np.float64)
        phase = np.multiply.outer(t, omega)
        return np.cos(phase) @ amp_cos + np.sin(phase) @ amp_sin

    def antiderivative(t):
        t = np.asarray(t, dtype=np.float64)
        phase = np.multiply.outer(t, omega)
        return np.sin(phase) @ (amp_cos / omega) - np.cos(phase) @ (amp_sin / omega)

    f.antiderivative = antiderivative
    return f


@dataclass
class TrainSet:
    problem_id: str
    arrays: dict
    meta: dict

    @property
    def n(self):
        return 0 if not self.arrays else next(iter(self.arrays.values())).shape[0]

    def subset(self, idx):
        return TrainSet(self.problem_id, {k: v[idx] for k, v in self.arrays.items()}, self.meta)

    def save(self, path):
        """Flat binary block + text manifest (``.data.json`` / ``.data.bin``)."""
        from .artifacts import write_blob

        return write_blob(path, self.arrays, meta={"problem": self.problem_id, **self.meta}, kind="data")

    @classmethod
    def load(cls, path):
        from .artifacts import read_blob

        arrays, meta = read_blob(path, kind="data")
        return cls(meta.get("problem", ""), arrays, meta)


def sensor_grid_for(problem, m):
    """Equi-spaced sensors on the problem's input-function domain."""
    if problem.id == "inhom-ode":
        return SensorGrid(np.linspace(0.0, problem.dt, m))
    if problem.x_domain is not None:
        return SensorGrid(np.linspace(problem.x_domain[0], problem.x_domain[1], m))
    raise ValueError(f"problem {problem.id!r} has no sensor grid (state-vector input)")


def _sample_rng(seed, i):
    return np.random.default_rng((int(seed), int(i)))


def make_train_set(problem, n_samples, n_cond, n_colloc, seed, m=None):
    """Draw ``n_samples`` input functions from the problem's declared space,
    each with fresh condition points (``n_cond``) and collocation points
    (``n_colloc``) uniform over the problem's domain.
    """
    pid = problem.id
    space = problem.input_space
    meta = {
        "problem": pid,
        "N": int(n_samples),
        "P": int(n_cond),
        "Q": int(n_colloc),
        "seed": int(seed),
        "kernel": KERNEL,
        "dt": problem.dt,
    }

    if pid in ("pendulum", "stiff-kinetics"):
        lo = np.asarray(space["low"])
        hi = np.asarray(space["high"])
        u = np.empty((n_samples, lo.size))
        t_col = np.empty((n_samples, n_colloc))
        for i in range(n_samples):
            rng = _sample_rng(seed, i)
            u[i] = rng.uniform(lo, hi)
            t_col[i] = rng.uniform(0.0, problem.dt, n_colloc)
        return TrainSet(pid, {"u": u, "t_col": t_col}, meta)

    if pid == "inhom-ode":
        m = 100 if m is None else int(m)
        grid = sensor_grid_for(problem, m)
        u = np.empty((n_samples, m))
        u0 = np.empty((n_samples, 1))
        t_col = np.empty((n_samples, n_colloc))
        f_col = np.empty((n_samples, n_colloc))
        for i in range(n_samples):
            rng = _sample_rng(seed, i)
            t_col[i] = rng.uniform(0.0, problem.dt, n_colloc)
            joint = _grf_draw(np.concatenate([grid.points, t_col[i]]), space["l"], rng)
            u[i] = joint[:m]
            f_col[i] = joint[m:]
            u0[i, 0] = rng.uniform(space["u0_low"], space["u0_high"])
        meta["m"] = m
        return TrainSet(pid, {"u": u, "u0": u0, "t_col": t_col, "f_col": f_col}, meta)

    if pid in ("wave", "diffusion-reaction"):
        m = 100 if m is None else int(m)
        grid = sensor_grid_for(problem, m)
        lo, hi = problem.x_domain
        u = np.empty((n_samples, m))
        x_ic = np.empty((n_samples, n_cond))
        u_ic = np.empty((n_samples, n_cond))
        t_bc = np.empty((n_samples, n_cond))
        x_col = np.empty((n_samples, n_colloc))
        t_col = np.empty((n_samples, n_colloc))
        for i in range(n_samples):
            rng = _sample_rng(seed, i)
            x_ic[i] = rng.uniform(lo, hi, n_cond)
            t_bc[i] = rng.uniform(0.0, problem.dt, n_cond)
            x_col[i] = rng.uniform(lo, hi, n_colloc)
            t_col[i] = rng.uniform(0.0, problem.dt, n_colloc)
            pts = np.concatenate([grid.points, x_ic[i]])
            joint = _grf_draw(pts, space["l"], rng)
            if space["kind"] == "grf-sine":
                # zero-Dirichlet compatibility for the wave benchmark
                joint = joint * np.sin(np.pi * pts)
            u[i] = joint[:m]
            u_ic[i] = joint[m:]
        meta["m"] = m
        arrays = {
            "u": u, "x_ic": x_ic, "u_ic": u_ic, "t_bc": t_bc,
            "x_col": x_col, "t_col": t_col,
        }
        return TrainSet(pid, arrays, meta)

    if pid == "kdv":
        m = 200 if m is None else int(m)
        grid = sensor_grid_for(problem, m)
        lo, hi = problem.x_domain
        u = np.empty((n_samples, m))
        a = np.empty(n_samples)
        c = np.empty(n_samples)
        x_dat = np.empty((n_samples, n_cond))
        t_dat = np.empty((n_samples, n_cond))
        s_dat = np.empty((n_samples, n_cond))
        x_col = np.empty((n_samples, n_colloc))
        t_col = np.empty((n_samples, n_colloc))
        for i in range(n_samples):
            rng = _sample_rng(seed, i)
            a[i] = rng.uniform(space["a_low"], space["a_high"])
            c[i] = rng.uniform(space["c_low"], space["c_high"])
            u[i] = soliton(grid.points, 0.0, a[i], c[i])
            x_dat[i] = rng.uniform(lo, hi, n_cond)
            t_dat[i] = rng.uniform(0.0, problem.dt, n_cond)
            s_dat[i] = soliton(x_dat[i], t_dat[i], a[i], c[i])
            x_col[i] = rng.uniform(lo, hi, n_colloc)
            t_col[i] = rng.uniform(0.0, problem.dt, n_colloc)
        meta["m"] = m
        arrays = {
            "u": u, "a": a, "c": c, "x_dat": x_dat, "t_dat": t_dat, "s_dat": s_dat,
            "x_col": x_col, "t_col": t_col,
        }
        return TrainSet(pid, arrays, meta)

    raise ValueError(f"unknown problem id {pid!r}")
