"""Benchmark catalog: residual formulas, loss assembly, exact solutions.

Six problems, each posed as "learn the map from an initial state / initial
profile (and forcing, where present) to the solution over one short horizon":

========  ===========================================  =====================
id        system                                       trunk coords / orders
========  ===========================================  =====================
pendulum  damped gravity pendulum, 2 states            t:1
inhom     ds/dt = f(t) with random forcing + IC        t:1
stiff     autocatalytic kinetics, 3 species            t:1
wave      1-D wave equation, Dirichlet box             t:2, x:2
dr        1-D diffusion + quadratic reaction           t:1, x:2
kdv       Korteweg-de Vries solitons, data + physics   t:1, x:3
========  ===========================================  =====================

Loss terms are mean-squared; the residual target is zero.  (Two of the
source formulations write their misfit terms without the square and with a
stray state subtraction inside the residual; both are treated as typos and
the squared-residual convention is used everywhere.)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import as_value, gsin, gsquare
from .operator_nets import onet_residual, query_jet

__all__ = ["ProblemSpec", "LossReport", "get", "loss", "exact_solution", "pinn_baseline", "PROBLEM_IDS"]


@dataclass
class ProblemSpec:
    id: str
    dt: float
    x_domain: tuple | None
    constants: dict
    loss_weights: dict                 # term name -> weight
    ic_output_weights: tuple | None    # per-output weights inside the ic term
    deriv_orders: dict                 # trunk coordinate -> derivative order
    trunk_coords: tuple
    loss_terms: tuple
    n_out: int
    n_branches: int
    input_space: dict
    residual: Callable = field(repr=False)

    @property
    def trunk_in_dim(self):
        return len(self.trunk_coords)


@dataclass
class LossReport:
    """Per-term losses, pre- and post-weighting; ``root`` is the tape node."""

    total: float
    terms: dict
    weighted: dict
    weights: dict
    root: object = None

    def __post_init__(self):
        # NaN totals are passed through for the training loop's guard to report
        if np.isfinite(self.total):
            assert abs(self.total - sum(self.weighted.values())) <= 1e-12 * max(
                1.0, abs(self.total)
            )


# ---------------------------------------------------------------------------
# residual evaluators
# ---------------------------------------------------------------------------


def _pendulum_residual(c):
    # zero residual must recover ds2/dt = -(b/m) s2 - (g/L) sin(s1), so both
    # drag and gravity enter the residual with a plus sign
    b_m, g_l = c["b"] / c["m"], c["g"] / c["L"]

    def residual(passes, queries):
        j1, j2 = passes["t"]
        s1, s2 = j1.coeffs[0], j2.coeffs[0]
        r1 = j1.coeffs[1] - s2
        r2 = j2.coeffs[1] + b_m * s2 + g_l * gsin(s1)
        return [r1, r2]

    return residual


def _inhom_residual(c):
    def residual(passes, queries):
        (j,) = passes["t"]
        return [j.coeffs[1] - queries["forcing"]]

    return residual


def _stiff_residual(c):
    k1, k2, k3 = c["k1"], c["k2"], c["k3"]

    def residual(passes, queries):
        j1, j2, j3 = passes["t"]
        s1, s2, s3 = j1.coeffs[0], j2.coeffs[0], j3.coeffs[0]
        cross = k3 * (s2 * s3)
        auto = k2 * gsquare(s2)
        r1 = j1.coeffs[1] + k1 * s1 - cross
        r2 = j2.coeffs[1] - k1 * s1 + auto + cross
        r3 = j3.coeffs[1] - auto
        return [r1, r2, r3]

    return residual


def _wave_residual(c):
    c2 = c["c"] ** 2

    def residual(passes, queries):
        (jt,) = passes["t"]
        (jx,) = passes["x"]
        return [jt.coeffs[2] - c2 * jx.coeffs[2]]

    return residual


def _dr_residual(c):
    D, k = c["D"], c["k"]

    def residual(passes, queries):
        (jt,) = passes["t"]
        (jx,) = passes["x"]
        s = jt.coeffs[0]
        return [jt.coeffs[1] - D * jx.coeffs[2] - k * gsquare(s)]

    return residual


def _kdv_residual(c):
    eps, mu = c["eps"], c["mu"]

    def residual(passes, queries):
        (jt,) = passes["t"]
        (jx,) = passes["x"]
        s = jt.coeffs[0]
        return [jt.coeffs[1] + eps * (s * jx.coeffs[1]) + mu * jx.coeffs[3]]

    return residual


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def _make(problem_id, dt, constants, weights, **kw):
    builders = {
        "pendulum": _pendulum_residual,
        "inhom-ode": _inhom_residual,
        "stiff-kinetics": _stiff_residual,
        "wave": _wave_residual,
        "diffusion-reaction": _dr_residual,
        "kdv": _kdv_residual,
    }
    return ProblemSpec(
        id=problem_id,
        dt=dt,
        constants=constants,
        loss_weights=weights,
        residual=builders[problem_id](constants),
        **kw,
    )


_ALIASES = {"inhom": "inhom-ode", "stiff": "stiff-kinetics", "dr": "diffusion-reaction"}


def get(problem_id, dt=None, constants=None, loss_weights=None, ic_output_weights=None,
        input_space=None):
    """Build a benchmark ProblemSpec, optionally overriding dt/constants/weights
    or the training input-function space (the operator only generalizes to
    restarts its input space covers, so rolling out a wider initial-condition
    family requires widening the space accordingly)."""
    problem_id = _ALIASES.get(problem_id, problem_id)
    if problem_id not in _DEFAULTS:
        raise ValueError(f"unknown problem id {problem_id!r}")
    d = _DEFAULTS[problem_id]
    consts = dict(d["constants"])
    if constants:
        consts.update(constants)
    weights = dict(d["loss_weights"])
    if loss_weights:
        weights.update(loss_weights)
    icw = d["ic_output_weights"] if ic_output_weights is None else tuple(ic_output_weights)
    space = dict(d["input_space"])
    if input_space:
        space.update(input_space)
    return _make(
        problem_id,
        dt=d["dt"] if dt is None else float(dt),
        constants=consts,
        weights=weights,
        ic_output_weights=icw,
        x_domain=d["x_domain"],
        deriv_orders=d["deriv_orders"],
        trunk_coords=d["trunk_coords"],
        loss_terms=d["loss_terms"],
        n_out=d["n_out"],
        n_branches=d["n_branches"],
        input_space=space,
    )


_DEFAULTS = {
    "pendulum": dict(
        dt=1.0,
        x_domain=None,
        constants={"b": 0.05, "m": 1.0, "g": 9.81, "L": 1.0},
        loss_weights={"ic": 1.0, "r": 1.0},
        ic_output_weights=None,
        deriv_orders={"t": 1},
        trunk_coords=("t",),
        loss_terms=("ic", "r"),
        n_out=2,
        n_branches=1,
        input_space={"kind": "uniform-box", "low": (-3.0, -3.0), "high": (3.0, 3.0)},
    ),
    "inhom-ode": dict(
        dt=1.0,
        x_domain=None,
        constants={},
        loss_weights={"ic": 1.0, "r": 1.0},
        ic_output_weights=None,
        deriv_orders={"t": 1},
        trunk_coords=("t",),
        loss_terms=("ic", "r"),
        n_out=1,
        n_branches=2,
        input_space={"kind": "grf+uniform", "l": 0.5, "u0_low": -2.0, "u0_high": 2.0},
    ),
    "stiff-kinetics": dict(
        dt=1.0,
        x_domain=None,
        constants={"k1": 0.04, "k2": 3.0e4, "k3": 1.0e7},
        loss_weights={"ic": 1.0, "r": 1.0},
        ic_output_weights=(1.0, 1.0e6, 1.0),
        deriv_orders={"t": 1},
        trunk_coords=("t",),
        loss_terms=("ic", "r"),
        n_out=3,
        n_branches=1,
        input_space={
            "kind": "uniform-box",
            "low": (0.0, 0.0, 0.0),
            "high": (1.0, 1.0e-4, 1.0),
        },
    ),
    "wave": dict(
        dt=1.0,
        x_domain=(0.0, 1.0),
        constants={"c": 1.0},
        loss_weights={"ic": 1.0, "bc": 1.0, "r": 1.0},
        ic_output_weights=None,
        deriv_orders={"t": 2, "x": 2},
        trunk_coords=("x", "t"),
        loss_terms=("ic", "bc", "r"),
        n_out=1,
        n_branches=1,
        input_space={"kind": "grf-sine", "l": 0.5},
    ),
    "diffusion-reaction": dict(
        dt=1.0,
        x_domain=(0.0, 1.0),
        constants={"D": 0.001, "k": 0.001},
        loss_weights={"ic": 1.0, "bc": 1.0, "r": 1.0},
        ic_output_weights=None,
        deriv_orders={"t": 1, "x": 2},
        trunk_coords=("x", "t"),
        loss_terms=("ic", "bc", "r"),
        n_out=1,
        n_branches=1,
        input_space={"kind": "grf", "l": 0.2},
    ),
    "kdv": dict(
        dt=10.0,
        x_domain=(0.0, 5.0),
        constants={"eps": 0.12, "mu": 8.0e-4},
        loss_weights={"data": 1.0, "r": 1.0},
        ic_output_weights=None,
        deriv_orders={"t": 1, "x": 3},
        trunk_coords=("x", "t"),
        loss_terms=("data", "r"),
        n_out=1,
        n_branches=1,
        input_space={
            "kind": "soliton",
            "a_low": 0.0,
            "a_high": 5.0,
            "c_low": 1.0,
            "c_high": 2.0,
        },
    ),
}

PROBLEM_IDS = tuple(_DEFAULTS)


# ---------------------------------------------------------------------------
# loss assembly
# ---------------------------------------------------------------------------


def _msq(v):
    return gsquare(v).mean()


def _paired(net, u, cols, n_pts, u0=None, params=None):
    """Plain paired-mode evaluation at per-sample points."""
    q = np.hstack([np.asarray(c, dtype=np.float64).reshape(-1, 1) for c in cols])
    return net.eval(u, q, u0=u0, paired=n_pts, params=params)


def loss(problem, net, batch, params=None):
    """Composite training loss over a batch; recorded on the tape when
    ``params`` is a TapeVar lift of the network parameters.

    Zero-weighted terms are skipped entirely (reported as 0).
    """
    if batch.n == 0:
        raise ValueError("empty batch")
    a = batch.arrays
    w = problem.loss_weights
    pid = problem.id
    roots = {}

    if pid in ("pendulum", "stiff-kinetics"):
        u = a["u"]
        if _active(w, "ic"):
            outs = net.eval(u, np.zeros((1, 1)), params=params)
            icw = problem.ic_output_weights or (1.0,) * problem.n_out
            ic = None
            for k, out in enumerate(outs):
                term = _msq(out - u[:, k : k + 1])
                if icw[k] != 1.0:
                    term = term * icw[k]
                ic = term if ic is None else ic + term
            roots["ic"] = ic
        if _active(w, "r"):
            res = onet_residual(net, problem, u, {"t": a["t_col"]}, params=params)
            roots["r"] = _sum_msq(res)

    elif pid == "inhom-ode":
        u, u0 = a["u"], a["u0"]
        if _active(w, "ic"):
            (out,) = net.eval(u, np.zeros((1, 1)), u0=u0, params=params)
            roots["ic"] = _msq(out - u0)
        if _active(w, "r"):
            res = onet_residual(
                net, problem, u, {"t": a["t_col"], "forcing": a["f_col"]},
                u0=u0, params=params,
            )
            roots["r"] = _sum_msq(res)

    elif pid in ("wave", "diffusion-reaction"):
        u = a["u"]
        n_ic = a["x_ic"].shape[1]
        if _active(w, "ic"):
            if pid == "wave":
                # value and time-derivative at t=0, one t-seeded jet pass
                jet_in = query_jet(
                    [a["x_ic"].reshape(-1, 1), np.zeros((a["x_ic"].size, 1))],
                    seed_index=1, order=1,
                )
                (out,) = net.eval(u, jet_in, paired=n_ic, params=params)
                ic = _msq(out.coeffs[0] - a["u_ic"]) + _msq(out.coeffs[1])
            else:
                (out,) = _paired(
                    net, u, [a["x_ic"], np.zeros_like(a["x_ic"])], n_ic, params=params
                )
                ic = _msq(out - a["u_ic"])
            roots["ic"] = ic
        if _active(w, "bc"):
            t_bc = a["t_bc"]
            lo, hi = problem.x_domain
            (g_lo,) = _paired(net, u, [np.full_like(t_bc, lo), t_bc], t_bc.shape[1], params=params)
            (g_hi,) = _paired(net, u, [np.full_like(t_bc, hi), t_bc], t_bc.shape[1], params=params)
            roots["bc"] = _msq(g_lo) + _msq(g_hi)
        if _active(w, "r"):
            res = onet_residual(
                net, problem, u, {"x": a["x_col"], "t": a["t_col"]}, params=params
            )
            roots["r"] = _sum_msq(res)

    elif pid == "kdv":
        u = a["u"]
        if _active(w, "data"):
            (out,) = _paired(net, u, [a["x_dat"], a["t_dat"]], a["x_dat"].shape[1], params=params)
            roots["data"] = _msq(out - a["s_dat"])
        if _active(w, "r"):
            res = onet_residual(
                net, problem, u, {"x": a["x_col"], "t": a["t_col"]}, params=params
            )
            roots["r"] = _sum_msq(res)

    else:
        raise ValueError(f"no loss assembly for problem {pid!r}")

    total_root = None
    terms, weighted, weights = {}, {}, {}
    for name in problem.loss_terms:
        wv = float(w.get(name, 1.0))
        weights[name] = wv
        if name not in roots:
            terms[name] = 0.0
            weighted[name] = 0.0
            continue
        raw = roots[name]
        contrib = raw * wv if wv != 1.0 else raw
        total_root = contrib if total_root is None else total_root + contrib
        terms[name] = float(np.asarray(as_value(raw)))
        weighted[name] = terms[name] * wv
    total = float(np.asarray(as_value(total_root)))
    return LossReport(total=total, terms=terms, weighted=weighted, weights=weights, root=total_root)


def _active(weights, name):
    return float(weights.get(name, 1.0)) != 0.0


def _sum_msq(values):
    acc = None
    for v in values:
        t = _msq(v)
        acc = t if acc is None else acc + t
    return acc


# ---------------------------------------------------------------------------
# closed-form solutions
# ---------------------------------------------------------------------------


def soliton(x, t, a, c):
    """Single-soliton field of the KdV benchmark."""
    z = (np.sqrt(c) / 2.0) * (5.0 * np.asarray(x) - 0.1 * c * np.asarray(t) - a)
    return (c / 2.0) / np.cosh(z) ** 2


def exact_solution(problem, u_descriptor, x, t):
    """Closed-form solution where one exists, else ``None``.

    wave: only for the sine initial profile (``u_descriptor == "sin-pi-x"``);
    kdv: for a single soliton (``u_descriptor == {"a": ..., "c": ...}``).
    """
    if problem.id == "wave" and u_descriptor == "sin-pi-x":
        c = problem.constants["c"]
        return np.sin(np.pi * np.asarray(x)) * np.cos(c * np.pi * np.asarray(t))
    if problem.id == "kdv" and isinstance(u_descriptor, dict):
        return soliton(x, t, u_descriptor["a"], u_descriptor["c"])
    return None


# ---------------------------------------------------------------------------
# reference dynamics (oracle side of every learned-model comparison)
# ---------------------------------------------------------------------------


def ode_system(problem):
    """Right-hand side (and Jacobian) for the state-vector benchmarks."""
    from .solvers import OdeSystem

    c = problem.constants
    if problem.id == "pendulum":
        b_m, g_l = c["b"] / c["m"], c["g"] / c["L"]

        def f(t, s):
            return np.array([s[1], -b_m * s[1] - g_l * np.sin(s[0])])

        def jac(t, s):
            return np.array([[0.0, 1.0], [-g_l * np.cos(s[0]), -b_m]])

        return OdeSystem(2, f, jac)

    if problem.id == "stiff-kinetics":
        k1, k2, k3 = c["k1"], c["k2"], c["k3"]

        def f(t, s):
            r1 = k1 * s[0]
            r2 = k2 * s[1] ** 2
            r3 = k3 * s[1] * s[2]
            return np.array([-r1 + r3, r1 - r2 - r3, r2])

        def jac(t, s):
            return np.array(
                [
                    [-k1, k3 * s[2], k3 * s[1]],
                    [k1, -2 * k2 * s[1] - k3 * s[2], -k3 * s[1]],
                    [0.0, 2 * k2 * s[1], 0.0],
                ]
            )

        return OdeSystem(3, f, jac)

    raise ValueError(f"problem {problem.id!r} is not a plain ODE system")


def reference_trajectory(problem, ic, times, forcing=None, u_descriptor=None, x_grid=None):
    """Ground truth on the requested global times (rows) / grid (columns).

    State-vector problems integrate with the matching classical solver; the
    forced ODE uses the forcing's exact antiderivative; wave and KdV use
    their closed forms; diffusion-reaction runs the implicit finite
    difference scheme on ``x_grid``.
    """
    from .solvers import fd_diffusion_reaction, rk_adaptive, stiff_implicit

    times = np.asarray(times, dtype=np.float64)
    T = float(times[-1])
    if problem.id == "pendulum":
        res = rk_adaptive(ode_system(problem), ic, T, rtol=1e-10, atol=1e-12)
        return res.sample(times)
    if problem.id == "stiff-kinetics":
        res = stiff_implicit(ode_system(problem), ic, T, rtol=1e-9, atol=1e-13)
        return res.sample(times)
    if problem.id == "inhom-ode":
        if forcing is None or not hasattr(forcing, "antiderivative"):
            raise ValueError("forced-ODE reference needs a forcing with .antiderivative")
        u0 = float(np.asarray(ic).reshape(()))
        vals = u0 + forcing.antiderivative(times) - forcing.antiderivative(0.0)
        return vals.reshape(-1, 1)
    if problem.id == "wave":
        if u_descriptor != "sin-pi-x":
            raise ValueError("wave reference exists only for the sine initial profile")
        return exact_solution(problem, "sin-pi-x", x_grid[None, :], times[:, None])
    if problem.id == "kdv":
        return soliton(x_grid[None, :], times[:, None], u_descriptor["a"], u_descriptor["c"])
    if problem.id == "diffusion-reaction":
        dt_fd = problem.dt / 200.0
        ts, fld = fd_diffusion_reaction(
            ic, D=problem.constants["D"], k=problem.constants["k"], T=T, dt=dt_fd
        )
        idx = np.round(times / dt_fd).astype(int)
        if np.max(np.abs(ts[idx] - times)) > 1e-9:
            raise ValueError("evaluation times must lie on the reference-solver grid")
        return fld[idx]
    raise ValueError(f"no reference for problem {problem.id!r}")


# ---------------------------------------------------------------------------
# the whole-domain PINN baseline (single network over [0, T])
# ---------------------------------------------------------------------------


def pinn_baseline(net, T, iters, seed, n_colloc=128, lr0=1e-3, eval_points=401, log_every=100):
    """Train a plain space-filling PINN for the pendulum over [0, T].

    Collocation points are resampled every iteration.  Returns the predicted
    trajectory on a uniform grid and the loss history, so callers can compare
    against the windowed operator approach.
    """
    from .autodiff import Tape, grad, jet_seed
    from .training import OptimState, adam_step, TrainLog

    problem = get("pendulum")
    c = problem.constants
    b_m, g_l = c["b"] / c["m"], c["g"] / c["L"]
    s0 = np.array([1.0, 1.0])

    rng = np.random.default_rng(seed)
    flat = net.flatten()
    opt = OptimState.init(flat.size, lr0=lr0)
    tape = Tape()
    log = TrainLog()

    for it in range(iters):
        t_col = rng.uniform(0.0, T, size=(n_colloc, 1))
        tape.reset()
        pvars = net.on_tape(tape)

        out0 = net.forward(np.zeros((1, 1)), params=pvars)
        ic = _msq(out0[:, 0:1] - s0[0]) + _msq(out0[:, 1:2] - s0[1])

        jt = jet_seed(t_col, 1)
        out = net.forward(jt, params=pvars)
        s1, s2 = out.coeffs[0][:, 0:1], out.coeffs[0][:, 1:2]
        d1, d2 = out.coeffs[1][:, 0:1], out.coeffs[1][:, 1:2]
        r1 = d1 - s2
        r2 = d2 + b_m * s2 + g_l * s1.sin()
        res = _msq(r1) + _msq(r2)

        root = ic + res
        grads = grad(root, pvars)
        flat_grad = np.concatenate([g.ravel() for g in grads])
        flat, opt = adam_step(flat, flat_grad, opt)
        net.load_flat(flat)

        if it % log_every == 0 or it == iters - 1:
            log.append(it, {"ic": float(ic.value), "r": float(res.value)}, opt.lr())

    times = np.linspace(0.0, T, eval_points)
    traj = net.forward(times.reshape(-1, 1))
    return times, traj, log
