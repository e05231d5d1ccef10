"""Classical reference solvers used as test oracles and ground-truth generators.

* :func:`rk_adaptive` -- Dormand-Prince 5(4) embedded pair with PI step-size
  control and cubic-Hermite dense output (FSAL exploited).
* :func:`stiff_implicit` -- TR-BDF2: one-step, L-stable, both implicit stages
  share the same iteration matrix, with the 3rd-order embedded error estimate
  filtered through that matrix.  Chosen over a full Radau IIA implementation
  as a deliberately simpler stiff-capable oracle.
* :func:`fd_diffusion_reaction` -- Crank-Nicolson in time / centered second
  differences in space for the 1-D diffusion-reaction equation, with a Newton
  solve of the quadratic reaction term each step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import NewtonFailureError, StiffnessSuspectedError

__all__ = ["OdeSystem", "SolveResult", "rk_adaptive", "stiff_implicit", "fd_diffusion_reaction"]


@dataclass
class OdeSystem:
    n: int
    f: Callable  # f(t, y) -> dy/dt
    jac: Optional[Callable] = None  # jac(t, y) -> (n, n)


@dataclass
class SolveResult:
    ts: np.ndarray          # accepted step times, strictly increasing from 0 to T
    ys: np.ndarray          # (steps, n)
    fs: np.ndarray          # derivative at each accepted point
    n_accepted: int
    n_rejected: int
    rtol: float
    atol: float

    def sample(self, t_query):
        """Dense output by cubic Hermite interpolation on accepted steps."""
        t_query = np.atleast_1d(np.asarray(t_query, dtype=np.float64))
        ts, ys, fs = self.ts, self.ys, self.fs
        idx = np.clip(np.searchsorted(ts, t_query, side="right") - 1, 0, len(ts) - 2)
        t0, t1 = ts[idx], ts[idx + 1]
        h = (t1 - t0)[:, None]
        th = ((t_query - t0) / (t1 - t0))[:, None]
        th2, th3 = th * th, th * th * th
        h00 = 2 * th3 - 3 * th2 + 1
        h10 = th3 - 2 * th2 + th
        h01 = -2 * th3 + 3 * th2
        h11 = th3 - th2
        return h00 * ys[idx] + h10 * h * fs[idx] + h01 * ys[idx + 1] + h11 * h * fs[idx + 1]


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


def _initial_step(f, t0, y0, T, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    f0 = f(t0, y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 * T if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    return min(h0, 0.1 * T), f0


def rk_adaptive(sys: OdeSystem, s0, T, rtol=1e-8, atol=1e-10, max_steps=1_000_000):
    """Integrate from 0 to T with the adaptive Dormand-Prince 5(4) pair."""
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    f = sys.f
    y = np.asarray(s0, dtype=np.float64).copy()
    t = 0.0
    h, k1 = _initial_step(f, 0.0, y, T, rtol, atol)
    ts, ys, fs = [0.0], [y.copy()], [k1.copy()]
    n_acc = n_rej = 0
    err_prev = 1e-4
    k = np.empty((7, sys.n))

    while t < T:
        if h < 1e-14 * T or n_acc + n_rej >= max_steps:
            raise StiffnessSuspectedError(
                f"step size underflow or excessive work at t={t:g} "
                f"(h={h:g}, {n_acc + n_rej} steps); use the implicit solver"
            )
        h = min(h, T - t)
        k[0] = k1
        for i in range(1, 6):
            k[i] = f(t + _DP_C[i] * h, y + h * (_DP_A[i - 1] @ k[:i]))
        y_new = y + h * (_DP_A[5] @ k[:6])
        k[6] = f(t + h, y_new)  # FSAL

        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean((h * (_DP_E @ k) / scale) ** 2))

        if err <= 1.0:
            t += h
            y = y_new
            k1 = k[6].copy()
            ts.append(t)
            ys.append(y.copy())
            fs.append(k1.copy())
            n_acc += 1
            factor = 0.9 * max(err, 1e-10) ** -0.14 * max(err_prev, 1e-10) ** 0.08
            err_prev = max(err, 1e-10)
        else:
            n_rej += 1
            factor = max(0.2, 0.9 * err**-0.2)
        h *= min(5.0, max(0.2, factor))

    return SolveResult(
        np.array(ts), np.array(ys), np.array(fs), n_acc, n_rej, rtol, atol
    )


# TR-BDF2 constants (gamma = 2 - sqrt(2); both stages share d = gamma*h/2)
_TRBDF2_GAMMA = 2.0 - np.sqrt(2.0)
_W0 = 0.5 - 1.0 / (6.0 * _TRBDF2_GAMMA)
_W1 = 1.0 / (6.0 * _TRBDF2_GAMMA * (1.0 - _TRBDF2_GAMMA))
_W2 = (2.0 - 3.0 * _TRBDF2_GAMMA) / (6.0 * (1.0 - _TRBDF2_GAMMA))


def _numeric_jac(f, t, y, f0):
    n = y.size
    jac = np.empty((n, n))
    for j in range(n):
        delta = np.sqrt(np.finfo(float).eps) * max(abs(y[j]), 1e-8)
        yp = y.copy()
        yp[j] += delta
        jac[:, j] = (f(t, yp) - f0) / delta
    return jac


def _newton(f, t, y_guess, rhs, d, mat_inv, scale, kappa=1e-2, max_iter=15):
    """Solve y - d*f(t, y) = rhs with a frozen-matrix Newton iteration.

    Accepts once the scaled increment is below ``kappa`` (the step-error test
    uses 1.0 in the same norm), then keeps polishing while convergence is
    fast, down to three decades further; this keeps linear invariants of the
    flow (e.g. mass conservation) at roundoff level over long integrations.
    """
    y = y_guess.copy()
    prev = np.inf
    ok = False
    for _ in range(max_iter):
        resid = y - d * f(t, y) - rhs
        dy = mat_inv @ resid
        y -= dy
        nrm = np.sqrt(np.mean((dy / scale) ** 2))
        if nrm < kappa:
            ok = True
        if nrm < 1e-3 * kappa or nrm > 0.5 * prev:
            break
        prev = nrm
    return y, ok


def stiff_implicit(sys: OdeSystem, s0, T, rtol=1e-6, atol=1e-9):
    """Integrate from 0 to T with adaptive TR-BDF2 (L-stable, one-step)."""
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    f = sys.f
    gamma = _TRBDF2_GAMMA
    y = np.asarray(s0, dtype=np.float64).copy()
    t = 0.0
    h, f_n = _initial_step(f, 0.0, y, T, rtol, atol)
    ts, ys, fs = [0.0], [y.copy()], [f_n.copy()]
    n_acc = n_rej = 0
    eye = np.eye(sys.n)
    just_rejected = False

    while t < T:
        if h < 1e-12 * max(T, 1.0):
            raise NewtonFailureError(f"step size underflow at t={t:g}")
        h = min(h, T - t)
        d = gamma * h / 2.0
        jac = sys.jac(t, y) if sys.jac is not None else _numeric_jac(f, t, y, f_n)
        mat_inv = np.linalg.inv(eye - d * jac)
        scale = atol + rtol * np.abs(y)

        y_mid, ok = _newton(
            f, t + gamma * h, y + gamma * h * f_n, y + d * f_n, d, mat_inv, scale
        )
        if ok:
            f_mid = f(t + gamma * h, y_mid)
            c1 = 1.0 / (gamma * (2.0 - gamma))
            c2 = (1.0 - gamma) ** 2 / (gamma * (2.0 - gamma))
            rhs = c1 * y_mid - c2 * y
            y_new, ok = _newton(f, t + h, y_mid, rhs, d, mat_inv, scale)
        if not ok:
            h *= 0.25
            n_rej += 1
            just_rejected = True
            continue

        f_new = f(t + h, y_new)
        # 3rd-order companion via interpolatory quadrature, stiffly filtered
        y3 = y + h * (_W0 * f_n + _W1 * f_mid + _W2 * f_new)
        est = mat_inv @ (y3 - y_new)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean((est / scale) ** 2))

        factor = min(4.0, max(0.1, 0.9 * max(err, 1e-10) ** (-1.0 / 3.0)))
        if err <= 1.0:
            t += h
            y = y_new
            f_n = f_new
            ts.append(t)
            ys.append(y.copy())
            fs.append(f_n.copy())
            n_acc += 1
            if just_rejected:
                factor = min(factor, 1.0)  # no growth right after a rejection
            just_rejected = False
        else:
            n_rej += 1
            just_rejected = True
            factor = min(factor, 0.9)
        h *= factor

    return SolveResult(
        np.array(ts), np.array(ys), np.array(fs), n_acc, n_rej, rtol, atol
    )


def fd_diffusion_reaction(u0, D, k, T, nx=None, dt=None, newton_tol=1e-12):
    """Crank-Nicolson / centered-difference solve of
    ``u_t = D u_xx + k u^2`` on [0, 1] with zero Dirichlet boundaries.

    ``u0`` is the initial profile on ``nx`` equi-spaced points (boundaries
    included).  Returns ``(times, field)`` with ``field[0] = u0`` and zero
    boundary columns for t > 0.  Second order in both dt and dx.
    """
    u0 = np.asarray(u0, dtype=np.float64)
    nx = u0.size if nx is None else int(nx)
    if nx != u0.size:
        raise ValueError("u0 length must equal nx")
    if nx < 3:
        raise ValueError("need at least 3 grid points")
    dt = T / 200.0 if dt is None else float(dt)
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be an integer multiple of dt")

    dx = 1.0 / (nx - 1)
    r = D / dx**2
    n_in = nx - 2  # interior unknowns

    def lap(w):
        # interior Laplacian with zero boundaries
        full = np.zeros(nx)
        full[1:-1] = w
        return r * (full[:-2] - 2.0 * w + full[2:])

    field = np.empty((n_steps + 1, nx))
    field[0] = u0
    w = u0[1:-1].copy()

    # banded Jacobian skeleton: I - dt/2 * (D*L + 2k diag(w))
    band = np.zeros((3, n_in))
    band[0, 1:] = -0.5 * dt * r
    band[2, :-1] = -0.5 * dt * r

    for step in range(1, n_steps + 1):
        expl = w + 0.5 * dt * (lap(w) + k * w * w)
        z = w.copy()
        converged = False
        for _ in range(20):
            resid = z - 0.5 * dt * (lap(z) + k * z * z) - expl
            band[1, :] = 1.0 + dt * r - dt * k * z
            dz = solve_banded((1, 1), band, resid)
            z -= dz
            if np.max(np.abs(dz)) < newton_tol * max(1.0, np.max(np.abs(z))):
                converged = True
                break
        if not converged:
            raise NewtonFailureError(f"Newton stalled at step {step}")
        w = z
        field[step, 0] = field[step, -1] = 0.0
        field[step, 1:-1] = w

    return np.linspace(0.0, n_steps * dt, n_steps + 1), field
