"""Mini-batch Adam optimization over flattened network parameters.

The learning rate follows a staircase exponential decay: ``lr0 * 0.9**(it // 5000)``.
Batches are drawn over input-function indices; each drawn sample contributes
all of its collocation points.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, grad
from .errors import NonFiniteGradientError
from . import problems as _problems

__all__ = ["OptimState", "TrainLog", "adam_step", "train"]

LOG_COLUMNS = ("iteration", "loss_total", "loss_ic", "loss_bc", "loss_r", "loss_data", "lr")


@dataclass
class OptimState:
    step: int
    m: np.ndarray
    v: np.ndarray
    lr0: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_rate: float = 0.9
    decay_every: int = 5000

    @classmethod
    def init(cls, n_params, lr0=1e-3, **kw):
        return cls(step=0, m=np.zeros(n_params), v=np.zeros(n_params), lr0=lr0, **kw)

    def lr(self):
        """Learning rate that the *next* step will use."""
        return self.lr0 * self.decay_rate ** (self.step // self.decay_every)


def adam_step(params, grads, opt: OptimState):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    if params.shape != grads.shape or params.shape != opt.m.shape:
        raise ValueError("parameter/gradient/moment shapes must match")
    bad = ~np.isfinite(grads)
    if bad.any():
        raise NonFiniteGradientError(int(np.argmax(bad)))
    t = opt.step
    lr = opt.lr0 * opt.decay_rate ** (t // opt.decay_every)
    m = opt.beta1 * opt.m + (1.0 - opt.beta1) * grads
    v = opt.beta2 * opt.v + (1.0 - opt.beta2) * grads * grads
    m_hat = m / (1.0 - opt.beta1 ** (t + 1))
    v_hat = v / (1.0 - opt.beta2 ** (t + 1))
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + opt.eps)
    new_opt = OptimState(
        step=t + 1, m=m, v=v, lr0=opt.lr0, beta1=opt.beta1, beta2=opt.beta2,
        eps=opt.eps, decay_rate=opt.decay_rate, decay_every=opt.decay_every,
    )
    return new_params, new_opt


class TrainLog:
    """Per-interval records of (iteration, per-term losses, lr, wall-clock)."""

    def __init__(self):
        self.iterations = []
        self.losses = []          # list of dicts: term -> value
        self.lrs = []
        self.wallclock = []
        self._t0 = time.perf_counter()

    def append(self, iteration, term_losses, lr):
        if self.iterations and iteration <= self.iterations[-1]:
            raise ValueError("iterations must be strictly increasing")
        self.iterations.append(int(iteration))
        self.losses.append(dict(term_losses))
        self.lrs.append(float(lr))
        self.wallclock.append(time.perf_counter() - self._t0)

    def totals(self):
        return np.array([sum(d.values()) for d in self.losses])

    def to_csv(self):
        """Deterministic CSV (no wall-clock column, '.' decimal separator)."""
        lines = [",".join(LOG_COLUMNS)]
        for it, d, lr in zip(self.iterations, self.losses, self.lrs):
            row = [
                str(it),
                repr(sum(d.values())),
                repr(d.get("ic", 0.0)),
                repr(d.get("bc", 0.0)),
                repr(d.get("r", 0.0)),
                repr(d.get("data", 0.0)),
                repr(lr),
            ]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def train(
    problem,
    net,
    trainset,
    iters,
    batch_size,
    seed,
    lr0=1e-3,
    log_every=100,
    clip_norm=None,
    callback=None,
):
    """Train an operator network on a sampled training set.

    Deterministic given (seed, trainset, initial parameters).  Raises
    :class:`NonFiniteGradientError` on NaN/Inf gradients, leaving the last
    good parameters in ``net``.  Returns ``(flat_params, TrainLog)``.
    """
    n = trainset.n
    if n == 0:
        raise ValueError("training set is empty")
    batch_size = min(batch_size, n)
    rng = np.random.default_rng(seed)
    flat = net.flatten()
    opt = OptimState.init(flat.size, lr0=lr0)
    tape = Tape()
    log = TrainLog()

    for it in range(iters):
        idx = rng.choice(n, size=batch_size, replace=False)
        batch = trainset.subset(idx)

        tape.reset()
        params = net.on_tape(tape)
        report = _problems.loss(problem, net, batch, params=params)
        if not np.isfinite(report.total):
            raise NonFiniteGradientError(-1, f"non-finite loss at iteration {it}")

        leaves = [p for group in params[0] for p in group] + list(params[1])
        grads = grad(report.root, leaves)
        flat_grad = np.concatenate([g.ravel() for g in grads])
        if clip_norm is not None:
            gn = float(np.linalg.norm(flat_grad))
            if gn > clip_norm:
                flat_grad = flat_grad * (clip_norm / gn)

        lr_used = opt.lr()
        flat, opt = adam_step(flat, flat_grad, opt)
        net.load_flat(flat)

        if it % log_every == 0 or it == iters - 1:
            log.append(it, report.weighted, lr_used)
            if callback is not None:
                callback(it, report)

    return flat, log
