"""Fully-connected networks: standard tanh MLPs and the gated "modified" variant.

The forward pass is generic over the scalar payload: plain float64 arrays,
:class:`~opstep.autodiff.Jet` inputs (query derivatives), and
:class:`~opstep.autodiff.TapeVar` parameters (training) all take the same
code path.  Row-vector convention throughout: ``x @ W + b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import affine, gtanh

__all__ = ["MlpSpec", "Mlp", "glorot_init", "mlp_forward"]


@dataclass(frozen=True)
class MlpSpec:
    in_dim: int
    out_dim: int
    width: int
    depth: int  # number of hidden layers
    variant: str = "standard"  # "standard" | "modified"
    activation: str = "tanh"

    def __post_init__(self):
        if min(self.in_dim, self.out_dim, self.width, self.depth) < 1:
            raise ValueError("all MLP dimensions must be positive")
        if self.variant not in ("standard", "modified"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.activation != "tanh":
            raise ValueError("only tanh activation is provided")

    def param_shapes(self):
        """Canonical (name, shape) list; flatten/unflatten follow this order."""
        shapes = []
        if self.variant == "modified":
            shapes += [("gate_u_w", (self.in_dim, self.width)), ("gate_u_b", (self.width,))]
            shapes += [("gate_v_w", (self.in_dim, self.width)), ("gate_v_b", (self.width,))]
        prev = self.in_dim
        for k in range(self.depth):
            shapes += [(f"w{k}", (prev, self.width)), (f"b{k}", (self.width,))]
            prev = self.width
        shapes += [("w_out", (prev, self.out_dim)), ("b_out", (self.out_dim,))]
        return shapes

    @property
    def n_params(self):
        return sum(int(np.prod(s)) for _, s in self.param_shapes())


def glorot_init(spec: MlpSpec, seed: int):
    """Glorot-normal weights (std = sqrt(2/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(seed)
    params = []
    for name, shape in spec.param_shapes():
        if name.startswith("b") or name.endswith("_b"):
            params.append(np.zeros(shape))
        else:
            fan_in, fan_out = shape
            std = np.sqrt(2.0 / (fan_in + fan_out))
            params.append(rng.normal(0.0, std, size=shape))
    return params


def mlp_forward(spec: MlpSpec, params, x):
    """Evaluate the network on ``x`` (shape ``(n, in_dim)`` or jet thereof).

    ``params`` is a list in :meth:`MlpSpec.param_shapes` order; entries may be
    ndarrays or TapeVars.  The final layer is always affine (no activation).
    """
    it = iter(params)
    if spec.variant == "modified":
        uw, ub, vw, vb = next(it), next(it), next(it), next(it)
        gate_u = gtanh(affine(x, uw, ub))
        gate_v = gtanh(affine(x, vw, vb))
        h = None
        for _ in range(spec.depth):
            w, b = next(it), next(it)
            z = gtanh(affine(x if h is None else h, w, b))
            h = (1.0 - z) * gate_u + z * gate_v
        w, b = next(it), next(it)
        return affine(h, w, b)
    h = x
    for _ in range(spec.depth):
        w, b = next(it), next(it)
        h = gtanh(affine(h, w, b))
    w, b = next(it), next(it)
    return affine(h, w, b)


class Mlp:
    """An MLP spec together with its parameter arrays."""

    def __init__(self, spec: MlpSpec, params=None):
        self.spec = spec
        if params is None:
            params = [np.zeros(shape) for _, shape in spec.param_shapes()]
        self._validate(params)
        self.params = params

    def _validate(self, params):
        shapes = self.spec.param_shapes()
        if len(params) != len(shapes):
            raise ValueError("parameter count does not match spec")
        for p, (name, shape) in zip(params, shapes):
            if tuple(np.shape(p)) != tuple(shape):
                raise ValueError(f"parameter {name} has shape {np.shape(p)}, want {shape}")

    @classmethod
    def glorot(cls, spec: MlpSpec, seed: int):
        return cls(spec, glorot_init(spec, seed))

    def forward(self, x, params=None):
        return mlp_forward(self.spec, self.params if params is None else params, x)

    __call__ = forward

    def flatten(self):
        return np.concatenate([np.asarray(p).ravel() for p in self.params])

    def load_flat(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.spec.n_params:
            raise ValueError(
                f"flat vector has {flat.size} entries, spec wants {self.spec.n_params}"
            )
        out, offset = [], 0
        for _, shape in self.spec.param_shapes():
            n = int(np.prod(shape))
            out.append(flat[offset : offset + n].reshape(shape).copy())
            offset += n
        self.params = out

    def on_tape(self, tape):
        """Register every parameter as a tape leaf; returns the TapeVar list."""
        return [tape.leaf(p) for p in self.params]
