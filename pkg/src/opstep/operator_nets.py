"""DeepONet composition: branch/trunk merge, output partitioning, scaling.

An :class:`OperatorNet` maps an input function (sampled on a fixed sensor
grid) and a query coordinate to one or more outputs:

    output_i(u)(y) = scale_i * sum_{k in slice_i} (prod_j branch_j(u)[k]) * trunk(y)[k]

Queries may be jets, in which case every output is returned as a jet carrying
its derivatives with respect to the seeded coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Jet, jet_const
from .networks import Mlp

__all__ = ["SensorGrid", "OperatorNet", "onet_eval", "onet_residual", "query_jet"]


@dataclass(frozen=True)
class SensorGrid:
    """Fixed locations where input functions are sampled for the branch net."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("sensor grid must be a non-empty 1-D array")
        if pts.size > 1 and np.any(np.diff(pts) <= 0):
            raise ValueError("sensor grid must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def m(self):
        return self.points.size


def query_jet(columns, seed_index, order):
    """Assemble a trunk-input jet from coordinate columns.

    ``columns`` is a list of ``(n, 1)`` float arrays, one per trunk input
    dimension.  Coordinate ``seed_index`` carries the derivative seed; a
    ``None`` seed gives a plain (order-0) evaluation.  The derivative
    coefficient is stored as a ``(1, d)`` indicator row and broadcasts
    through the network.
    """
    cols = [np.asarray(c, dtype=np.float64).reshape(-1, 1) for c in columns]
    x0 = cols[0] if len(cols) == 1 else np.hstack(cols)
    if seed_index is None or order == 0:
        return jet_const(x0, order)
    if not isinstance(seed_index, int):
        # mixed partials would need several seeds at once
        from .errors import UnsupportedDerivativeError

        raise UnsupportedDerivativeError("seed one coordinate per jet pass")
    indicator = np.zeros((1, len(cols)))
    indicator[0, seed_index] = 1.0
    coeffs = [x0, indicator] + [0.0] * (order - 1)
    return Jet(coeffs)


class OperatorNet:
    """Branch network(s) + trunk network + output partition + output scales."""

    def __init__(self, branches, trunk, partition, out_scale=None):
        if isinstance(branches, Mlp):
            branches = [branches]
        if len(branches) not in (1, 2):
            raise ValueError("need one or two branch networks")
        latent = trunk.spec.out_dim
        for b in branches:
            if b.spec.out_dim != latent:
                raise ValueError("branch and trunk latent widths must agree")
        partition = [int(p) for p in partition]
        if partition[0] != 0 or partition[-1] != latent:
            raise ValueError(f"partition must run from 0 to {latent}")
        if any(b <= a for a, b in zip(partition, partition[1:])):
            raise ValueError("partition must be strictly increasing")
        self.branches = branches
        self.trunk = trunk
        self.latent = latent
        self.partition = partition
        self.n_out = len(partition) - 1
        if out_scale is None:
            out_scale = [1.0] * self.n_out
        if len(out_scale) != self.n_out:
            raise ValueError("need one output scale per output")
        self.out_scale = [float(s) for s in out_scale]

    # -- parameter handling --------------------------------------------------

    @property
    def n_params(self):
        return sum(m.spec.n_params for m in self.branches) + self.trunk.spec.n_params

    def flatten(self):
        parts = [m.flatten() for m in self.branches] + [self.trunk.flatten()]
        return np.concatenate(parts)

    def load_flat(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params:
            raise ValueError(f"flat vector has {flat.size} entries, want {self.n_params}")
        offset = 0
        for m in self.branches + [self.trunk]:
            n = m.spec.n_params
            m.load_flat(flat[offset : offset + n])
            offset += n

    def on_tape(self, tape):
        """TapeVar lift of all parameters: ``(branch_param_lists, trunk_params)``."""
        return ([m.on_tape(tape) for m in self.branches], self.trunk.on_tape(tape))

    # -- evaluation -----------------------------------------------------------

    def branch_features(self, u, u0=None, params=None):
        """Latent branch features, elementwise product across branches."""
        u = np.asarray(u, dtype=np.float64)
        if u.ndim != 2 or u.shape[1] != self.branches[0].spec.in_dim:
            raise ValueError(
                f"branch input has shape {u.shape}, want (batch, {self.branches[0].spec.in_dim})"
            )
        bparams = params[0] if params is not None else [None] * len(self.branches)
        feats = self.branches[0].forward(u, params=bparams[0])
        if len(self.branches) == 2:
            if u0 is None:
                raise ValueError("two-branch operator called without the second input")
            u0 = np.asarray(u0, dtype=np.float64)
            if u0.ndim != 2 or u0.shape[1] != self.branches[1].spec.in_dim:
                raise ValueError(
                    f"second branch input has shape {u0.shape}, "
                    f"want (batch, {self.branches[1].spec.in_dim})"
                )
            feats = feats * self.branches[1].forward(u0, params=bparams[1])
        elif u0 is not None:
            raise ValueError("single-branch operator given a second input")
        return feats

    def trunk_features(self, query, params=None):
        tparams = params[1] if params is not None else None
        return self.trunk.forward(query, params=tparams)

    def merge(self, branch_feats, trunk_feats, paired=None):
        """Partition-wise dot product of latent features.

        ``trunk_feats`` has rows for ``n_pts`` query points (possibly a jet).
        With ``paired=None`` ("grid" mode) every batch entry is combined with
        every query point, giving outputs of shape ``(batch, n_pts)``.  With
        ``paired=Q`` the query rows are the batch's own points, flattened
        batch-major, giving outputs of shape ``(batch, Q)``.
        """
        bf = branch_feats.reshape(-1, 1, self.latent)
        if paired is None:
            tf = trunk_feats  # (n_pts, latent) broadcasts against (batch, 1, latent)
        else:
            tf = trunk_feats.reshape(-1, paired, self.latent)
        prod = bf * tf
        outs = []
        for i in range(self.n_out):
            lo, hi = self.partition[i], self.partition[i + 1]
            s = prod[:, :, lo:hi].sum(axis=2)
            if self.out_scale[i] != 1.0:
                s = s * self.out_scale[i]
            outs.append(s)
        return outs

    def eval(self, u, query, u0=None, paired=None, params=None):
        """Forward pass; see :meth:`merge` for the two pairing modes."""
        bf = self.branch_features(u, u0=u0, params=params)
        tf = self.trunk_features(query, params=params)
        return self.merge(bf, tf, paired=paired)


def onet_eval(net, u, query, u0=None, paired=None, params=None):
    return net.eval(u, query, u0=u0, paired=paired, params=params)


def onet_residual(net, problem, u, queries, u0=None, params=None):
    """Residual of ``problem`` at per-sample collocation points.

    ``queries`` maps coordinate names to ``(batch, Q)`` arrays.  For each
    coordinate the problem declares a derivative order; that coordinate is
    seeded in its own jet pass (no mixed partials).  The problem's
    ``residual`` callback receives, per coordinate, the per-output jets of
    shape ``(batch, Q)`` and combines them into residual arrays.
    """
    coord_names = problem.trunk_coords
    cols = [np.asarray(queries[c], dtype=np.float64).reshape(-1, 1) for c in coord_names]
    q_count = np.asarray(queries[coord_names[0]]).shape[1]

    bf = net.branch_features(u, u0=u0, params=params)
    passes = {}
    for coord, order in problem.deriv_orders.items():
        jet_in = query_jet(cols, coord_names.index(coord), order)
        tf = net.trunk_features(jet_in, params=params)
        passes[coord] = net.merge(bf, tf, paired=q_count)
    return problem.residual(passes, {k: np.asarray(v) for k, v in queries.items()})
