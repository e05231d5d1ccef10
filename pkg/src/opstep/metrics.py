"""Error metrics for comparing predicted and reference fields."""

from __future__ import annotations

import numpy as np

from .errors import UndefinedMetricError

__all__ = ["rel_l2"]


def rel_l2(pred, ref):
    """Relative L2 error ||pred - ref|| / ||ref|| over the flattened grid."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {ref.shape}")
    denom = float(np.linalg.norm(ref.ravel()))
    if denom == 0.0:
        raise UndefinedMetricError("reference field has zero norm")
    return float(np.linalg.norm((pred - ref).ravel()) / denom)
