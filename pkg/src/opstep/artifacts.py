"""On-disk artifacts: checkpoints, field/train-set blobs, run manifests.

Every artifact is a pair of files: a canonical-JSON manifest (sorted keys,
fixed float repr) and a little-endian float64 binary blob whose layout the
manifest declares.  Artifacts are reconstructible from the pair alone, and
save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
import subprocess
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .networks import Mlp, MlpSpec
from .operator_nets import OperatorNet

__all__ = [
    "save_checkpoint",
    "load_checkpoint",
    "write_blob",
    "read_blob",
    "write_run_manifest",
    "CKPT_VERSION",
]

CKPT_VERSION = 1


def _dump_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _mlp_spec_dict(spec: MlpSpec):
    return {
        "in_dim": spec.in_dim,
        "out_dim": spec.out_dim,
        "width": spec.width,
        "depth": spec.depth,
        "variant": spec.variant,
        "activation": spec.activation,
    }


def _mlp_spec_from(d):
    return MlpSpec(
        in_dim=d["in_dim"], out_dim=d["out_dim"], width=d["width"],
        depth=d["depth"], variant=d["variant"], activation=d["activation"],
    )


def save_checkpoint(path, net: OperatorNet, problem_id="", seeds=None, iteration=0, extra=None):
    """Write ``<path>.ckpt.json`` + ``<path>.ckpt.bin``; returns the json path."""
    path = Path(path)
    flat = net.flatten()
    manifest = {
        "format_version": CKPT_VERSION,
        "problem": problem_id,
        "branch_specs": [_mlp_spec_dict(b.spec) for b in net.branches],
        "trunk_spec": _mlp_spec_dict(net.trunk.spec),
        "latent": net.latent,
        "partition": list(net.partition),
        "out_scale": list(net.out_scale),
        "seeds": dict(seeds or {}),
        "iteration": int(iteration),
        "param_count": int(flat.size),
    }
    if extra:
        manifest["extra"] = extra
    jpath = path.with_suffix(".ckpt.json")
    bpath = path.with_suffix(".ckpt.bin")
    jpath.write_text(_dump_json(manifest))
    bpath.write_bytes(flat.astype("<f8").tobytes())
    return jpath


def load_checkpoint(path):
    """Rebuild the OperatorNet; validates version, counts, and shapes before
    accepting.  Returns ``(net, manifest)``."""
    path = Path(path)
    stem = path.name
    for suf in (".ckpt.json", ".ckpt.bin", ".json", ".bin"):
        if stem.endswith(suf):
            stem = stem[: -len(suf)]
            break
    base = path.parent / stem
    jpath = base.with_suffix(".ckpt.json")
    bpath = base.with_suffix(".ckpt.bin")
    if not jpath.exists() or not bpath.exists():
        raise CheckpointError(f"missing checkpoint pair at {base}")
    manifest = json.loads(jpath.read_text())
    if manifest.get("format_version") != CKPT_VERSION:
        raise CheckpointError(f"unknown checkpoint version {manifest.get('format_version')!r}")

    try:
        branches = [Mlp(_mlp_spec_from(d)) for d in manifest["branch_specs"]]
        trunk = Mlp(_mlp_spec_from(manifest["trunk_spec"]))
        net = OperatorNet(
            branches, trunk, manifest["partition"], out_scale=manifest["out_scale"]
        )
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"inconsistent checkpoint manifest: {exc}") from exc

    blob = bpath.read_bytes()
    declared = manifest["param_count"]
    if declared != net.n_params:
        raise CheckpointError(
            f"manifest declares {declared} parameters but the specs/partition imply {net.n_params}"
        )
    if len(blob) != declared * 8:
        raise CheckpointError(
            f"blob holds {len(blob)} bytes, manifest declares {declared * 8}"
        )
    net.load_flat(np.frombuffer(blob, dtype="<f8"))
    return net, manifest


def write_blob(path, arrays, meta=None, kind="field"):
    """Write named float64 arrays as ``<path>.<kind>.json`` + ``.<kind>.bin``.

    Arrays are stored in sorted-name order inside one little-endian blob.
    """
    path = Path(path)
    names = sorted(arrays)
    manifest = {
        "format_version": 1,
        "kind": kind,
        "meta": meta or {},
        "entries": [
            {"name": n, "shape": list(np.asarray(arrays[n]).shape)} for n in names
        ],
    }
    blob = b"".join(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes() for n in names)
    jpath = path.with_suffix(f".{kind}.json")
    bpath = path.with_suffix(f".{kind}.bin")
    jpath.write_text(_dump_json(manifest))
    bpath.write_bytes(blob)
    return jpath


def read_blob(path, kind="field"):
    """Inverse of :func:`write_blob`; returns ``(arrays, meta)``."""
    path = Path(path)
    stem = path.name
    for suf in (f".{kind}.json", f".{kind}.bin"):
        if stem.endswith(suf):
            stem = stem[: -len(suf)]
            break
    base = path.parent / stem
    manifest = json.loads(base.with_suffix(f".{kind}.json").read_text())
    blob = base.with_suffix(f".{kind}.bin").read_bytes()
    arrays = {}
    offset = 0
    for entry in manifest["entries"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        arrays[entry["name"]] = (
            np.frombuffer(blob, dtype="<f8", count=n, offset=offset).reshape(shape).copy()
        )
        offset += n * 8
    if offset != len(blob):
        raise CheckpointError("blob length does not match manifest entries")
    return arrays, manifest["meta"]


def _git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
        )
        return out.stdout.strip() or "nogit"
    except Exception:
        return "nogit"


def write_run_manifest(out_dir, config_dict, seeds=None):
    """Record the fully-resolved run configuration next to its outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": config_dict,
        "seeds": dict(seeds or {}),
        "git": _git_describe(),
        "grf_kernel": "squared-exponential",
    }
    path = out_dir / "run_manifest.json"
    path.write_text(_dump_json(manifest))
    return path
