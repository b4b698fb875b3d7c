"""Bit-exact trajectory storage.

Layout of a run directory:

    <run>/manifest          JSON text: format version, config echo, creation
                            timestamp, and per-block byte counts + SHA-256
    <run>/snap_<k>.bin      snapshot k, little-endian float64, row-major
                            [particle][component]
    <run>/isnap_<k>.bin     independent-ensemble snapshots (when enabled)
    <run>/incr_<k>.bin      Wiener increments of step k (when retained)
    <run>/streams.bin       per-particle stream ids, little-endian int64

Reloading verifies every hash and yields a store whose arrays equal the saved
ones bit for bit; a second save of a loaded store reproduces the original
files byte for byte (the creation timestamp rides along in the manifest).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DomainError, StoreError, StoreIntegrityError, StoreVersionError
from .integrator import SimulationConfig, TrajectoryStore

FORMAT_VERSION = 1


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _block_bytes(arr: np.ndarray, dtype: str) -> bytes:
    return np.ascontiguousarray(arr).astype(dtype, copy=False).tobytes(order="C")


def save_store(store: TrajectoryStore, path) -> dict:
    """Write the store under ``path`` (created if needed); returns the manifest."""
    run = Path(path)
    for snap in store.snapshots:
        if snap.shape[0] < 1:
            raise DomainError("refusing to save a snapshot with zero particles")
    run.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        blocks = {}

        def put(name: str, arr: np.ndarray, dtype: str):
            data = _block_bytes(arr, dtype)
            target = run / name
            target.write_bytes(data)
            written.append(target)
            blocks[name] = {"sha256": _sha256(data), "bytes": len(data),
                            "dtype": dtype, "shape": list(arr.shape)}

        for k, snap in enumerate(store.snapshots):
            put(f"snap_{k}.bin", snap, "<f8")
        if store.indep_snapshots is not None:
            for k, snap in enumerate(store.indep_snapshots):
                put(f"isnap_{k}.bin", snap, "<f8")
        if store.increments is not None:
            for k in range(store.increments.shape[0]):
                put(f"incr_{k}.bin", store.increments[k], "<f8")
        put("streams.bin", store.stream_ids, "<i8")

        manifest = {
            "format_version": FORMAT_VERSION,
            "created_at": store.created_at,
            "config": store.config.to_dict(),
            "snapshot_steps": list(store.snapshot_steps),
            "snapshot_times": [float(t) for t in store.snapshot_times],
            "has_increments": store.increments is not None,
            "has_independent_ensemble": store.indep_snapshots is not None,
            "blocks": blocks,
        }
        manifest_path = run / "manifest"
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        written.append(manifest_path)
        return manifest
    except Exception as exc:
        for target in written:
            try:
                target.unlink()
            except OSError:
                pass
        if isinstance(exc, (StoreError, DomainError)):
            raise
        raise StoreError(f"failed to save store at {run}: {exc}") from exc


def _read_block(run: Path, name: str, meta: dict) -> np.ndarray:
    target = run / name
    if not target.exists():
        raise StoreIntegrityError(f"missing block {name} in {run}")
    data = target.read_bytes()
    if len(data) != meta["bytes"]:
        raise StoreIntegrityError(
            f"block {name} truncated: {len(data)} bytes, manifest says {meta['bytes']}"
        )
    if _sha256(data) != meta["sha256"]:
        raise StoreIntegrityError(f"block {name} failed its hash check")
    arr = np.frombuffer(data, dtype=meta["dtype"]).reshape(meta["shape"])
    return arr.astype(meta["dtype"].lstrip("<"), copy=True)


def load_store(path) -> TrajectoryStore:
    """Inverse of save_store; errors on version mismatch or corrupted blocks."""
    run = Path(path)
    manifest_path = run / "manifest"
    if not manifest_path.exists():
        raise StoreError(f"no manifest found at {run}")
    manifest = json.loads(manifest_path.read_text())
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise StoreVersionError(
            f"store format version {version} unsupported (this build reads {FORMAT_VERSION})"
        )
    blocks = manifest["blocks"]
    config = SimulationConfig.from_dict(manifest["config"])
    n_snaps = len(manifest["snapshot_steps"])
    snapshots = [_read_block(run, f"snap_{k}.bin", blocks[f"snap_{k}.bin"])
                 for k in range(n_snaps)]
    indep = None
    if manifest["has_independent_ensemble"]:
        indep = [_read_block(run, f"isnap_{k}.bin", blocks[f"isnap_{k}.bin"])
                 for k in range(n_snaps)]
    increments = None
    if manifest["has_increments"]:
        steps = config.steps
        increments = np.stack([_read_block(run, f"incr_{k}.bin", blocks[f"incr_{k}.bin"])
                               for k in range(steps)])
    stream_ids = _read_block(run, "streams.bin", blocks["streams.bin"])
    return TrajectoryStore(
        config=config,
        snapshot_steps=list(manifest["snapshot_steps"]),
        snapshot_times=list(manifest["snapshot_times"]),
        snapshots=snapshots,
        stream_ids=stream_ids,
        increments=increments,
        indep_snapshots=indep,
        created_at=manifest["created_at"],
    )
