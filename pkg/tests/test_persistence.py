"""Store round-trips, corruption detection, version gating."""

import json
from pathlib import Path

import numpy as np
import pytest

from mvsde import (
    DomainError,
    SimulationConfig,
    StoreIntegrityError,
    StoreVersionError,
    load_store,
    save_store,
    simulate,
)


def _run(tmp_path, **kw):
    cfg = SimulationConfig(system="rough", N=32, T=0.5, steps=8, seed=77,
                           retain_increments=True, **kw)
    store = simulate(cfg)
    run_dir = tmp_path / "run"
    manifest = save_store(store, run_dir)
    return store, run_dir, manifest


def _dir_bytes(path: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_round_trip_bitwise(tmp_path):
    store, run_dir, _ = _run(tmp_path)
    loaded = load_store(run_dir)
    assert loaded.snapshot_steps == store.snapshot_steps
    for a, b in zip(store.snapshots, loaded.snapshots):
        assert np.array_equal(a, b) and a.dtype == b.dtype
    assert np.array_equal(store.increments, loaded.increments)
    assert np.array_equal(store.stream_ids, loaded.stream_ids)
    assert loaded.config == store.config
    assert loaded.created_at == store.created_at


def test_save_load_save_is_byte_identical(tmp_path):
    _, run_dir, _ = _run(tmp_path)
    first = _dir_bytes(run_dir)
    loaded = load_store(run_dir)
    second_dir = tmp_path / "run2"
    save_store(loaded, second_dir)
    second = _dir_bytes(second_dir)
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name


def test_independent_ensemble_round_trip(tmp_path):
    store, run_dir, _ = _run(tmp_path, independent_ensemble=True)
    loaded = load_store(run_dir)
    for a, b in zip(store.indep_snapshots, loaded.indep_snapshots):
        assert np.array_equal(a, b)


def test_corrupted_block_is_named(tmp_path):
    _, run_dir, _ = _run(tmp_path)
    victim = run_dir / "snap_2.bin"
    data = bytearray(victim.read_bytes())
    data[13] ^= 0xFF
    victim.write_bytes(bytes(data))
    with pytest.raises(StoreIntegrityError, match="snap_2.bin"):
        load_store(run_dir)


def test_truncated_block_detected(tmp_path):
    _, run_dir, _ = _run(tmp_path)
    victim = run_dir / "incr_3.bin"
    victim.write_bytes(victim.read_bytes()[:-8])
    with pytest.raises(StoreIntegrityError, match="incr_3.bin"):
        load_store(run_dir)


def test_version_mismatch_rejected(tmp_path):
    _, run_dir, _ = _run(tmp_path)
    manifest = json.loads((run_dir / "manifest").read_text())
    manifest["format_version"] = 2
    (run_dir / "manifest").write_text(json.dumps(manifest))
    with pytest.raises(StoreVersionError, match="version 2"):
        load_store(run_dir)


def test_empty_snapshot_rejected_at_save(tmp_path):
    store, _, _ = _run(tmp_path)
    store.snapshots[0] = np.zeros((0, 2))
    with pytest.raises(DomainError):
        save_store(store, tmp_path / "bad")


def test_missing_block_detected(tmp_path):
    _, run_dir, _ = _run(tmp_path)
    (run_dir / "snap_1.bin").unlink()
    with pytest.raises(StoreIntegrityError, match="snap_1.bin"):
        load_store(run_dir)
