"""Serialization of simulated trajectory records.

A dataset file is a single binary container holding one or more trajectory
records; each record keeps its full provenance (geometry, operating
condition, contact law, mounts, warmup/filter settings) in the JSON header so
a loaded record reconstructs the exact dataclasses it was produced with.
"""
from __future__ import annotations

from dataclasses import asdict

import numpy as np

from . import storage
from .sim import (
    BearingGeometry,
    ContactLaw,
    GroundMount,
    LoadSchedule,
    OperatingCondition,
    TrajectoryRecord,
)

__all__ = [
    "condition_from_dict",
    "condition_to_dict",
    "load_records",
    "save_records",
]

_CHANNELS = (
    "t", "shaft_angle", "cage_angle",
    "x_ir", "v_ir", "x_or", "v_or", "x_re", "v_re",
    "f_on_ir_from_re", "f_on_or_from_re", "f_gnd_ir", "f_gnd_or",
    "acc_ir", "acc_or", "acc_re", "applied_load",
)


def condition_to_dict(condition: OperatingCondition) -> dict:
    return {
        "rpm": condition.rpm,
        "dt": condition.dt,
        "n_sub": condition.n_sub,
        "load": asdict(condition.load),
        "law": asdict(condition.law),
        "mounts": asdict(condition.mounts),
    }


def condition_from_dict(d: dict) -> OperatingCondition:
    sched = dict(d["load"])
    sched["base_load"] = tuple(sched["base_load"])
    return OperatingCondition(
        rpm=d["rpm"],
        dt=d["dt"],
        n_sub=d["n_sub"],
        load=LoadSchedule(**sched),
        law=ContactLaw(**d["law"]),
        mounts=GroundMount(**d["mounts"]),
    )


def _record_meta(record: TrajectoryRecord) -> dict:
    return {
        "geometry": asdict(record.geometry),
        "condition": condition_to_dict(record.condition),
        "warmup": record.warmup,
        "filter_cutoff": record.filter_cutoff,
        "n_steps": record.n_steps,
    }


def save_records(path, records: list[TrajectoryRecord]) -> None:
    """Write one or more trajectory records to a dataset container."""
    header = {
        "kind": "dataset",
        "records": [_record_meta(r) for r in records],
    }
    arrays = {}
    for i, record in enumerate(records):
        missing = [c for c in _CHANNELS if c not in record.arrays]
        if missing:
            raise storage.StorageError(f"record {i} missing channels {missing}")
        for name in _CHANNELS:
            arrays[f"r{i}.{name}"] = record.arrays[name]
    storage.write_container(path, header, arrays)


def load_records(path) -> list[TrajectoryRecord]:
    """Read all trajectory records from a dataset container."""
    header, arrays = storage.read_container(path)
    if header.get("kind") != "dataset":
        raise storage.StorageError(
            f"expected a dataset container, found kind={header.get('kind')!r}"
        )
    records = []
    for i, meta in enumerate(header["records"]):
        geometry = BearingGeometry(**meta["geometry"])
        condition = condition_from_dict(meta["condition"])
        chans = {}
        for name in _CHANNELS:
            key = f"r{i}.{name}"
            if key not in arrays:
                raise storage.StorageError(f"dataset missing array {key!r}")
            chans[name] = np.ascontiguousarray(arrays[key])
        n = meta["n_steps"]
        if chans["t"].shape[0] != n:
            raise storage.StorageError(
                f"record {i}: header says {n} steps, arrays hold {chans['t'].shape[0]}"
            )
        records.append(
            TrajectoryRecord(
                geometry=geometry,
                condition=condition,
                warmup=meta["warmup"],
                filter_cutoff=meta["filter_cutoff"],
                arrays=chans,
            )
        )
    return records
