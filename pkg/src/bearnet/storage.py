"""Self-describing binary container used by checkpoints and dataset files.

Layout: 5 magic bytes, an 8-byte little-endian header length, a UTF-8 JSON
header, then the named float64 arrays packed little-endian in manifest order.
The header always carries ``schema_version``, ``kind`` and an ``arrays``
manifest of ``{"name", "shape"}`` entries.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = b"BRNT\x01"
SCHEMA_VERSION = 1
KNOWN_KINDS = ("dataset", "checkpoint", "rollout")


class StorageError(Exception):
    """Raised for malformed or inconsistent container files."""


def write_container(
    path: str | Path, header: dict, arrays: dict[str, np.ndarray]
) -> None:
    """Write header + arrays; adds schema_version and the array manifest."""
    header = dict(header)
    header.setdefault("schema_version", SCHEMA_VERSION)
    manifest = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8")
        manifest.append({"name": name, "shape": list(arr.shape)})
        blobs.append(np.ascontiguousarray(arr).tobytes())
    header["arrays"] = manifest
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(head).to_bytes(8, "little"))
        fh.write(head)
        for blob in blobs:
            fh.write(blob)


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a container back; arrays come out float64 with manifest shapes."""
    with open(path, "rb") as fh:
        raw = fh.read()
    header, offset = _parse_header(raw, path)
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(raw):
            raise StorageError(f"{path}: array {entry['name']!r} truncated")
        arrays[entry["name"]] = (
            np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy()
        )
        offset = end
    if offset != len(raw):
        raise StorageError(f"{path}: {len(raw) - offset} trailing bytes")
    return header, arrays


def _parse_header(raw: bytes, path) -> tuple[dict, int]:
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise StorageError(f"{path}: not a bearnet container (bad magic)")
    head_len = int.from_bytes(raw[len(MAGIC) : len(MAGIC) + 8], "little")
    start = len(MAGIC) + 8
    if start + head_len > len(raw):
        raise StorageError(f"{path}: header truncated")
    try:
        header = json.loads(raw[start : start + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise StorageError(f"{path}: header is not valid JSON ({exc})") from exc
    if not isinstance(header, dict) or "arrays" not in header:
        raise StorageError(f"{path}: header lacks an array manifest")
    return header, start + head_len


def validate_container(path: str | Path) -> dict:
    """Full schema validation; returns the header on success.

    Checks magic, JSON header, schema version, kind, manifest/payload size
    agreement, and that every array is finite.
    """
    header, arrays = read_container(path)
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise StorageError(f"{path}: unsupported schema_version {version!r}")
    kind = header.get("kind")
    if kind not in KNOWN_KINDS:
        raise StorageError(f"{path}: unknown container kind {kind!r}")
    for name, arr in arrays.items():
        if not np.isfinite(arr).all():
            raise StorageError(f"{path}: array {name!r} has non-finite entries")
    return header
