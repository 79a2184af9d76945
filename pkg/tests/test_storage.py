"""Container round-trip and validation tests."""
from __future__ import annotations

import numpy as np
import pytest

from bearnet.storage import (
    MAGIC,
    StorageError,
    read_container,
    validate_container,
    write_container,
)


def test_round_trip_is_bit_identical(tmp_path):
    rng = np.random.default_rng(5)
    arrays = {
        "a": rng.normal(size=(4, 3)),
        "b": rng.normal(size=7),
        "scalar": np.array(2.5),
    }
    header = {"kind": "dataset", "meta": {"dt": 6.667e-5, "label": "x"}}
    path = tmp_path / "c.bin"
    write_container(path, header, arrays)
    got_header, got = read_container(path)
    assert got_header["kind"] == "dataset"
    assert got_header["meta"] == {"dt": 6.667e-5, "label": "x"}
    assert got_header["schema_version"] == 1
    for name, arr in arrays.items():
        assert got[name].shape == np.asarray(arr).shape
        assert got[name].tobytes() == np.asarray(arr, dtype="<f8").tobytes()
    validate_container(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"XXXXX" + b"\x00" * 16)
    with pytest.raises(StorageError, match="magic"):
        read_container(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "t.bin"
    write_container(path, {"kind": "dataset"}, {"a": np.ones((10, 10))})
    raw = path.read_bytes()
    path.write_bytes(raw[:-16])
    with pytest.raises(StorageError, match="truncated"):
        read_container(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "t.bin"
    write_container(path, {"kind": "dataset"}, {"a": np.ones(3)})
    with open(path, "ab") as fh:
        fh.write(b"extra")
    with pytest.raises(StorageError, match="trailing"):
        read_container(path)


def test_validate_rejects_unknown_kind_and_version(tmp_path):
    path = tmp_path / "k.bin"
    write_container(path, {"kind": "mystery"}, {})
    with pytest.raises(StorageError, match="kind"):
        validate_container(path)
    path2 = tmp_path / "v.bin"
    write_container(path2, {"kind": "dataset", "schema_version": 99}, {})
    with pytest.raises(StorageError, match="schema_version"):
        validate_container(path2)


def test_validate_rejects_non_finite_arrays(tmp_path):
    path = tmp_path / "nf.bin"
    write_container(path, {"kind": "dataset"}, {"a": np.array([1.0, np.nan])})
    with pytest.raises(StorageError, match="non-finite"):
        validate_container(path)


def test_corrupt_header_json(tmp_path):
    path = tmp_path / "j.bin"
    body = b'{"broken": '
    path.write_bytes(MAGIC + len(body).to_bytes(8, "little") + body)
    with pytest.raises(StorageError, match="JSON"):
        read_container(path)
