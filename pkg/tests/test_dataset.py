"""Dataset container round-trip tests."""
import numpy as np
import pytest

from bearnet import storage
from bearnet.dataset import load_records, save_records
from bearnet.sim import default_geometry, simulate


@pytest.fixture(scope="module")
def small_records():
    from conftest import make_quiet_condition

    g = default_geometry(n_rollers=5)
    c1 = make_quiet_condition(rpm=375.0, load=(0.0, 150.0), n_sub=8)
    c2 = make_quiet_condition(rpm=750.0, load=(50.0, 90.0), n_sub=8)
    return [simulate(g, c1, n_steps=7, warmup=2), simulate(g, c2, n_steps=4, warmup=0)]


def test_round_trip_bit_identical(tmp_path, small_records):
    path = tmp_path / "two.bearing"
    save_records(path, small_records)
    loaded = load_records(path)
    assert len(loaded) == 2
    for orig, back in zip(small_records, loaded):
        assert back.geometry == orig.geometry
        assert back.condition == orig.condition
        assert back.warmup == orig.warmup
        assert back.filter_cutoff == orig.filter_cutoff
        assert set(back.arrays) == set(orig.arrays)
        for name, arr in orig.arrays.items():
            assert back.arrays[name].tobytes() == arr.tobytes()
            assert back.arrays[name].shape == arr.shape


def test_round_trip_preserves_schedule(tmp_path, small_records):
    path = tmp_path / "one.bearing"
    save_records(path, small_records[:1])
    rec = load_records(path)[0]
    assert rec.condition.load.base_load == (0.0, 150.0)
    assert rec.condition.law.k_c == small_records[0].condition.law.k_c
    assert rec.condition.mounts.zeta == small_records[0].condition.mounts.zeta


def test_empty_record_round_trips(tmp_path):
    from conftest import make_quiet_condition

    g = default_geometry(n_rollers=4)
    rec = simulate(g, make_quiet_condition(load=(0.0, 5.0), n_sub=4), n_steps=0)
    path = tmp_path / "empty.bearing"
    save_records(path, [rec])
    back = load_records(path)[0]
    assert back.n_steps == 0
    assert back.arrays["x_re"].shape == (0, 4, 2)


def test_state_at_reconstructs(small_records):
    rec = small_records[0]
    s = rec.state_at(3)
    assert np.array_equal(s.x_re, rec.arrays["x_re"][3])
    assert s.t == rec.arrays["t"][3]


def test_wrong_kind_rejected(tmp_path):
    path = tmp_path / "notds.bin"
    storage.write_container(path, {"kind": "rollout"}, {"a": np.zeros(3)})
    with pytest.raises(storage.StorageError):
        load_records(path)
