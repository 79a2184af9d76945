"""Checkpoint container: exact round trips and corruption detection."""
import numpy as np
import pytest

from bearnet import storage
from bearnet.checkpoint import load_checkpoint, save_checkpoint
from bearnet.graph import NormalizationStats
from bearnet.model import ModelConfig, init_model
from bearnet.optim import AdamState, adam_step


def small_stats():
    stats = NormalizationStats()
    stats.set_range("dyn.k1.dx", np.array([0.005, 0.006]))
    stats.set_maximum("force.global", np.array([123.0]))
    stats.moments["node.v"] = (np.array([0.1, -0.2]), np.array([1.5, 2.5]))
    return stats


def small_params(seed=0, width=8):
    rng = np.random.default_rng(seed)
    return init_model(ModelConfig(width=width, m_passes=2), rng)


def test_round_trip_is_bit_identical(tmp_path):
    params = small_params()
    stats = small_stats()
    flat = {}
    for p in params.values():
        flat.update(dict(p.flat()))
    grads = {
        name: np.full_like(arr, 0.25 * (i + 1))
        for i, (name, arr) in enumerate(sorted(flat.items()))
    }
    adam = AdamState(lr=3e-4)
    adam_step(adam, flat, grads)
    rng = np.random.default_rng(42)
    rng.integers(0, 100, size=7)  # advance so the state is nontrivial

    path = tmp_path / "model.ckpt"
    save_checkpoint(
        path,
        model_kind="equi_euler",
        config={"width": 8, "m_passes": 2, "activation": "silu", "dt_sub": 6.667e-5},
        params=params,
        stats=stats,
        step=17,
        adam=adam,
        rng_state=rng.bit_generator.state,
        extra={"note": "round-trip"},
    )
    ckpt = load_checkpoint(path)

    assert ckpt.model_kind == "equi_euler"
    assert ckpt.config["width"] == 8
    assert ckpt.step == 17
    assert ckpt.extra == {"note": "round-trip"}
    assert set(ckpt.params) == set(params)
    for name, p in params.items():
        q = ckpt.params[name]
        assert q.spec == p.spec
        for (ln_a, a), (ln_b, b) in zip(p.flat(), q.flat()):
            assert ln_a == ln_b
            assert a.tobytes() == b.tobytes()
    assert ckpt.stats.scalar_ranges == stats.scalar_ranges
    assert ckpt.stats.vector_maxima == stats.vector_maxima
    np.testing.assert_array_equal(ckpt.stats.moments["node.v"][0], [0.1, -0.2])
    assert ckpt.adam.lr == adam.lr
    assert ckpt.adam.step == adam.step
    for key in adam.m:
        assert ckpt.adam.m[key].tobytes() == adam.m[key].tobytes()
        assert ckpt.adam.v[key].tobytes() == adam.v[key].tobytes()
    assert ckpt.rng_state == rng.bit_generator.state

    fresh = np.random.default_rng(0)
    fresh.bit_generator.state = ckpt.rng_state
    assert fresh.integers(0, 1000) == rng.integers(0, 1000)


def test_optimizer_state_is_optional(tmp_path):
    path = tmp_path / "bare.ckpt"
    save_checkpoint(
        path, model_kind="equi_euler", config={}, params=small_params(),
        stats=small_stats(),
    )
    ckpt = load_checkpoint(path)
    assert ckpt.adam is None
    assert ckpt.rng_state is None
    assert ckpt.step == 0


def test_wrong_container_kind_rejected(tmp_path):
    path = tmp_path / "other.bin"
    storage.write_container(path, {"kind": "dataset"}, {})
    with pytest.raises(storage.StorageError, match="checkpoint"):
        load_checkpoint(path)


def test_missing_parameter_array_rejected(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(
        path, model_kind="equi_euler", config={}, params=small_params(),
        stats=small_stats(),
    )
    header, arrays = storage.read_container(path)
    victim = next(k for k in arrays if k.startswith("param.") and k.endswith(".W1"))
    del arrays[victim]
    storage.write_container(path, header, arrays)
    with pytest.raises(storage.StorageError, match="missing"):
        load_checkpoint(path)
