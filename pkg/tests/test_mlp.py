"""MLP forward/backward against independently coded oracles."""
from __future__ import annotations

import numpy as np
import pytest

from bearnet import tensor as T
from bearnet.mlp import MlpParams, MlpSpec, init_mlp, mlp_forward


def _silu(x):
    return x / (1.0 + np.exp(-x))


def straight_line_forward(p: MlpParams, x: np.ndarray) -> np.ndarray:
    """Loop-free reimplementation for the 2-16-16-3 oracle case."""
    h1 = _silu(x @ p.weights[0] + p.biases[0])
    h2 = _silu(h1 @ p.weights[1] + p.biases[1])
    return h2 @ p.weights[2] + p.biases[2]


def test_random_mlp_matches_straight_line_oracle():
    rng = np.random.default_rng(7)
    spec = MlpSpec(2, (16, 16), 3, activation="silu")
    params = init_mlp(spec, rng, "net")
    x = rng.normal(size=(11, 2))
    expected = straight_line_forward(params, x)
    got_fast = mlp_forward(params, x)
    tape = T.Tape()
    got_taped = mlp_forward(params, x, tape).data
    assert np.abs(got_fast - expected).max() < 1e-12
    assert np.abs(got_taped - expected).max() < 1e-12


def test_zero_init_final_layer_outputs_zero():
    rng = np.random.default_rng(0)
    spec = MlpSpec(4, (8, 8), 2, final_layer_zero_init=True)
    params = init_mlp(spec, rng, "dec")
    x = rng.normal(size=(20, 4)) * 100.0
    assert np.array_equal(mlp_forward(params, x), np.zeros((20, 2)))


def test_identity_single_linear_layer():
    spec = MlpSpec(2, (), 2)
    params = MlpParams("id", spec, [np.eye(2)], [np.zeros(2)])
    params.validate()
    out = mlp_forward(params, np.array([[1.0, 2.0]]))
    assert np.array_equal(out, np.array([[1.0, 2.0]]))


@pytest.mark.parametrize("activation", ["silu", "tanh", "relu"])
def test_gradients_match_finite_differences(activation):
    rng = np.random.default_rng(3)
    spec = MlpSpec(3, (8, 8), 2, activation=activation)
    params = init_mlp(spec, rng, "net")
    x = rng.normal(size=(6, 3)) + 0.1
    cot = rng.normal(size=(6, 2))

    tape = T.Tape()
    out = mlp_forward(params, x, tape)
    T.sum_all(T.mul(out, cot, tape), tape)
    grads = T.backward(tape, np.ones((1, 1)))

    h = 1e-6
    for name, arr in params.flat():
        flat = arr.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float((mlp_forward(params, x) * cot).sum())
            flat[i] = orig - h
            fm = float((mlp_forward(params, x) * cot).sum())
            flat[i] = orig
            fd = (fp - fm) / (2 * h)
            ad = grads[name].ravel()[i]
            assert abs(ad - fd) / max(abs(fd), 1e-6) < 1e-5, (name, i)


def test_input_width_mismatch_errors():
    params = init_mlp(MlpSpec(3, (4,), 2), np.random.default_rng(0), "n")
    with pytest.raises(ValueError, match="input"):
        mlp_forward(params, np.ones((5, 4)))


def test_non_finite_input_errors():
    params = init_mlp(MlpSpec(2, (4,), 2), np.random.default_rng(0), "n")
    bad = np.array([[1.0, np.nan]])
    with pytest.raises(ValueError, match="finite"):
        mlp_forward(params, bad)


def test_init_is_deterministic_and_bounded():
    a = init_mlp(MlpSpec(5, (7,), 3), np.random.default_rng(42), "n")
    b = init_mlp(MlpSpec(5, (7,), 3), np.random.default_rng(42), "n")
    for (na, wa), (nb, wb) in zip(a.flat(), b.flat()):
        assert na == nb and np.array_equal(wa, wb)
    assert np.abs(a.weights[0]).max() <= np.sqrt(6.0 / 5)
    assert np.array_equal(a.biases[0], np.zeros(7))


def test_bad_spec_rejected():
    with pytest.raises(ValueError, match="width"):
        MlpSpec(0, (4,), 2)
    with pytest.raises(ValueError, match="activation"):
        MlpSpec(2, (4,), 2, activation="gelu")
