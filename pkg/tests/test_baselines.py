"""Comparison models: invariances, wiring oracles, training, checkpoints."""
from dataclasses import replace

import numpy as np
import pytest

from bearnet.baselines import (
    BaselineConfig,
    BaselineTrainConfig,
    MODEL_KINDS,
    baseline_module,
    common,
    egnn,
    gmn,
    gns,
    train_baseline,
)
from bearnet.checkpoint import load_checkpoint
from bearnet.graph import DegenerateStatisticError
from bearnet.mlp import mlp_forward
from bearnet.sim import default_geometry, simulate
from conftest import make_quiet_condition

Z4 = 4
KINDS = sorted(MODEL_KINDS)


@pytest.fixture(scope="module")
def z4_record():
    g = default_geometry(n_rollers=Z4)
    cond = make_quiet_condition(rpm=750.0, load=(0.0, 5e3), n_sub=64, zeta=0.05)
    return simulate(g, cond, n_steps=14, warmup=150, phase=-np.pi / 2)


@pytest.fixture(scope="module")
def z4_geometry(z4_record):
    return z4_record.geometry


@pytest.fixture(scope="module")
def bl_stats(z4_record):
    return common.fit_baseline_stats([z4_record], m_passes=2)


@pytest.fixture
def bl_config():
    return BaselineConfig(width=8, m_passes=2, history=3)


def randomize_final(params, rng, scale=0.5):
    """Give the zero-initialized decoders random weights so outputs move."""
    for p in params.values():
        if p.spec.final_layer_zero_init:
            w = p.weights[-1]
            w[...] = rng.normal(0.0, scale / np.sqrt(w.shape[0]), size=w.shape)
            p.biases[-1][...] = rng.normal(0.0, scale / 10, size=p.biases[-1].shape)
    return params


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotate_state(state, rot: np.ndarray):
    return replace(
        state,
        x_re=state.x_re @ rot.T,
        v_re=state.v_re @ rot.T,
        x_ir=state.x_ir @ rot.T,
        v_ir=state.v_ir @ rot.T,
        x_or=state.x_or @ rot.T,
        v_or=state.v_or @ rot.T,
    )


def rotate_sample(sample: dict, rot: np.ndarray) -> dict:
    out = dict(sample)
    out["state"] = rotate_state(sample["state"], rot)
    out["load"] = np.asarray(sample["load"]) @ rot.T
    if "hist" in sample:
        out["hist"] = sample["hist"] @ rot.T
    for key in ("x_target", "v_target", "force_target"):
        if key in sample:
            out[key] = sample[key] @ rot.T
    return out


# ---------------------------------------------------------------------------
# Inert initialization


@pytest.mark.parametrize("kind", KINDS)
def test_zero_initialized_decoders_predict_nothing(
    kind, z4_record, bl_stats, bl_config, z4_geometry
):
    mod = baseline_module(kind)
    params = common.init_from_specs(mod.mlp_specs(bl_config), np.random.default_rng(0))
    samples = [mod.extract(z4_record, i, bl_config) for i in (3, 7)]
    inputs, _ = mod.collate(samples, bl_stats, bl_config, z4_geometry)
    out = mod.forward(inputs, params, bl_config, bl_stats, None)
    if kind == "gns":
        assert np.all(out["acc_z"] == 0.0)
        assert np.all(out["forces_z"] == 0.0)
    else:
        assert np.array_equal(np.asarray(out["x"]), inputs["x0"])
        assert np.all(np.asarray(out["v"]) == 0.0)
        assert np.all(np.asarray(out["forces"]) == 0.0)


# ---------------------------------------------------------------------------
# Permutation equivariance


@pytest.mark.parametrize("kind", KINDS)
def test_relabeling_rollers_relabels_predictions(
    kind, z4_record, bl_stats, bl_config, z4_geometry
):
    """Renumbering the rollers must renumber per-node and per-edge outputs."""
    mod = baseline_module(kind)
    params = randomize_final(
        common.init_from_specs(mod.mlp_specs(bl_config), np.random.default_rng(1)),
        np.random.default_rng(2),
    )
    perm = np.array([2, 0, 3, 1])
    sample = mod.extract(z4_record, 5, bl_config)
    permuted = dict(sample)
    permuted["state"] = replace(
        sample["state"],
        x_re=sample["state"].x_re[perm],
        v_re=sample["state"].v_re[perm],
    )
    node_perm = np.concatenate([perm, [Z4, Z4 + 1, Z4 + 2]])
    if "hist" in sample:
        permuted["hist"] = sample["hist"][node_perm]

    base = _forward_single(mod, sample, params, bl_stats, bl_config, z4_geometry)
    swapped = _forward_single(
        mod, permuted, params, bl_stats, bl_config, z4_geometry
    )

    # edge row j in each directed block of the permuted graph corresponds to
    # edge row perm[j] of the original; mount edges are unaffected.
    edge_perm = np.concatenate(
        [perm, perm + Z4, perm + 2 * Z4, perm + 3 * Z4, [4 * Z4, 4 * Z4 + 1]]
    )
    if kind == "gns":
        pairs = [(base["acc_z"], swapped["acc_z"], node_perm),
                 (base["forces_z"], swapped["forces_z"], edge_perm)]
    else:
        pairs = [(base["x"], swapped["x"], node_perm),
                 (base["v"], swapped["v"], node_perm),
                 (base["forces"], swapped["forces"], edge_perm)]
    for original, permuted_out, index in pairs:
        np.testing.assert_allclose(
            np.asarray(permuted_out),
            np.asarray(original)[index],
            rtol=1e-9,
            atol=1e-12,
        )


def _forward_single(mod, sample, params, stats, config, geometry):
    inputs, _ = mod.collate([sample], stats, config, geometry)
    return mod.forward(inputs, params, config, stats, None)


# ---------------------------------------------------------------------------
# Rotation behavior


def test_raw_feature_model_is_rotation_sensitive(
    z4_record, bl_stats, bl_config, z4_geometry
):
    """The history-based model works on raw Cartesian features, so a rotated
    input must NOT produce a correspondingly rotated output: that raw-frame
    sensitivity is exactly what the equivariant models remove."""
    angle = 0.9
    rot = rotation(angle)
    sample = gns.extract(z4_record, 5, bl_config)
    witness = 0.0
    for seed in range(10):
        params = randomize_final(
            common.init_from_specs(gns.mlp_specs(bl_config), np.random.default_rng(seed)),
            np.random.default_rng(seed + 100),
        )
        ins, _ = gns.collate([sample], bl_stats, bl_config, z4_geometry)
        out = gns.forward(ins, params, bl_config, bl_stats, None)
        ins_rot, _ = gns.collate(
            [rotate_sample(sample, rot)], bl_stats, bl_config, z4_geometry
        )
        out_rot = gns.forward(ins_rot, params, bl_config, bl_stats, None)
        f = gns.physical_forces(out, bl_stats)
        f_rot = gns.physical_forces(out_rot, bl_stats)
        deviation = np.abs(f_rot - f @ rot.T).max() / max(np.abs(f).max(), 1e-30)
        witness = max(witness, deviation)
        if witness > 1e-3:
            break
    assert witness > 1e-3


@pytest.mark.parametrize("kind", ["egnn", "gmn"])
def test_equivariant_models_commute_with_rotation(
    kind, z4_record, bl_stats, bl_config, z4_geometry
):
    mod = baseline_module(kind)
    params = randomize_final(
        common.init_from_specs(mod.mlp_specs(bl_config), np.random.default_rng(3)),
        np.random.default_rng(4),
    )
    rot = rotation(0.7603)
    sample = mod.extract(z4_record, 6, bl_config)
    ins, _ = mod.collate([sample], bl_stats, bl_config, z4_geometry)
    out = mod.forward(ins, params, bl_config, bl_stats, None)
    ins_rot, _ = mod.collate(
        [rotate_sample(sample, rot)], bl_stats, bl_config, z4_geometry
    )
    out_rot = mod.forward(ins_rot, params, bl_config, bl_stats, None)
    for key in ("x", "v", "forces"):
        expected = np.asarray(out[key].data if hasattr(out[key], "data") else out[key])
        got = np.asarray(
            out_rot[key].data if hasattr(out_rot[key], "data") else out_rot[key]
        )
        scale = max(np.abs(expected).max(), 1.0)
        assert np.abs(got - expected @ rot.T).max() / scale <= 1e-9


def test_gram_entries_bitwise_invariant_under_axis_rotation():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(40, 2))
    v = rng.normal(size=(40, 2))
    quarter_turn = np.array([[0.0, 1.0], [-1.0, 0.0]])
    base = gmn.gram_entries(x, v, None)
    turned = gmn.gram_entries(x @ quarter_turn.T, v @ quarter_turn.T, None)
    assert np.asarray(base).tobytes() == np.asarray(turned).tobytes()


def test_gram_collapses_without_relative_motion():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(9, 2))
    entries = np.asarray(gmn.gram_entries(x, np.zeros_like(x), None))
    np.testing.assert_array_equal(entries[:, 1:], 0.0)
    np.testing.assert_allclose(entries[:, 0], (x * x).sum(axis=1), rtol=1e-15)


# ---------------------------------------------------------------------------
# Single-edge wiring oracle


def test_single_edge_layer_matches_hand_chain(bl_stats):
    """One directed edge, one layer: the forward pass must equal the update
    equations composed by hand (message from scaled distance and embeddings,
    gated velocity plus directed message, unit position step, force along
    the updated edge vector)."""
    config = BaselineConfig(width=3, m_passes=1)
    rng = np.random.default_rng(7)
    params = randomize_final(
        common.init_from_specs(egnn.mlp_specs(config), rng), rng, scale=0.8
    )
    x0 = np.array([[0.11, -0.04], [0.52, 0.31]])
    v0 = np.array([[0.02, 0.03], [-0.01, 0.05]])
    h_feats = rng.normal(size=(2, 6))
    inputs = {
        "x0": x0,
        "v0": v0,
        "h_feats": h_feats,
        "edge_onehot": np.array([[1.0, 0.0, 0.0]]),
        "senders": np.array([0]),
        "receivers": np.array([1]),
        "kind": np.array([1]),
        "n_nodes": 2,
        "mobile_rows": np.array([0, 1]),
    }
    out = egnn.forward(inputs, params, config, bl_stats, None)

    h = mlp_forward(params["node_enc"], h_feats, None)
    x_ij = (x0[1] - x0[0])[None]
    lo, hi = bl_stats.scalar_ranges["bl.dist"]
    dist_feat = (np.linalg.norm(x_ij) - lo) / (hi - lo)
    scalars = np.concatenate(
        [[[dist_feat]], inputs["edge_onehot"], h[1][None], h[0][None]], axis=1
    )
    m = mlp_forward(params["phi_s0"], scalars, None)
    coef = mlp_forward(params["phi_v0"], m, None)
    gate = mlp_forward(params["phi_vel0"], h, None)
    v1 = gate * v0
    v1[1] += (coef * x_ij)[0]
    x1 = x0 + v1
    x_ij_new = (x1[1] - x1[0])[None]
    force = mlp_forward(params["theta_e"], m, None) * x_ij_new

    np.testing.assert_allclose(np.asarray(out["v"]), v1, rtol=1e-14)
    np.testing.assert_allclose(np.asarray(out["x"]), x1, rtol=1e-14)
    np.testing.assert_allclose(np.asarray(out["forces"]), force, rtol=1e-14)


# ---------------------------------------------------------------------------
# History handling and feature plumbing


def test_history_is_zero_padded_at_trajectory_start(z4_record, bl_config):
    hist = gns.velocity_history(z4_record, 0, bl_config)
    assert hist.shape == (Z4 + 3, bl_config.history, 2)
    np.testing.assert_array_equal(hist[:, 1:], 0.0)
    np.testing.assert_array_equal(hist[:, 0], common.node_velocities(z4_record, 0))

    hist8 = gns.velocity_history(z4_record, 8, bl_config)
    for j in range(bl_config.history):
        np.testing.assert_array_equal(
            hist8[:, j],
            common.node_velocities(z4_record, 8 - j * bl_config.m_passes),
        )


def test_training_noise_flag_defaults_off_and_touches_only_history(
    z4_record, bl_stats, bl_config, z4_geometry
):
    assert BaselineConfig().noise_std == 0.0
    sample = gns.extract(z4_record, 4, bl_config)
    inputs, _ = gns.collate([sample], bl_stats, bl_config, z4_geometry)
    noisy = gns.apply_training_noise(inputs, np.random.default_rng(8), 0.1)
    hist_cols = 2 * bl_config.history
    before = inputs["node_feats"]
    after = noisy["node_feats"]
    assert not np.array_equal(after[:, :hist_cols], before[:, :hist_cols])
    assert np.array_equal(after[:, hist_cols:], before[:, hist_cols:])
    assert before is not after


def test_load_magnitude_sits_on_the_outer_ring_row(
    z4_record, bl_stats, bl_config, z4_geometry
):
    sample = egnn.extract(z4_record, 2, bl_config)
    ins, _ = egnn.collate([sample, sample], bl_stats, bl_config, z4_geometry)
    load_col = ins["h_feats"][:, -1]
    n = Z4 + 3
    expected_rows = {Z4 + 1, Z4 + 1 + n}
    assert set(np.flatnonzero(load_col)) == expected_rows
    mag = np.linalg.norm(sample["load"]) / bl_stats.vector_maxima["force.global"]
    assert load_col[Z4 + 1] == pytest.approx(mag, rel=1e-15)


def test_fitting_requires_a_nonzero_shaft_speed(bl_stats):
    g = default_geometry(n_rollers=Z4)
    cond = make_quiet_condition(rpm=0.0, load=(0.0, 5e3), n_sub=32, zeta=0.2)
    rec = simulate(g, cond, n_steps=4, warmup=200, phase=-np.pi / 2)
    with pytest.raises(DegenerateStatisticError, match="omega"):
        common.fit_baseline_stats([rec], m_passes=2, base=bl_stats)


# ---------------------------------------------------------------------------
# Gradients


def test_gradients_match_finite_differences_gmn(
    z4_record, bl_stats, z4_geometry
):
    """Richardson-extrapolated central differences on every parameter tensor
    of the Gram model (the widest op vocabulary of the three)."""
    from bearnet import tensor as T

    config = BaselineConfig(width=4, m_passes=2)
    rng = np.random.default_rng(9)
    params = randomize_final(
        common.init_from_specs(gmn.mlp_specs(config), rng), rng, scale=0.05
    )
    samples = [gmn.extract(z4_record, i, config) for i in (2, 9)]
    inputs, targets = gmn.collate(samples, bl_stats, config, z4_geometry)

    def loss_value():
        out = gmn.forward(inputs, params, config, bl_stats, None)
        total, _ = gmn.loss(
            out, targets, bl_stats,
            lambda_a=1.0, lambda_f=1.0, force_norm="per_kind", tape=None,
        )
        return float(np.asarray(total).reshape(()))

    tape = T.Tape()
    out = gmn.forward(inputs, params, config, bl_stats, tape)
    total, _ = gmn.loss(
        out, targets, bl_stats,
        lambda_a=1.0, lambda_f=1.0, force_norm="per_kind", tape=tape,
    )
    grads = T.backward(tape, np.ones((1, 1)), output=total)

    flat = {}
    for p in params.values():
        flat.update(dict(p.flat()))
    assert set(grads) == set(flat)

    def central(arr, direction, h):
        arr += h * direction
        up = loss_value()
        arr -= 2 * h * direction
        down = loss_value()
        arr += h * direction
        return (up - down) / (2 * h)

    dir_rng = np.random.default_rng(10)
    checked = 0
    for name, arr in sorted(flat.items()):
        direction = dir_rng.normal(size=arr.shape)
        direction /= max(np.linalg.norm(direction), 1e-30)
        h = 1e-5
        fd = (4.0 * central(arr, direction, h / 2) - central(arr, direction, h)) / 3.0
        an = float((grads[name] * direction).sum())
        assert abs(fd - an) <= 1e-4 * max(abs(fd), abs(an)) + 1e-9, (
            f"{name}: fd={fd:.3e} analytic={an:.3e}"
        )
        checked += 1
    assert checked == len(flat)


# ---------------------------------------------------------------------------
# Training loop and checkpoints


@pytest.mark.parametrize("kind", KINDS)
def test_training_descends_and_checkpoints(kind, z4_record, tmp_path):
    mod = baseline_module(kind)
    ckpt_path = tmp_path / f"{kind}.ckpt"
    config = BaselineTrainConfig(
        model=BaselineConfig(width=8, m_passes=2, history=3),
        total_steps=80,
        batch_size=4,
        log_every=10,
        lr=1e-3,
        seed=11,
        checkpoint_path=str(ckpt_path),
        log_path=str(tmp_path / f"{kind}.csv"),
    )
    result = train_baseline(mod, [z4_record], config, val_records=[z4_record])
    losses = [row["loss"] for row in result.history]
    assert all(np.isfinite(losses))
    vals = [row["val_loss"] for row in result.history]
    assert vals[-1] < vals[0]

    ckpt = load_checkpoint(str(ckpt_path))
    assert ckpt.model_kind == kind
    assert ckpt.step == config.total_steps
    assert set(ckpt.params) == set(result.params)
    assert ckpt.extra["train_config"]["model"]["width"] == 8


def test_resume_rejects_a_checkpoint_of_another_kind(z4_record, tmp_path):
    ckpt_path = tmp_path / "egnn.ckpt"
    config = BaselineTrainConfig(
        model=BaselineConfig(width=8, m_passes=2),
        total_steps=2,
        batch_size=2,
        checkpoint_path=str(ckpt_path),
    )
    train_baseline(egnn, [z4_record], config)
    with pytest.raises(ValueError, match="holds a"):
        train_baseline(gns, [z4_record], config, resume_from=str(ckpt_path))


def test_unknown_kind_is_rejected():
    with pytest.raises(ValueError, match="unknown model kind"):
        baseline_module("transformer")
