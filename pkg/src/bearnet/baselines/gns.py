"""History-based graph network simulator (comparison model).

Each node carries a buffer of its past velocities (z-scored, zero-padded at
the start of a trajectory) plus a type one-hot, the shaft speed, and the
applied load on the outer-ring node. Edges carry the graph-representation
displacement (z-scored components and magnitude) plus a kind one-hot.
M unshared message-passing layers update edge then node embeddings; decoders
read per-node accelerations and per-edge forces, both in z-score space.
Working on raw Cartesian features makes this model rotation-sensitive by
construction, unlike the equivariant models it is compared against.

Rollout integrates the de-standardized accelerations semi-implicitly over
the chunk horizon: ``v += a * h`` then ``x += v_new * h``.
"""
from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..graph import NODE_GROUND, NormalizationStats
from ..mlp import MlpSpec, mlp_forward
from ..sim import TrajectoryRecord
from . import common

KIND = "gns"


def mlp_specs(config: common.BaselineConfig) -> dict[str, MlpSpec]:
    w = config.width
    hidden = (w, w)
    act = config.activation
    node_in = 2 * config.history + 4 + 1 + 2
    specs = {
        "node_enc": MlpSpec(node_in, hidden, w, act),
        "edge_enc": MlpSpec(6, hidden, w, act),
        "theta_n": MlpSpec(w, hidden, 2, act, final_layer_zero_init=True),
        "theta_e": MlpSpec(w, hidden, 2, act, final_layer_zero_init=True),
    }
    for layer in range(config.m_passes):
        specs[f"phi_m{layer}"] = MlpSpec(3 * w, hidden, w, act)
        specs[f"phi_h{layer}"] = MlpSpec(2 * w, hidden, w, act)
    return specs


def velocity_history(
    record: TrajectoryRecord, i: int, config: common.BaselineConfig
) -> np.ndarray:
    """(n_nodes, history, 2) past velocities v(i - j*m), zero-padded."""
    cols = []
    for j in range(config.history):
        step = i - j * config.m_passes
        if step >= 0:
            cols.append(common.node_velocities(record, step))
        else:
            cols.append(np.zeros_like(cols[0]))
    return np.stack(cols, axis=1)


def extract(record: TrajectoryRecord, i: int, config: common.BaselineConfig) -> dict:
    stride = config.m_passes
    t = record.arrays["t"]
    horizon = stride * float(t[1] - t[0])
    v0 = common.node_velocities(record, i)
    v1 = common.node_velocities(record, i + stride)
    return {
        "hist": velocity_history(record, i, config),
        "state": record.state_at(i),
        "omega": record.condition.omega,
        "load": record.arrays["applied_load"][i],
        "acc_target": (v1 - v0)[:-1] / horizon,
        "force_target": common.edge_force_targets(record, i),
    }


def runtime_sample(hist, state, omega, load) -> dict:
    """Input-only sample for rollout (no supervision targets)."""
    return {"hist": hist, "state": state, "omega": omega, "load": load}


def collate(samples, stats: NormalizationStats, config, geometry):
    b = len(samples)
    states = [s["state"] for s in samples]
    z = geometry.n_rollers
    n = common.node_count(z)
    senders, receivers, kind, node_type = common.batched_topology(z, b)

    hist = np.concatenate([s["hist"] for s in samples])  # (b*n, H, 2)
    hist_z = common.apply_zscore(hist, stats.moments["gns.vel"])
    feats = [hist_z.reshape(b * n, 2 * config.history)]
    feats.append(common.node_onehot(node_type))
    omega_col = np.repeat(
        [s["omega"] / stats.vector_maxima["omega"] for s in samples], n
    )
    feats.append(omega_col[:, None])
    load_cols = np.zeros((b * n, 2))
    f_scale = stats.vector_maxima["force.global"]
    for s_idx, s in enumerate(samples):
        load_cols[z + 1 + s_idx * n] = np.asarray(s["load"]) / f_scale
    feats.append(load_cols)
    node_feats = np.concatenate(feats, axis=1)

    dx, _ = common.stacked_edge_features(states, geometry)
    dist = np.linalg.norm(dx, axis=1, keepdims=True)
    edge_feats = np.concatenate(
        [
            common.apply_zscore(dx, stats.moments["gns.dx"]),
            common.apply_zscore(dist, stats.moments["gns.dist"]),
            common.edge_onehot(kind),
        ],
        axis=1,
    )

    inputs = {
        "node_feats": node_feats,
        "edge_feats": edge_feats,
        "senders": senders,
        "receivers": receivers,
        "n_nodes": b * n,
        "mobile_rows": np.flatnonzero(node_type != NODE_GROUND),
    }
    if "acc_target" not in samples[0]:
        return inputs, None
    acc = np.concatenate([s["acc_target"] for s in samples])
    targets = {
        "acc_z": common.apply_zscore(acc, stats.moments["gns.acc"]),
        "force_z": common.apply_zscore(
            np.concatenate([s["force_target"] for s in samples]),
            stats.moments["gns.force"],
        ),
    }
    return inputs, targets


def apply_training_noise(inputs, rng: np.random.Generator, std: float) -> dict:
    """Perturb the z-scored velocity-history columns (training-time only)."""
    node_feats = inputs["node_feats"].copy()
    hist_cols = node_feats.shape[1] - 7
    node_feats[:, :hist_cols] += rng.normal(0.0, std, (node_feats.shape[0], hist_cols))
    return {**inputs, "node_feats": node_feats}


def forward(inputs, params, config: common.BaselineConfig, stats, tape):
    h = mlp_forward(params["node_enc"], inputs["node_feats"], tape)
    eps = mlp_forward(params["edge_enc"], inputs["edge_feats"], tape)
    senders, receivers = inputs["senders"], inputs["receivers"]
    for layer in range(config.m_passes):
        h_send = T.gather_rows(h, senders, tape)
        h_recv = T.gather_rows(h, receivers, tape)
        eps = mlp_forward(
            params[f"phi_m{layer}"], T.concat_cols([eps, h_recv, h_send], tape), tape
        )
        agg = T.segment_sum(eps, receivers, inputs["n_nodes"], tape)
        h = mlp_forward(params[f"phi_h{layer}"], T.concat_cols([h, agg], tape), tape)
    return {
        "acc_z": mlp_forward(params["theta_n"], h, tape),
        "forces_z": mlp_forward(params["theta_e"], eps, tape),
        "mobile_rows": inputs["mobile_rows"],
    }


def loss(outputs, targets, stats, lambda_a, lambda_f, force_norm, tape):
    """Standardized-space MSE on mobile-node accelerations and edge forces.

    This model z-scores every feature and target, so the per-kind force
    normalization used elsewhere does not apply; ``force_norm`` is accepted
    for interface parity and ignored.
    """
    del force_norm
    acc_pred = T.gather_rows(outputs["acc_z"], outputs["mobile_rows"], tape)
    acc_resid = T.sub(acc_pred, targets["acc_z"], tape)
    acc_term = T.scale(
        T.sum_all(T.square(acc_resid, tape), tape),
        1.0 / targets["acc_z"].size,
        tape,
    )
    f_resid = T.sub(outputs["forces_z"], targets["force_z"], tape)
    force_term = T.scale(
        T.sum_all(T.square(f_resid, tape), tape),
        1.0 / targets["force_z"].size,
        tape,
    )
    total = T.add(
        T.scale(acc_term, lambda_a, tape), T.scale(force_term, lambda_f, tape), tape
    )
    parts = {"acc": common._as_float(acc_term), "force": common._as_float(force_term)}
    return total, parts


def physical_accelerations(outputs, stats: NormalizationStats) -> np.ndarray:
    acc_z = outputs["acc_z"]
    data = acc_z.data if isinstance(acc_z, T.Value) else np.asarray(acc_z)
    return common.undo_zscore(data, stats.moments["gns.acc"])


def physical_forces(outputs, stats: NormalizationStats) -> np.ndarray:
    f_z = outputs["forces_z"]
    data = f_z.data if isinstance(f_z, T.Value) else np.asarray(f_z)
    return common.undo_zscore(data, stats.moments["gns.force"])
