"""E(2)-equivariant graph network (comparison model).

Node embeddings start from invariant scalars only (type one-hot, shaft
speed, applied-load magnitude on the outer-ring node); geometry enters
through per-layer edge vectors x_ij between current node positions. Each
layer builds an invariant message from the inter-node distance (min-max
scaled), edge-kind one-hot, and endpoint embeddings, then updates velocities
as a gated copy of the input velocity plus a sum of messages directed along
x_ij, and integrates positions by one unit step in normalized coordinates.
A force decoder scales the final edge vector by an invariant coefficient, so
predicted forces rotate with the system and never leave the x_ij line.

Supervision: node positions and velocities one chunk ahead (normalized by
the dataset amplitude maxima) for all mobile nodes, plus per-kind normalized
edge forces.
"""
from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..graph import NODE_GROUND, NormalizationStats
from ..mlp import MlpSpec, mlp_forward
from ..sim import TrajectoryRecord
from . import common

KIND = "egnn"


def mlp_specs(config: common.BaselineConfig) -> dict[str, MlpSpec]:
    w = config.width
    hidden = (w, w)
    act = config.activation
    specs = {
        "node_enc": MlpSpec(6, hidden, w, act),
        "theta_e": MlpSpec(w, hidden, 1, act, final_layer_zero_init=True),
    }
    for layer in range(config.m_passes):
        specs[f"phi_s{layer}"] = MlpSpec(4 + 2 * w, hidden, w, act)
        specs[f"phi_v{layer}"] = MlpSpec(w, hidden, 1, act, final_layer_zero_init=True)
        specs[f"phi_vel{layer}"] = MlpSpec(
            w, hidden, 1, act, final_layer_zero_init=True
        )
        specs[f"phi_h{layer}"] = MlpSpec(2 * w, hidden, w, act)
    return specs


def extract(record: TrajectoryRecord, i: int, config: common.BaselineConfig) -> dict:
    stride = config.m_passes
    target = record.state_at(i + stride)
    return {
        "state": record.state_at(i),
        "omega": record.condition.omega,
        "load": record.arrays["applied_load"][i],
        "x_target": np.concatenate(
            [target.x_re, target.x_ir[None], target.x_or[None]]
        ),
        "v_target": np.concatenate(
            [target.v_re, target.v_ir[None], target.v_or[None]]
        ),
        # Forces are decoded from the final-layer edge geometry, i.e. they
        # describe the *end* of the prediction window — supervise them there.
        "force_target": common.edge_force_targets(record, i + stride),
    }


def runtime_sample(state, omega, load) -> dict:
    """Input-only sample for rollout (no supervision targets)."""
    return {"state": state, "omega": omega, "load": load}


def invariant_node_features(samples, stats, node_type, n: int, z: int) -> np.ndarray:
    """(b*n, 6) rotation-invariant node scalars shared with the Gram model:
    type one-hot, normalized shaft speed, and the applied-load magnitude on
    the outer-ring node (its one-hot already marks where the load acts)."""
    b = len(samples)
    feats = [common.node_onehot(node_type)]
    omega_col = np.repeat(
        [s["omega"] / stats.vector_maxima["omega"] for s in samples], n
    )
    feats.append(omega_col[:, None])
    load_col = np.zeros((b * n, 1))
    f_scale = stats.vector_maxima["force.global"]
    for s_idx, s in enumerate(samples):
        load_col[z + 1 + s_idx * n, 0] = float(np.linalg.norm(s["load"])) / f_scale
    feats.append(load_col)
    return np.concatenate(feats, axis=1)


def collate(samples, stats: NormalizationStats, config, geometry):
    b = len(samples)
    z = geometry.n_rollers
    n = common.node_count(z)
    senders, receivers, kind, node_type = common.batched_topology(z, b)
    x_nodes, v_nodes = common.node_arrays([s["state"] for s in samples])
    x_max = stats.vector_maxima["node.x"]
    v_max = stats.vector_maxima["node.v"]

    inputs = {
        "x0": x_nodes / x_max,
        "v0": v_nodes / v_max,
        "h_feats": invariant_node_features(samples, stats, node_type, n, z),
        "edge_onehot": common.edge_onehot(kind),
        "senders": senders,
        "receivers": receivers,
        "kind": kind,
        "n_nodes": b * n,
        "mobile_rows": np.flatnonzero(node_type != NODE_GROUND),
    }
    if "x_target" not in samples[0]:
        return inputs, None
    targets = {
        "x": np.concatenate([s["x_target"] for s in samples]) / x_max,
        "v": np.concatenate([s["v_target"] for s in samples]) / v_max,
        "force": np.concatenate([s["force_target"] for s in samples]),
        "kind": kind,
    }
    return inputs, targets


def _dist_feature(x_ij, stats, tape):
    lo, hi = stats.scalar_ranges["bl.dist"]
    return T.affine(T.rownorm(x_ij, tape), 1.0 / (hi - lo), -lo / (hi - lo), tape)


def forward(inputs, params, config: common.BaselineConfig, stats, tape):
    senders, receivers = inputs["senders"], inputs["receivers"]
    n_nodes = inputs["n_nodes"]
    v0 = inputs["v0"]
    h = mlp_forward(params["node_enc"], inputs["h_feats"], tape)
    x = inputs["x0"]
    v = v0
    m = None
    for layer in range(config.m_passes):
        x_ij = T.sub(
            T.gather_rows(x, receivers, tape), T.gather_rows(x, senders, tape), tape
        )
        scalars = T.concat_cols(
            [
                _dist_feature(x_ij, stats, tape),
                inputs["edge_onehot"],
                T.gather_rows(h, receivers, tape),
                T.gather_rows(h, senders, tape),
            ],
            tape,
        )
        m = mlp_forward(params[f"phi_s{layer}"], scalars, tape)
        coef = mlp_forward(params[f"phi_v{layer}"], m, tape)
        agg_vec = T.segment_sum(T.col_scale(coef, x_ij, tape), receivers, n_nodes, tape)
        gate = mlp_forward(params[f"phi_vel{layer}"], h, tape)
        v = T.add(T.col_scale(gate, v0, tape), agg_vec, tape)
        x = T.add(x, v, tape)
        agg_sc = T.segment_sum(m, receivers, n_nodes, tape)
        h = mlp_forward(params[f"phi_h{layer}"], T.concat_cols([h, agg_sc], tape), tape)
    x_ij_final = T.sub(
        T.gather_rows(x, receivers, tape), T.gather_rows(x, senders, tape), tape
    )
    f_coef = mlp_forward(params["theta_e"], m, tape)
    forces = T.col_scale(f_coef, x_ij_final, tape)
    return {
        "x": x,
        "v": v,
        "forces": forces,
        "mobile_rows": inputs["mobile_rows"],
        "kind": inputs["kind"],
    }


def loss(outputs, targets, stats, lambda_a, lambda_f, force_norm, tape):
    """Normalized-space MSE on mobile-node positions and velocities, plus the
    per-kind normalized force error shared with the primary model."""
    rows = outputs["mobile_rows"]
    x_resid = T.sub(T.gather_rows(outputs["x"], rows, tape), targets["x"], tape)
    v_resid = T.sub(T.gather_rows(outputs["v"], rows, tape), targets["v"], tape)
    state_sse = T.add(
        T.sum_all(T.square(x_resid, tape), tape),
        T.sum_all(T.square(v_resid, tape), tape),
        tape,
    )
    state_term = T.scale(state_sse, 1.0 / (2 * targets["x"].size), tape)
    force_sse = common.force_residual_terms(
        outputs["forces"], targets["force"], targets["kind"], stats, force_norm, tape
    )
    force_term = T.scale(force_sse, 1.0 / targets["force"].size, tape)
    total = T.add(
        T.scale(state_term, lambda_a, tape), T.scale(force_term, lambda_f, tape), tape
    )
    parts = {
        "acc": common._as_float(state_term),
        "force": common._as_float(force_term),
    }
    return total, parts


def physical_forces(outputs, stats: NormalizationStats) -> np.ndarray:
    f = outputs["forces"]
    data = f.data if isinstance(f, T.Value) else np.asarray(f)
    return data * stats.vector_maxima["force.global"]


def physical_state(outputs, stats: NormalizationStats):
    """De-normalized predicted node positions and velocities."""
    x = outputs["x"]
    v = outputs["v"]
    x_data = x.data if isinstance(x, T.Value) else np.asarray(x)
    v_data = v.data if isinstance(v, T.Value) else np.asarray(v)
    return (
        x_data * stats.vector_maxima["node.x"],
        v_data * stats.vector_maxima["node.v"],
    )
