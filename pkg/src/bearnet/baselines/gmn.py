"""Gram-matrix equivariant graph network (comparison model).

Same scaffolding as the E(2)-equivariant model — invariant node scalars,
per-layer edge geometry, gated-velocity updates, unit position integration —
but each edge stacks its displacement AND velocity difference into a 2-column
basis Z_ij = [x_ij, v_ij]. Invariant inputs are the four entries of the Gram
matrix Z^T Z (min-max scaled); vector messages and decoded forces are linear
combinations of the two basis columns, so outputs can leave the x_ij line
while remaining exactly equivariant.

Inputs, targets, and de-normalizers are shared with the E(2) model: node
positions and velocities one chunk ahead for all mobile nodes, plus per-kind
normalized edge forces.
"""
from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..mlp import MlpSpec, mlp_forward
from . import common
from .egnn import (  # shared input/target pipeline, loss, and de-normalizers
    collate,
    extract,
    loss,
    physical_forces,
    physical_state,
    runtime_sample,
)

__all__ = [
    "KIND",
    "collate",
    "extract",
    "forward",
    "gram_entries",
    "loss",
    "mlp_specs",
    "physical_forces",
    "physical_state",
    "runtime_sample",
]

KIND = "gmn"

_SEL_X = np.array([[1.0], [0.0]])
_SEL_V = np.array([[0.0], [1.0]])


def mlp_specs(config: common.BaselineConfig) -> dict[str, MlpSpec]:
    w = config.width
    hidden = (w, w)
    act = config.activation
    specs = {
        "node_enc": MlpSpec(6, hidden, w, act),
        "theta_e": MlpSpec(w, hidden, 2, act, final_layer_zero_init=True),
    }
    for layer in range(config.m_passes):
        specs[f"phi_s{layer}"] = MlpSpec(7 + 2 * w, hidden, w, act)
        specs[f"phi_v{layer}"] = MlpSpec(w, hidden, 2, act, final_layer_zero_init=True)
        specs[f"phi_vel{layer}"] = MlpSpec(
            w, hidden, 1, act, final_layer_zero_init=True
        )
        specs[f"phi_h{layer}"] = MlpSpec(2 * w, hidden, w, act)
    return specs


def gram_entries(x_ij, v_ij, tape):
    """(n, 4) rows of the edge Gram matrix [x.x, x.v, v.x, v.v].

    The cross terms are the same dot product; both columns are kept so the
    feature block is the flattened 2x2 matrix. Rotating both basis vectors by
    a right-angle rotation permutes and sign-flips identical products, so the
    entries are bit-identical under such rotations.
    """
    xx = T.rowdot(x_ij, x_ij, tape)
    xv = T.rowdot(x_ij, v_ij, tape)
    vv = T.rowdot(v_ij, v_ij, tape)
    return T.concat_cols([xx, xv, xv, vv], tape)


def _gram_features(x_ij, v_ij, stats, tape):
    raw = gram_entries(x_ij, v_ij, tape)
    lo = np.empty(4)
    hi = np.empty(4)
    for col, name in enumerate(
        ("bl.gram.xx", "bl.gram.xv", "bl.gram.xv", "bl.gram.vv")
    ):
        lo[col], hi[col] = stats.scalar_ranges[name]
    span = hi - lo
    return T.add_bias(T.matmul(raw, np.diag(1.0 / span), tape), -lo / span, tape)


def _edge_vectors(x, v, senders, receivers, tape):
    x_ij = T.sub(
        T.gather_rows(x, receivers, tape), T.gather_rows(x, senders, tape), tape
    )
    v_ij = T.sub(
        T.gather_rows(v, receivers, tape), T.gather_rows(v, senders, tape), tape
    )
    return x_ij, v_ij


def _basis_combination(coefs, x_ij, v_ij, tape):
    """coefs (n,2) applied to the edge basis: c_x * x_ij + c_v * v_ij."""
    c_x = T.matmul(coefs, _SEL_X, tape)
    c_v = T.matmul(coefs, _SEL_V, tape)
    return T.add(
        T.col_scale(c_x, x_ij, tape), T.col_scale(c_v, v_ij, tape), tape
    )


def forward(inputs, params, config: common.BaselineConfig, stats, tape):
    senders, receivers = inputs["senders"], inputs["receivers"]
    n_nodes = inputs["n_nodes"]
    v0 = inputs["v0"]
    h = mlp_forward(params["node_enc"], inputs["h_feats"], tape)
    x = inputs["x0"]
    v = v0
    m = None
    for layer in range(config.m_passes):
        x_ij, v_ij = _edge_vectors(x, v, senders, receivers, tape)
        scalars = T.concat_cols(
            [
                _gram_features(x_ij, v_ij, stats, tape),
                inputs["edge_onehot"],
                T.gather_rows(h, receivers, tape),
                T.gather_rows(h, senders, tape),
            ],
            tape,
        )
        m = mlp_forward(params[f"phi_s{layer}"], scalars, tape)
        coefs = mlp_forward(params[f"phi_v{layer}"], m, tape)
        agg_vec = T.segment_sum(
            _basis_combination(coefs, x_ij, v_ij, tape), receivers, n_nodes, tape
        )
        gate = mlp_forward(params[f"phi_vel{layer}"], h, tape)
        v = T.add(T.col_scale(gate, v0, tape), agg_vec, tape)
        x = T.add(x, v, tape)
        agg_sc = T.segment_sum(m, receivers, n_nodes, tape)
        h = mlp_forward(params[f"phi_h{layer}"], T.concat_cols([h, agg_sc], tape), tape)
    x_ij_final, v_ij_final = _edge_vectors(x, v, senders, receivers, tape)
    f_coefs = mlp_forward(params["theta_e"], m, tape)
    forces = _basis_combination(f_coefs, x_ij_final, v_ij_final, tape)
    return {
        "x": x,
        "v": v,
        "forces": forces,
        "mobile_rows": inputs["mobile_rows"],
        "kind": inputs["kind"],
    }
