"""Bearing state -> interaction graph, plus dataset normalization statistics.

Nodes: rollers 0..Z-1, inner ring Z, outer ring Z+1, ground Z+2. Edges in a
fixed canonical order (roller->inner ring, roller->outer ring, their exact
reversals, then the two ground->ring mount edges) so force targets, batching,
and metrics all index edges identically. Contact edges at both raceways share
one edge kind so a single learned law serves both; mount edges get their own
kinds (their force scales differ by orders of magnitude).

Contact-edge displacement features use the effective contact radius along the
centre line; mount-edge displacements are the ring deflections from ground.
Reversed edges carry exactly negated features, which makes learned pairwise
forces antisymmetric by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sim import BearingGeometry, SystemState, TrajectoryRecord

__all__ = [
    "EDGE_CONTACT",
    "EDGE_GND_IR",
    "EDGE_GND_OR",
    "NODE_GROUND",
    "NODE_INNER",
    "NODE_OUTER",
    "NODE_ROLLER",
    "BearingGraph",
    "NormalizationStats",
    "apply_minmax",
    "build_graph",
    "edge_force_targets",
    "effective_radius",
    "fit_normalization",
    "graph_topology",
    "ring_acc_targets",
]

NODE_ROLLER = 0
NODE_INNER = 1
NODE_OUTER = 2
NODE_GROUND = 3

EDGE_CONTACT = 1
EDGE_GND_IR = 2
EDGE_GND_OR = 3


def graph_topology(n_rollers: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Canonical (senders, receivers, edge_kind, node_type) for Z rollers."""
    z = n_rollers
    ir, orr, gnd = z, z + 1, z + 2
    rollers = np.arange(z)
    senders = np.concatenate([
        rollers, rollers,
        np.full(z, ir), np.full(z, orr),
        [gnd, gnd],
    ])
    receivers = np.concatenate([
        np.full(z, ir), np.full(z, orr),
        rollers, rollers,
        [ir, orr],
    ])
    edge_kind = np.concatenate([
        np.full(4 * z, EDGE_CONTACT),
        [EDGE_GND_IR, EDGE_GND_OR],
    ])
    node_type = np.concatenate([
        np.full(z, NODE_ROLLER), [NODE_INNER, NODE_OUTER, NODE_GROUND],
    ])
    return senders, receivers, edge_kind, node_type


@dataclass
class BearingGraph:
    """One bearing state as a typed interaction graph with edge features."""

    n_rollers: int
    node_type: np.ndarray
    x: np.ndarray
    v: np.ndarray
    senders: np.ndarray
    receivers: np.ndarray
    edge_kind: np.ndarray
    dx: np.ndarray
    dv: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.n_rollers + 3

    @property
    def n_edges(self) -> int:
        return 4 * self.n_rollers + 2


def effective_radius(
    x_re: np.ndarray,
    x_ir: np.ndarray,
    x_or: np.ndarray,
    r_ir: float,
    r_or: float,
) -> np.ndarray:
    """Per-roller effective contact radius: the mean of the roller's radial
    extent implied by each raceway (they coincide for an undeformed roller)."""
    d_i = np.sqrt(((x_re - x_ir[None, :]) ** 2).sum(axis=1))
    d_o = np.sqrt(((x_re - x_or[None, :]) ** 2).sum(axis=1))
    r_from_inner = d_i - r_ir
    r_from_outer = r_or - d_o
    return 0.5 * (r_from_inner + r_from_outer)


def build_graph(
    state: SystemState,
    geometry: BearingGeometry,
    zero_roller_velocity: bool = True,
    ground_position: np.ndarray | None = None,
) -> BearingGraph:
    """Assemble the canonical graph for one state.

    zero_roller_velocity mimics deployment, where roller velocities are not
    observable: roller node velocities enter as zeros and the network
    reconstructs them internally. ground_position anchors the mount edges
    (defaults to the origin); shifting it along with every body leaves all
    edge features unchanged.
    """
    z = geometry.n_rollers
    senders, receivers, edge_kind, node_type = graph_topology(z)
    gnd = np.zeros(2) if ground_position is None else np.asarray(ground_position, float)

    x = np.concatenate([state.x_re, state.x_ir[None], state.x_or[None], gnd[None]])
    v_re = np.zeros_like(state.v_re) if zero_roller_velocity else state.v_re
    v = np.concatenate([v_re, state.v_ir[None], state.v_or[None], np.zeros((1, 2))])

    r_eff = effective_radius(state.x_re, state.x_ir, state.x_or, geometry.r_ir, geometry.r_or)

    # contact rows, roller -> ring receiver
    to_ir = state.x_ir[None, :] - state.x_re
    to_or = state.x_or[None, :] - state.x_re
    u_ir = to_ir / np.sqrt((to_ir**2).sum(axis=1))[:, None]
    u_or = to_or / np.sqrt((to_or**2).sum(axis=1))[:, None]
    dx_re_ir = r_eff[:, None] * u_ir
    dx_re_or = r_eff[:, None] * u_or
    dv_re_ir = state.v_ir[None, :] - v_re
    dv_re_or = state.v_or[None, :] - v_re

    dx = np.concatenate([
        dx_re_ir, dx_re_or,
        -dx_re_ir, -dx_re_or,
        (state.x_ir - gnd)[None], (state.x_or - gnd)[None],
    ])
    dv = np.concatenate([
        dv_re_ir, dv_re_or,
        -dv_re_ir, -dv_re_or,
        state.v_ir[None], state.v_or[None],
    ])
    return BearingGraph(
        n_rollers=z,
        node_type=node_type,
        x=x,
        v=v,
        senders=senders,
        receivers=receivers,
        edge_kind=edge_kind,
        dx=dx,
        dv=dv,
    )


def edge_force_targets(record: TrajectoryRecord, i: int) -> np.ndarray:
    """Ground-truth pairwise forces in canonical edge order at step i.

    Each edge's target is the force delivered to its receiver, so the
    reversed contact edges are exact negations of the forward ones.
    """
    a = record.arrays
    f_ir = a["f_on_ir_from_re"][i]
    f_or = a["f_on_or_from_re"][i]
    return np.concatenate([
        f_ir, f_or, -f_ir, -f_or,
        a["f_gnd_ir"][i][None], a["f_gnd_or"][i][None],
    ])


def ring_acc_targets(record: TrajectoryRecord, i: int) -> np.ndarray:
    """Ground-truth (inner, outer) ring accelerations at step i, shape (2,2)."""
    a = record.arrays
    return np.stack([a["acc_ir"][i], a["acc_or"][i]])


# ----------------------------------------------------------------- statistics


class DegenerateStatisticError(ValueError):
    """A normalization channel has zero spread and cannot be scaled."""


@dataclass
class NormalizationStats:
    """Dataset statistics for feature scaling and divergence detection.

    scalar_ranges: per-channel (min, max) for min-max scaled scalar features.
    vector_maxima: per-channel max L2 norm for amplitude scales.
    moments: per-channel (mean, std) used by z-scoring models.
    """

    scalar_ranges: dict[str, tuple[float, float]] = field(default_factory=dict)
    vector_maxima: dict[str, float] = field(default_factory=dict)
    moments: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def set_range(self, name: str, values: np.ndarray) -> None:
        lo = float(np.min(values))
        hi = float(np.max(values))
        if not np.isfinite([lo, hi]).all() or hi - lo <= 1e-300:
            raise DegenerateStatisticError(
                f"channel {name!r} has degenerate range [{lo}, {hi}]"
            )
        self.scalar_ranges[name] = (lo, hi)

    def set_maximum(self, name: str, values: np.ndarray) -> None:
        hi = float(np.max(values))
        if not np.isfinite(hi) or hi <= 0.0:
            raise DegenerateStatisticError(
                f"channel {name!r} has degenerate maximum {hi}"
            )
        self.vector_maxima[name] = hi

    def to_dict(self) -> dict:
        return {
            "scalar_ranges": {k: list(v) for k, v in self.scalar_ranges.items()},
            "vector_maxima": dict(self.vector_maxima),
            "moments": {
                k: [np.asarray(m).tolist(), np.asarray(s).tolist()]
                for k, (m, s) in self.moments.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        stats = cls()
        stats.scalar_ranges = {k: (v[0], v[1]) for k, v in d["scalar_ranges"].items()}
        stats.vector_maxima = dict(d["vector_maxima"])
        stats.moments = {
            k: (np.asarray(v[0]), np.asarray(v[1])) for k, v in d["moments"].items()
        }
        return stats


def apply_minmax(values, rng: tuple[float, float]):
    lo, hi = rng
    return (values - lo) / (hi - lo)


def _norms(a: np.ndarray) -> np.ndarray:
    return np.sqrt((a * a).sum(axis=-1))


def fit_normalization(records: list[TrajectoryRecord]) -> NormalizationStats:
    """Fit feature scales over a list of trajectory records.

    Contact-edge velocity ranges pool the deployment variant (roller
    velocities zeroed) with the true-velocity variant, since internal message
    passes see reconstructed roller velocities. Kinematic-edge channels pool
    inner- and outer-ring edges: the outer ring does not spin, so its
    rotation-coupling channel alone would be degenerate.
    """
    if not records:
        raise ValueError("need at least one record to fit normalization")
    acc = {
        name: []
        for name in (
            "dyn.k1.dx", "dyn.k1.dv", "dyn.k2.dx", "dyn.k2.dv",
            "dyn.k3.dx", "dyn.k3.dv",
            "kin.dx", "kin.vpar", "kin.vperp", "kin.womega",
            "node.x", "node.v",
            "force.global", "force.k1", "force.k2", "force.k3",
            "acc.ring",
        )
    }
    for rec in records:
        if rec.n_steps == 0:
            continue
        a = rec.arrays
        x_re, v_re = a["x_re"], a["v_re"]
        x_ir, v_ir = a["x_ir"], a["v_ir"]
        x_or, v_or = a["x_or"], a["v_or"]

        d_i = _norms(x_re - x_ir[:, None, :])
        d_o = _norms(x_re - x_or[:, None, :])
        r_eff = 0.5 * ((d_i - rec.geometry.r_ir) + (rec.geometry.r_or - d_o))
        acc["dyn.k1.dx"].append(r_eff.ravel())

        dv_ir_true = _norms(v_ir[:, None, :] - v_re)
        dv_or_true = _norms(v_or[:, None, :] - v_re)
        dv_ir_zero = np.repeat(_norms(v_ir)[:, None], x_re.shape[1], axis=1)
        dv_or_zero = np.repeat(_norms(v_or)[:, None], x_re.shape[1], axis=1)
        acc["dyn.k1.dv"].append(
            np.concatenate([m.ravel() for m in (dv_ir_true, dv_or_true, dv_ir_zero, dv_or_zero)])
        )

        acc["dyn.k2.dx"].append(_norms(x_ir))
        acc["dyn.k2.dv"].append(_norms(v_ir))
        acc["dyn.k3.dx"].append(_norms(x_or))
        acc["dyn.k3.dv"].append(_norms(v_or))

        omega = rec.condition.omega
        for x_ring, v_ring, w in ((x_ir, v_ir, omega), (x_or, v_or, 0.0)):
            delta = x_re - x_ring[:, None, :]
            dist = _norms(delta)
            u = delta / dist[..., None]
            vpar = (v_ring[:, None, :] * u).sum(axis=-1)
            vperp2 = np.maximum(_norms(v_ring)[:, None] ** 2 - vpar**2, 0.0)
            acc["kin.dx"].append(dist.ravel())
            acc["kin.vpar"].append(np.abs(vpar).ravel())
            acc["kin.vperp"].append(np.sqrt(vperp2).ravel())
            acc["kin.womega"].append(np.abs(w) * dist.ravel())

        acc["node.x"].append(
            np.concatenate([_norms(x_re).ravel(), _norms(x_ir), _norms(x_or)])
        )
        acc["node.v"].append(
            np.concatenate([_norms(v_re).ravel(), _norms(v_ir), _norms(v_or)])
        )

        f_k1 = np.concatenate(
            [_norms(a["f_on_ir_from_re"]).ravel(), _norms(a["f_on_or_from_re"]).ravel()]
        )
        f_k2 = _norms(a["f_gnd_ir"])
        f_k3 = _norms(a["f_gnd_or"])
        acc["force.k1"].append(f_k1)
        acc["force.k2"].append(f_k2)
        acc["force.k3"].append(f_k3)
        acc["force.global"].append(np.concatenate([f_k1, f_k2, f_k3]))
        acc["acc.ring"].append(
            np.concatenate([_norms(a["acc_ir"]), _norms(a["acc_or"])])
        )

    if not acc["node.x"]:
        raise ValueError("all records are empty; cannot fit normalization")

    stats = NormalizationStats()
    for name in (
        "dyn.k1.dx", "dyn.k1.dv", "dyn.k2.dx", "dyn.k2.dv",
        "dyn.k3.dx", "dyn.k3.dv",
        "kin.dx", "kin.vpar", "kin.vperp", "kin.womega",
    ):
        stats.set_range(name, np.concatenate(acc[name]))
    for name in (
        "node.x", "node.v",
        "force.global", "force.k1", "force.k2", "force.k3",
        "acc.ring",
    ):
        stats.set_maximum(name, np.concatenate(acc[name]))
    return stats
