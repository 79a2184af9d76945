"""Shared infrastructure for the comparison models.

All three comparison architectures consume the same bearing graph as the
primary model — same node set (rollers, rings, ground), same directed edge
list, same recorded trajectories — but differ in features, normalization,
message passing, and supervision. This module holds what they share: batched
node/edge array assembly, statistics fitting (velocity z-score moments for
the history-based model, amplitude maxima for the others), the per-kind force
loss, and a uniform Adam training loop with checkpointing and bit-identical
resume.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import tensor as T
from ..checkpoint import load_checkpoint, save_checkpoint
from ..graph import (
    DegenerateStatisticError,
    NormalizationStats,
    build_graph,
    edge_force_targets,
    fit_normalization,
    graph_topology,
)
from ..mlp import init_mlp
from ..optim import AdamState, adam_step, cosine_lr
from ..sim import BearingGeometry, SystemState, TrajectoryRecord
from ..training import sample_pool

__all__ = [
    "BaselineConfig",
    "BaselineTrainConfig",
    "BaselineTrainResult",
    "batched_topology",
    "edge_onehot",
    "fit_baseline_stats",
    "force_residual_terms",
    "init_from_specs",
    "node_arrays",
    "node_onehot",
    "node_velocities",
    "stacked_edge_features",
    "train_baseline",
]


@dataclass
class BaselineConfig:
    """Architecture knobs shared by the comparison models.

    ``history`` (past-velocity buffer depth) and ``noise_std`` (z-space input
    noise during training, off by default) only affect the history-based
    acceleration model; the equivariant models ignore them.
    """

    width: int = 128
    m_passes: int = 5
    dt_sub: float = 6.667e-5
    activation: str = "silu"
    history: int = 5
    noise_std: float = 0.0


def node_count(n_rollers: int) -> int:
    return n_rollers + 3


def node_arrays(states: list[SystemState]):
    """Stack states into (B*n, 2) node position/velocity arrays.

    Node order per sample: rollers 0..Z-1, inner ring, outer ring, ground
    (at the origin, at rest) — matching the graph topology's node ids.
    """
    xs, vs = [], []
    for s in states:
        zero = np.zeros((1, 2))
        xs.append(np.concatenate([s.x_re, s.x_ir[None], s.x_or[None], zero]))
        vs.append(np.concatenate([s.v_re, s.v_ir[None], s.v_or[None], zero]))
    return np.concatenate(xs), np.concatenate(vs)


def node_velocities(record: TrajectoryRecord, i: int) -> np.ndarray:
    """(n, 2) per-node velocities at step i (ground row zero)."""
    a = record.arrays
    return np.concatenate(
        [a["v_re"][i], a["v_ir"][i][None], a["v_or"][i][None], np.zeros((1, 2))]
    )


def batched_topology(n_rollers: int, b: int):
    """Edge topology replicated for a batch, with node ids offset per sample.

    Returns (senders, receivers, kind, node_type) where the first three have
    b*E entries (sample-major) and node_type has b*n entries.
    """
    senders, receivers, kind, node_type = graph_topology(n_rollers)
    n = node_count(n_rollers)
    off = np.repeat(np.arange(b) * n, senders.size)
    return (
        np.tile(senders, b) + off,
        np.tile(receivers, b) + off,
        np.tile(kind, b),
        np.tile(node_type, b),
    )


def node_onehot(node_type: np.ndarray) -> np.ndarray:
    out = np.zeros((node_type.size, 4))
    out[np.arange(node_type.size), node_type] = 1.0
    return out


def edge_onehot(kind: np.ndarray) -> np.ndarray:
    out = np.zeros((kind.size, 3))
    out[np.arange(kind.size), kind - 1] = 1.0
    return out


def stacked_edge_features(states: list[SystemState], geometry: BearingGeometry):
    """Graph-representation edge displacement/velocity rows for a batch,
    (B*E, 2) each, sample-major in canonical edge order."""
    dxs, dvs = [], []
    for s in states:
        g = build_graph(s, geometry, zero_roller_velocity=False)
        dxs.append(g.dx)
        dvs.append(g.dv)
    return np.concatenate(dxs), np.concatenate(dvs)


def apply_zscore(values: np.ndarray, moments) -> np.ndarray:
    mean, std = moments
    return (np.asarray(values) - np.asarray(mean)) / np.asarray(std)


def undo_zscore(values: np.ndarray, moments) -> np.ndarray:
    mean, std = moments
    return np.asarray(values) * np.asarray(std) + np.asarray(mean)


def _moments(name: str, rows: np.ndarray):
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    if not np.isfinite(std).all() or (std <= 1e-300).any():
        raise DegenerateStatisticError(f"channel {name!r} has degenerate spread {std}")
    return mean, std


def _node_tracks(rec: TrajectoryRecord) -> tuple[np.ndarray, np.ndarray]:
    """(n_steps, n_nodes, 2) position and velocity tracks, ground last."""
    a = rec.arrays
    zeros = np.zeros((rec.n_steps, 1, 2))
    x = np.concatenate(
        [a["x_re"], a["x_ir"][:, None], a["x_or"][:, None], zeros], axis=1
    )
    v = np.concatenate(
        [a["v_re"], a["v_ir"][:, None], a["v_or"][:, None], zeros], axis=1
    )
    return x, v


def fit_baseline_stats(
    records: list[TrajectoryRecord],
    m_passes: int,
    base: NormalizationStats | None = None,
) -> NormalizationStats:
    """Extend the primary model's statistics with what the comparison models
    need.

    Adds the shaft-speed amplitude; z-score moments (node velocities, edge
    displacements, finite-difference accelerations over the m_passes-step
    horizon, edge forces) for the history-based model; and min-max ranges for
    the plain inter-node distance and the displacement/velocity Gram entries
    (computed on amplitude-normalized coordinates) used as scalar edge
    features by the equivariant comparison models.
    """
    stats = base or fit_normalization(records)

    omega_max = max(abs(r.condition.omega) for r in records)
    if omega_max <= 0.0:
        raise DegenerateStatisticError("channel 'omega' has degenerate maximum 0.0")
    stats.vector_maxima["omega"] = omega_max

    x_max = stats.vector_maxima["node.x"]
    v_max = stats.vector_maxima["node.v"]

    vels, dxs, dists, accs, forces = [], [], [], [], []
    dist_plain, gram_xx, gram_xv, gram_vv = [], [], [], []
    for rec in records:
        t = rec.arrays["t"]
        if rec.n_steps <= m_passes:
            continue
        senders, receivers, _, _ = graph_topology(rec.geometry.n_rollers)
        horizon = m_passes * float(t[1] - t[0])
        x_nodes, v_nodes = _node_tracks(rec)
        vels.append(v_nodes.reshape(-1, 2))
        acc = (v_nodes[m_passes:] - v_nodes[:-m_passes]) / horizon
        accs.append(acc[:, :-1].reshape(-1, 2))  # ground row excluded

        xn = x_nodes / x_max
        vn = v_nodes / v_max
        dx_plain = xn[:, receivers] - xn[:, senders]
        dv_plain = vn[:, receivers] - vn[:, senders]
        dist_plain.append(np.linalg.norm(dx_plain, axis=-1).ravel())
        gram_xx.append((dx_plain * dx_plain).sum(axis=-1).ravel())
        gram_xv.append((dx_plain * dv_plain).sum(axis=-1).ravel())
        gram_vv.append((dv_plain * dv_plain).sum(axis=-1).ravel())

        for i in range(rec.n_steps):
            g = build_graph(rec.state_at(i), rec.geometry, zero_roller_velocity=False)
            dxs.append(g.dx)
            dists.append(np.linalg.norm(g.dx, axis=1, keepdims=True))
            forces.append(edge_force_targets(rec, i))
    if not accs:
        raise ValueError("records too short to fit finite-difference moments")
    stats.moments["gns.vel"] = _moments("gns.vel", np.concatenate(vels))
    stats.moments["gns.dx"] = _moments("gns.dx", np.concatenate(dxs))
    stats.moments["gns.dist"] = _moments("gns.dist", np.concatenate(dists))
    stats.moments["gns.acc"] = _moments("gns.acc", np.concatenate(accs))
    stats.moments["gns.force"] = _moments("gns.force", np.concatenate(forces))
    stats.set_range("bl.dist", np.concatenate(dist_plain))
    stats.set_range("bl.gram.xx", np.concatenate(gram_xx))
    stats.set_range("bl.gram.xv", np.concatenate(gram_xv))
    stats.set_range("bl.gram.vv", np.concatenate(gram_vv))
    return stats


def init_from_specs(specs: dict, rng: np.random.Generator) -> dict:
    return {name: init_mlp(spec, rng, name) for name, spec in specs.items()}


def force_residual_terms(
    pred_global: dict[str, object] | object,
    targets: np.ndarray,
    kind: np.ndarray,
    stats: NormalizationStats,
    force_norm: str,
    tape,
):
    """Sum of squared per-kind-normalized force residuals over all edges.

    ``pred_global`` is the (B*E, 2) prediction in global force-scale units
    (physical force / force.global); ``targets`` the matching physical rows.
    Every directed edge counts once — the comparison models predict reversed
    contact edges independently rather than by antisymmetry.
    """
    if force_norm not in ("per_kind", "global"):
        raise ValueError(f"unknown force_norm {force_norm!r}")
    f_scale = stats.vector_maxima["force.global"]
    total = None
    for k in (1, 2, 3):
        rows = np.flatnonzero(kind == k)
        if rows.size == 0:
            continue
        k_scale = (
            f_scale if force_norm == "global" else stats.vector_maxima[f"force.k{k}"]
        )
        pred_rows = T.gather_rows(pred_global, rows, tape)
        resid = T.sub(
            T.scale(pred_rows, f_scale / k_scale, tape),
            targets[rows] / k_scale,
            tape,
        )
        sse = T.sum_all(T.square(resid, tape), tape)
        total = sse if total is None else T.add(total, sse, tape)
    return total


@dataclass
class BaselineTrainConfig:
    """Training settings for a comparison model (mirrors the primary loop)."""

    model: BaselineConfig = field(default_factory=BaselineConfig)
    lambda_a: float = 1.0
    lambda_f: float = 1.0
    force_norm: str = "per_kind"
    lr: float = 1e-3
    cosine_decay: bool = False
    lr_floor: float = 0.0
    total_steps: int = 1000
    batch_size: int = 8
    seed: int = 0
    log_every: int = 50
    save_every: int | None = None
    checkpoint_path: str | None = None
    log_path: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineTrainConfig":
        d = dict(d)
        d["model"] = BaselineConfig(**d["model"])
        return cls(**d)


@dataclass
class BaselineTrainResult:
    params: dict
    stats: NormalizationStats
    adam: AdamState
    history: list[dict]
    config: BaselineTrainConfig


def _flat(params: dict) -> dict[str, np.ndarray]:
    flat = {}
    for p in params.values():
        flat.update(dict(p.flat()))
    return flat


def _as_float(x) -> float:
    return float((x.data if isinstance(x, T.Value) else np.asarray(x)).reshape(()))


def train_baseline(
    module,
    records: list[TrajectoryRecord],
    config: BaselineTrainConfig,
    val_records: list[TrajectoryRecord] | None = None,
    stats: NormalizationStats | None = None,
    resume_from: str | None = None,
) -> BaselineTrainResult:
    """Adam loop over uniformly drawn record chunks, for any comparison model.

    ``module`` supplies the architecture: mlp_specs(config), extract(record,
    i, config), collate(samples, stats, config, geometry) -> (inputs,
    targets), forward(inputs, params, config, stats, tape), and loss(outputs,
    targets, stats, lambda_a, lambda_f, force_norm, tape) -> (total, parts).
    Resume restores parameters, optimizer moments, and RNG state exactly.
    """
    kind = module.KIND
    geometry = records[0].geometry
    pool = sample_pool(records, config.model.m_passes)
    if not pool:
        raise ValueError("records too short to train on")

    rng = np.random.default_rng(config.seed)
    start_step = 0
    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
        if ckpt.model_kind != kind:
            raise ValueError(
                f"checkpoint holds a {ckpt.model_kind!r} model, expected {kind!r}"
            )
        if ckpt.config != asdict(config.model):
            raise ValueError(
                "checkpoint model configuration does not match the training config"
            )
        params = ckpt.params
        stats = ckpt.stats
        adam = ckpt.adam or AdamState(lr=config.lr)
        if ckpt.rng_state is not None:
            rng.bit_generator.state = ckpt.rng_state
        start_step = ckpt.step
    else:
        params = init_from_specs(module.mlp_specs(config.model), rng)
        stats = stats or fit_baseline_stats(records, config.model.m_passes)
        adam = AdamState(lr=config.lr)

    flat = _flat(params)
    val_batch = None
    if val_records:
        val_rng = np.random.default_rng(config.seed + 1)
        val_pool = sample_pool(val_records, config.model.m_passes)
        picks = val_rng.integers(0, len(val_pool), size=min(32, len(val_pool)))
        val_samples = [
            module.extract(val_records[val_pool[p][0]], val_pool[p][1], config.model)
            for p in picks
        ]
        val_batch = module.collate(val_samples, stats, config.model, geometry)

    noisy = getattr(module, "apply_training_noise", None)
    history: list[dict] = []
    for step_idx in range(start_step, config.total_steps):
        picks = rng.integers(0, len(pool), size=config.batch_size)
        samples = [
            module.extract(records[pool[p][0]], pool[p][1], config.model)
            for p in picks
        ]
        inputs, targets = module.collate(samples, stats, config.model, geometry)
        if noisy is not None and config.model.noise_std > 0.0:
            inputs = noisy(inputs, rng, config.model.noise_std)

        tape = T.Tape()
        outputs = module.forward(inputs, params, config.model, stats, tape)
        total, parts = module.loss(
            outputs, targets, stats,
            lambda_a=config.lambda_a, lambda_f=config.lambda_f,
            force_norm=config.force_norm, tape=tape,
        )
        grads = T.backward(tape, np.ones((1, 1)), output=total)
        lr = (
            cosine_lr(config.lr, step_idx, config.total_steps, config.lr_floor)
            if config.cosine_decay
            else config.lr
        )
        adam_step(adam, flat, grads, lr=lr)

        done = step_idx + 1
        if done % config.log_every == 0 or done == config.total_steps:
            row = {"step": done, "loss": _as_float(total), "lr": lr, **parts}
            if val_batch is not None:
                v_out = module.forward(
                    val_batch[0], params, config.model, stats, None
                )
                v_total, _ = module.loss(
                    v_out, val_batch[1], stats,
                    lambda_a=config.lambda_a, lambda_f=config.lambda_f,
                    force_norm=config.force_norm, tape=None,
                )
                row["val_loss"] = _as_float(v_total)
            history.append(row)

        if (
            config.checkpoint_path
            and config.save_every
            and done % config.save_every == 0
        ):
            _save(kind, config, params, stats, adam, rng, done)

    if config.checkpoint_path:
        _save(kind, config, params, stats, adam, rng, config.total_steps)
    if config.log_path and history:
        with open(config.log_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(history[-1].keys()))
            writer.writeheader()
            for row in history:
                writer.writerow(row)
    return BaselineTrainResult(
        params=params, stats=stats, adam=adam, history=history, config=config
    )


def _save(kind, config, params, stats, adam, rng, step: int) -> None:
    save_checkpoint(
        config.checkpoint_path,
        model_kind=kind,
        config=asdict(config.model),
        params=params,
        stats=stats,
        step=step,
        adam=adam,
        rng_state=rng.bit_generator.state,
        extra={"train_config": config.to_dict()},
    )
