"""Training: sample extraction, the dual-instant loss, and the Adam loop.

A training sample is a recorded state plus the ground truth it must explain:
pairwise forces and ring accelerations at the sample's start instant (the
model's first internal evaluation) and at the instant m_passes steps later
(its last evaluation, which is trained one sub-step ahead so that rollout
chunks overlap). Force residuals are normalized per edge kind by default —
mount forces exceed contact forces by orders of magnitude, and a global scale
would let the mount edges drown out the contact physics.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .graph import (
    NormalizationStats,
    edge_force_targets,
    fit_normalization,
    ring_acc_targets,
)
from .model import (
    BatchState,
    ModelConfig,
    ModelInputs,
    StepOutput,
    batch_states,
    forward_step,
    init_model,
)
from .optim import AdamState, adam_step, cosine_lr
from .sim import SystemState, TrajectoryRecord

__all__ = [
    "TrainConfig",
    "TrainResult",
    "TrainSample",
    "build_batch",
    "loss",
    "make_samples",
    "sample_pool",
    "train",
]


@dataclass
class TrainSample:
    """One supervised chunk: start state, inputs, and both-instant targets."""

    state: SystemState
    omega: float
    f_ext: np.ndarray
    forces_initial: np.ndarray  # (E, 2) canonical physical forces at t
    forces_final: np.ndarray    # (E, 2) at t + m_passes
    acc_initial: np.ndarray     # (2, 2) rows (inner, outer)
    acc_final: np.ndarray


def sample_pool(records: list[TrajectoryRecord], m_passes: int) -> list[tuple[int, int]]:
    """All (record index, start step) pairs with full supervision available."""
    pool = []
    for r, rec in enumerate(records):
        last_start = rec.n_steps - 1 - m_passes
        pool.extend((r, i) for i in range(last_start + 1))
    return pool


def extract_sample(record: TrajectoryRecord, i: int, m_passes: int) -> TrainSample:
    return TrainSample(
        state=record.state_at(i),
        omega=record.condition.omega,
        f_ext=record.arrays["applied_load"][i].copy(),
        forces_initial=edge_force_targets(record, i),
        forces_final=edge_force_targets(record, i + m_passes),
        acc_initial=ring_acc_targets(record, i),
        acc_final=ring_acc_targets(record, i + m_passes),
    )


def make_samples(
    records: list[TrajectoryRecord],
    m_passes: int,
    n_samples: int,
    rng: np.random.Generator,
) -> list[TrainSample]:
    """Draw start states uniformly over every record and admissible step."""
    pool = sample_pool(records, m_passes)
    if not pool:
        raise ValueError(
            f"no trainable samples: records too short for m_passes={m_passes}"
        )
    picks = rng.integers(0, len(pool), size=n_samples)
    return [extract_sample(records[pool[p][0]], pool[p][1], m_passes) for p in picks]


def build_batch(samples: list[TrainSample]):
    """Stack samples into a model batch plus target blocks matching the
    model's output layout (contact rows: all inner-ring rows then all
    outer-ring rows)."""
    state = batch_states([s.state for s in samples])
    z = state.n_rollers
    inputs = ModelInputs(
        omega=np.array([s.omega for s in samples]),
        f_ext=np.stack([s.f_ext for s in samples]),
    )
    targets = {}
    for inst, f_attr, a_attr in (
        ("initial", "forces_initial", "acc_initial"),
        ("final", "forces_final", "acc_final"),
    ):
        forces = [getattr(s, f_attr) for s in samples]
        accs = [getattr(s, a_attr) for s in samples]
        targets[inst] = {
            "f_k1": np.concatenate(
                [np.concatenate([f[:z] for f in forces]),
                 np.concatenate([f[z:2 * z] for f in forces])]
            ),
            "f_k2": np.stack([f[4 * z] for f in forces]),
            "f_k3": np.stack([f[4 * z + 1] for f in forces]),
            "acc_ir": np.stack([a[0] for a in accs]),
            "acc_or": np.stack([a[1] for a in accs]),
        }
    return state, inputs, targets


def _as_float(x) -> float:
    return float((x.data if isinstance(x, T.Value) else np.asarray(x)).reshape(()))


def loss(
    output: StepOutput,
    targets: dict,
    stats: NormalizationStats,
    lambda_a: float = 1.0,
    lambda_f: float = 1.0,
    force_norm: str = "per_kind",
    tape=None,
):
    """Dual-instant loss: mean squared normalized acceleration error plus
    mean squared normalized pairwise-force error.

    Acceleration residuals are scaled by the dataset's ring-acceleration
    amplitude; force residuals by the per-kind force amplitude (or the global
    one with force_norm="global"). Means run over both supervised instants,
    every edge of the canonical graph (reversed contact edges included), and
    both vector components. Returns (total, parts) where parts holds the two
    unweighted means as floats.
    """
    if force_norm not in ("per_kind", "global"):
        raise ValueError(f"unknown force_norm {force_norm!r}")
    a_scale = stats.vector_maxima["acc.ring"]
    f_scale = stats.vector_maxima["force.global"]

    def kind_scale(kind: str) -> float:
        return f_scale if force_norm == "global" else stats.vector_maxima[f"force.{kind}"]

    out = {"initial": output.initial, "final": output.final}
    b = targets["initial"]["f_k2"].shape[0]
    two_bz = targets["initial"]["f_k1"].shape[0]
    n_edges = 2 * two_bz // b + 2  # 4Z + 2

    acc_sse = None
    force_sse = None

    def _sse(v):
        return T.sum_all(T.square(v, tape), tape)

    def _acc_add(total, v):
        return v if total is None else T.add(total, v, tape)

    for inst in ("initial", "final"):
        for ring in ("acc_ir", "acc_or"):
            resid = T.sub(out[inst][ring], targets[inst][ring] / a_scale, tape)
            acc_sse = _acc_add(acc_sse, _sse(resid))
        r1 = T.sub(
            T.scale(out[inst]["f_k1"], f_scale / kind_scale("k1"), tape),
            targets[inst]["f_k1"] / kind_scale("k1"),
            tape,
        )
        # reversed contact edges are exact negations on both sides, so their
        # contribution is a second copy of the forward rows
        force_sse = _acc_add(force_sse, T.scale(_sse(r1), 2.0, tape))
        for kind, key in (("k2", "f_k2"), ("k3", "f_k3")):
            rk = T.sub(
                T.scale(out[inst][key], f_scale / kind_scale(kind), tape),
                targets[inst][key] / kind_scale(kind),
                tape,
            )
            force_sse = _acc_add(force_sse, _sse(rk))

    acc_mean = T.scale(acc_sse, 1.0 / (2 * 2 * 2 * b), tape)
    force_mean = T.scale(force_sse, 1.0 / (2 * n_edges * 2 * b), tape)
    total = T.add(
        T.scale(acc_mean, lambda_a, tape), T.scale(force_mean, lambda_f, tape), tape
    )
    parts = {"acc": _as_float(acc_mean), "force": _as_float(force_mean)}
    return total, parts


@dataclass
class TrainConfig:
    """Everything the training loop needs besides the records themselves."""

    model: ModelConfig = field(default_factory=ModelConfig)
    lambda_a: float = 1.0
    lambda_f: float = 1.0
    force_norm: str = "per_kind"
    lr: float = 1e-3
    cosine_decay: bool = False
    lr_floor: float = 0.0
    total_steps: int = 1000
    batch_size: int = 8
    seed: int = 0
    detach_between_passes: bool = False
    log_every: int = 50
    save_every: int | None = None
    checkpoint_path: str | None = None
    log_path: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["model"] = ModelConfig(**d["model"])
        return cls(**d)


@dataclass
class TrainResult:
    params: dict
    stats: NormalizationStats
    adam: AdamState
    history: list[dict]
    config: TrainConfig


def _flat_params(params: dict) -> dict[str, np.ndarray]:
    flat = {}
    for p in params.values():
        flat.update(dict(p.flat()))
    return flat


def train(
    records: list[TrajectoryRecord],
    config: TrainConfig,
    val_records: list[TrajectoryRecord] | None = None,
    stats: NormalizationStats | None = None,
    resume_from: str | None = None,
    geometry_radii: tuple[float, float] | None = None,
) -> TrainResult:
    """Run the Adam loop over uniformly drawn chunks of the records.

    Resuming restores parameters, optimizer moments, and the RNG state, so a
    split run reproduces an unbroken one bit for bit.
    """
    geometry = records[0].geometry
    radii = geometry_radii or (geometry.r_ir, geometry.r_or)
    pool = sample_pool(records, config.model.m_passes)
    if not pool:
        raise ValueError("records too short to train on")

    rng = np.random.default_rng(config.seed)
    start_step = 0
    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
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
        params = init_model(config.model, rng)
        stats = stats or fit_normalization(records)
        adam = AdamState(lr=config.lr)

    flat = _flat_params(params)
    val_batch = None
    if val_records:
        val_rng = np.random.default_rng(config.seed + 1)
        probe = make_samples(val_records, config.model.m_passes, 32, val_rng)
        val_batch = build_batch(probe)

    history: list[dict] = []
    for step_idx in range(start_step, config.total_steps):
        picks = rng.integers(0, len(pool), size=config.batch_size)
        samples = [
            extract_sample(records[pool[p][0]], pool[p][1], config.model.m_passes)
            for p in picks
        ]
        state, inputs, targets = build_batch(samples)

        tape = T.Tape()
        output = forward_step(
            state, params, inputs, config.model, stats, radii,
            tape=tape, detach_between_passes=config.detach_between_passes,
        )
        total, parts = loss(
            output, targets, stats,
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
            row = {
                "step": done,
                "loss": _as_float(total),
                "acc": parts["acc"],
                "force": parts["force"],
                "lr": lr,
            }
            if val_batch is not None:
                v_out = forward_step(
                    val_batch[0], params, val_batch[1], config.model, stats, radii
                )
                v_total, _ = loss(
                    v_out, val_batch[2], stats,
                    lambda_a=config.lambda_a, lambda_f=config.lambda_f,
                    force_norm=config.force_norm,
                )
                row["val_loss"] = _as_float(v_total)
            history.append(row)

        if (
            config.checkpoint_path
            and config.save_every
            and done % config.save_every == 0
        ):
            _save(config, params, stats, adam, rng, done)

    if config.checkpoint_path:
        _save(config, params, stats, adam, rng, config.total_steps)
    if config.log_path and history:
        with open(config.log_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(history[-1].keys()))
            writer.writeheader()
            for row in history:
                writer.writerow(row)
    return TrainResult(params=params, stats=stats, adam=adam, history=history, config=config)


def _save(config: TrainConfig, params, stats, adam, rng, step: int) -> None:
    save_checkpoint(
        config.checkpoint_path,
        model_kind="equi_euler",
        config=asdict(config.model),
        params=params,
        stats=stats,
        step=step,
        adam=adam,
        rng_state=rng.bit_generator.state,
        extra={"train_config": config.to_dict()},
    )
