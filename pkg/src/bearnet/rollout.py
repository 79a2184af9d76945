"""Chunked autoregressive rollout with overlap averaging, plus metrics.

A trained model advances the bearing state one chunk (``stride`` recording
steps) at a time. Consecutive chunks share their boundary instant, so a
rolled-out quantity can receive up to two estimates — one from the chunk that
ends there and one from the chunk that starts there — which are averaged.
The first and last instants of a rollout have a single estimate and are used
as-is. Which instants carry force estimates depends on the architecture:

- the primary model evaluates forces at both chunk ends (every instant gets
  two estimates, the endpoints one);
- the history-based model decodes forces from its input graph (chunk starts
  only, so the last instant carries no force estimate);
- the equivariant comparison models decode forces from their final-layer
  edge geometry (chunk ends only, so the first instant carries none);
- the reference simulator wrapped as a model evaluates exact force tables at
  both ends.

Per-instant validity is tracked so metrics never mix in unfilled slots.
Divergence (non-finite values, or any position/velocity beyond 1000x the
training-set amplitude maxima) aborts the rollout with the failing step
index and the partial result.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import storage
from .baselines import BaselineConfig, baseline_module, gns
from .checkpoint import Checkpoint, load_checkpoint
from .graph import NormalizationStats
from .model import (
    ModelConfig,
    ModelInputs,
    batch_states,
    canonical_forces,
    forward_step,
    state_to_system,
)
from .sim import (
    BearingGeometry,
    OperatingCondition,
    SystemState,
    force_table,
    step as sim_step,
)

__all__ = [
    "ChunkEmit",
    "EquiEulerAdapter",
    "GnsAdapter",
    "EgnnAdapter",
    "GmnAdapter",
    "SimOracleAdapter",
    "MetricReport",
    "RolloutDivergence",
    "RolloutResult",
    "adapter_from_checkpoint",
    "compare",
    "export_curves_csv",
    "export_summary_json",
    "load_rollout",
    "metrics",
    "polar_forces",
    "rollout",
    "save_rollout",
]


class RolloutDivergence(RuntimeError):
    """The rolled-out state left the trusted envelope.

    Carries the failing sub-step index and the partial result up to the last
    healthy instant.
    """

    def __init__(self, step: int, detail: str, result: "RolloutResult"):
        super().__init__(f"rollout diverged at step {step}: {detail}")
        self.step = step
        self.result = result


@dataclass
class ChunkEmit:
    """What one model application reports back to the rollout engine."""

    final_state: SystemState
    initial_forces: np.ndarray | None = None  # canonical (E, 2), physical
    final_forces: np.ndarray | None = None
    initial_state: SystemState | None = None  # optional second estimate


@dataclass
class RolloutResult:
    """Predicted trajectory at every chunk boundary, with averaged forces."""

    kind: str
    stride: int
    instants: np.ndarray  # (n_i,) recording-step indices, multiples of stride
    t: np.ndarray  # (n_i,)
    x_re: np.ndarray  # (n_i, Z, 2)
    x_ir: np.ndarray  # (n_i, 2)
    x_or: np.ndarray  # (n_i, 2)
    forces: np.ndarray  # (n_i, E, 2) canonical edge order, physical units
    force_valid: np.ndarray  # (n_i,) bool
    diverged_at: int | None = None
    overlap_estimates: list | None = None  # per instant: list of force arrays

    @property
    def n_instants(self) -> int:
        return self.instants.shape[0]


def _state_arrays_bad(state: SystemState, stats: NormalizationStats) -> str | None:
    x_cap = 1e3 * stats.vector_maxima["node.x"]
    v_cap = 1e3 * stats.vector_maxima["node.v"]
    for name, arr, cap in (
        ("roller position", state.x_re, x_cap),
        ("inner-ring position", state.x_ir, x_cap),
        ("outer-ring position", state.x_or, x_cap),
        ("roller velocity", state.v_re, v_cap),
        ("inner-ring velocity", state.v_ir, v_cap),
        ("outer-ring velocity", state.v_or, v_cap),
    ):
        a = np.asarray(arr)
        if not np.isfinite(a).all():
            return f"non-finite {name}"
        peak = np.abs(a).max()
        if peak > cap:
            return f"{name} reached {peak:.3e}, beyond 1000x the training maximum"
    return None


def rollout(
    adapter,
    state0: SystemState,
    condition: OperatingCondition,
    horizon: int,
    stats: NormalizationStats | None = None,
    raise_on_divergence: bool = True,
    keep_overlap_estimates: bool = False,
) -> RolloutResult:
    """Advance ``horizon`` recording steps from state0, chunk by chunk.

    horizon must be a multiple of the adapter's stride. The load schedule is
    indexed by recording step; learned models receive the chunk-start load as
    a chunk-constant input, while the simulator adapter consumes one value
    per sub-step. ``stats`` supplies the divergence envelope and defaults to
    the adapter's own normalization statistics.
    """
    if stats is None:
        stats = getattr(adapter, "stats", None)
    if stats is None:
        raise ValueError(
            "this adapter carries no normalization statistics; pass stats= "
            "to define the divergence envelope"
        )
    stride = adapter.stride
    if horizon % stride != 0:
        raise ValueError(f"horizon {horizon} is not a multiple of stride {stride}")
    n_chunks = horizon // stride
    z = state0.n_rollers
    n_edges = 4 * z + 2
    n_inst = n_chunks + 1

    x_re = np.zeros((n_inst, z, 2))
    x_ir = np.zeros((n_inst, 2))
    x_or = np.zeros((n_inst, 2))
    t = np.zeros(n_inst)
    force_sum = np.zeros((n_inst, n_edges, 2))
    force_count = np.zeros(n_inst, dtype=np.int64)
    estimates: list[list] | None = [[] for _ in range(n_inst)] if keep_overlap_estimates else None

    def record_state(idx: int, s: SystemState) -> None:
        x_re[idx] = s.x_re
        x_ir[idx] = s.x_ir
        x_or[idx] = s.x_or
        t[idx] = s.t

    def record_forces(idx: int, f: np.ndarray | None) -> None:
        if f is None:
            return
        force_sum[idx] += f
        force_count[idx] += 1
        if estimates is not None:
            estimates[idx].append(np.array(f))

    def build(n_done: int, diverged_at: int | None) -> RolloutResult:
        n = n_done + 1
        counts = np.maximum(force_count[:n], 1)[:, None, None]
        return RolloutResult(
            kind=adapter.kind,
            stride=stride,
            instants=np.arange(n) * stride,
            t=t[:n].copy(),
            x_re=x_re[:n].copy(),
            x_ir=x_ir[:n].copy(),
            x_or=x_or[:n].copy(),
            forces=force_sum[:n] / counts,
            force_valid=force_count[:n] > 0,
            diverged_at=diverged_at,
            overlap_estimates=None if estimates is None else estimates[:n],
        )

    state = state0.copy()
    bad = _state_arrays_bad(state, stats)
    if bad is not None:
        raise ValueError(f"initial state is outside the trusted envelope: {bad}")
    record_state(0, state)

    carry = adapter.start(state)
    for chunk in range(n_chunks):
        k0 = chunk * stride
        # one load per recording step in the chunk, plus the boundary instant
        loads = np.stack(
            [condition.load.load_at(k0 + j) for j in range(stride + 1)]
        )
        try:
            carry, emit = adapter.step(carry, loads)
        except (FloatingPointError, ValueError) as exc:
            # a mid-chunk overflow to non-finite values is divergence, not a
            # programming error; anything else propagates unchanged
            if isinstance(exc, ValueError) and "non-finite" not in str(exc):
                raise
            result = build(chunk, diverged_at=k0 + stride)
            detail = f"model produced non-finite values inside the chunk ({exc})"
            if raise_on_divergence:
                raise RolloutDivergence(k0 + stride, detail, result) from exc
            return result
        record_forces(chunk, emit.initial_forces)
        record_forces(chunk + 1, emit.final_forces)
        nxt = emit.final_state
        bad = _state_arrays_bad(nxt, stats)
        if bad is not None:
            result = build(chunk, diverged_at=k0 + stride)
            if raise_on_divergence:
                raise RolloutDivergence(k0 + stride, bad, result)
            return result
        record_state(chunk + 1, nxt)
    return build(n_chunks, diverged_at=None)


# ----------------------------------------------------------------- adapters


def _advance_bookkeeping(
    state: SystemState, nxt: SystemState, omega: float, cage_ratio: float, dt: float
) -> SystemState:
    nxt.t = state.t + dt
    nxt.shaft_angle = state.shaft_angle + omega * dt
    nxt.cage_angle = state.cage_angle + omega * cage_ratio * dt
    return nxt


class EquiEulerAdapter:
    """Primary model: forces at both chunk ends, state advanced internally."""

    kind = "equi_euler"

    def __init__(
        self,
        params: dict,
        config: ModelConfig,
        stats: NormalizationStats,
        geometry: BearingGeometry,
        condition: OperatingCondition,
    ):
        self.params = params
        self.config = config
        self.stats = stats
        self.geometry = geometry
        self.omega = condition.omega
        self.stride = config.m_passes
        self.dt = config.dt_sub

    def start(self, state: SystemState) -> SystemState:
        return state

    def step(self, state: SystemState, loads: np.ndarray):
        batch = batch_states([state])
        inputs = ModelInputs(
            omega=np.array([self.omega]), f_ext=loads[:1].astype(np.float64)
        )
        out = forward_step(
            batch,
            self.params,
            inputs,
            self.config,
            self.stats,
            (self.geometry.r_ir, self.geometry.r_or),
        )
        z = state.n_rollers
        nxt = state_to_system(out.state, 0)
        _advance_bookkeeping(
            state, nxt, self.omega, self.geometry.cage_ratio(), self.stride * self.dt
        )
        emit = ChunkEmit(
            final_state=nxt,
            initial_forces=canonical_forces(out.initial, self.stats, 1, z)[0],
            final_forces=canonical_forces(out.final, self.stats, 1, z)[0],
            initial_state=state,
        )
        return nxt, emit


class _BaselineAdapter:
    """Shared plumbing for the comparison models."""

    def __init__(
        self,
        module,
        params: dict,
        config: BaselineConfig,
        stats: NormalizationStats,
        geometry: BearingGeometry,
        condition: OperatingCondition,
    ):
        self.module = module
        self.kind = module.KIND
        self.params = params
        self.config = config
        self.stats = stats
        self.geometry = geometry
        self.omega = condition.omega
        self.stride = config.m_passes
        self.dt = config.dt_sub

    def _forward(self, sample: dict) -> dict:
        inputs, _ = self.module.collate(
            [sample], self.stats, self.config, self.geometry
        )
        return self.module.forward(inputs, self.params, self.config, self.stats, None)


class GnsAdapter(_BaselineAdapter):
    """History-based model: forces at chunk starts, semi-implicit integration
    of de-standardized accelerations over the chunk horizon."""

    def start(self, state: SystemState):
        hist = np.zeros((state.n_rollers + 3, self.config.history, 2))
        hist[:, 0] = self._node_velocities(state)
        return (state, hist)

    @staticmethod
    def _node_velocities(state: SystemState) -> np.ndarray:
        return np.concatenate(
            [state.v_re, state.v_ir[None], state.v_or[None], np.zeros((1, 2))]
        )

    def step(self, carry, loads: np.ndarray):
        state, hist = carry
        sample = gns.runtime_sample(hist, state, self.omega, loads[0])
        out = self._forward(sample)
        forces = gns.physical_forces(out, self.stats)
        acc = gns.physical_accelerations(out, self.stats)

        z = state.n_rollers
        horizon = self.stride * self.dt
        x_nodes = np.concatenate(
            [state.x_re, state.x_ir[None], state.x_or[None], np.zeros((1, 2))]
        )
        v_nodes = self._node_velocities(state)
        v_new = v_nodes.copy()
        v_new[:-1] += acc[:-1] * horizon  # ground stays put
        x_new = x_nodes.copy()
        x_new[:-1] += v_new[:-1] * horizon

        nxt = SystemState(
            t=0.0,
            x_ir=x_new[z],
            v_ir=v_new[z],
            x_or=x_new[z + 1],
            v_or=v_new[z + 1],
            x_re=x_new[:z],
            v_re=v_new[:z],
        )
        _advance_bookkeeping(
            state, nxt, self.omega, self.geometry.cage_ratio(), horizon
        )
        new_hist = np.roll(hist, 1, axis=1)
        new_hist[:, 0] = v_new
        emit = ChunkEmit(final_state=nxt, initial_forces=forces)
        return (nxt, new_hist), emit


class _EquivariantBaselineAdapter(_BaselineAdapter):
    """Shared stepping for the models that predict the next state directly:
    forces attributed to chunk ends."""

    def start(self, state: SystemState) -> SystemState:
        return state

    def step(self, state: SystemState, loads: np.ndarray):
        sample = self.module.runtime_sample(state, self.omega, loads[0])
        out = self._forward(sample)
        forces = self.module.physical_forces(out, self.stats)
        x_nodes, v_nodes = self.module.physical_state(out, self.stats)

        z = state.n_rollers
        nxt = SystemState(
            t=0.0,
            x_ir=x_nodes[z],
            v_ir=v_nodes[z],
            x_or=x_nodes[z + 1],
            v_or=v_nodes[z + 1],
            x_re=x_nodes[:z],
            v_re=v_nodes[:z],
        )
        _advance_bookkeeping(
            state, nxt, self.omega, self.geometry.cage_ratio(), self.stride * self.dt
        )
        emit = ChunkEmit(final_state=nxt, final_forces=forces)
        return nxt, emit


class EgnnAdapter(_EquivariantBaselineAdapter):
    pass


class GmnAdapter(_EquivariantBaselineAdapter):
    pass


class SimOracleAdapter:
    """The reference simulator behind the model interface: a plumbing oracle.

    Emits exact force tables at both chunk ends and advances the state with
    the same integrator that produced the ground truth, so a rollout must
    reproduce a recorded trajectory (same condition, same substepping) to
    floating-point noise.
    """

    kind = "sim_oracle"

    def __init__(
        self,
        geometry: BearingGeometry,
        condition: OperatingCondition,
        stride: int,
    ):
        self.geometry = geometry
        self.condition = condition
        self.stride = stride

    def start(self, state: SystemState) -> SystemState:
        return state

    def _canonical(self, state: SystemState, load: np.ndarray) -> np.ndarray:
        tab = force_table(state, load, self.geometry, self.condition)
        return np.concatenate(
            [
                tab["f_on_ir_from_re"],
                tab["f_on_or_from_re"],
                -tab["f_on_ir_from_re"],
                -tab["f_on_or_from_re"],
                tab["f_gnd_ir"][None],
                tab["f_gnd_or"][None],
            ]
        )

    def step(self, state: SystemState, loads: np.ndarray):
        initial_forces = self._canonical(state, loads[0])
        nxt = state
        for j in range(self.stride):
            nxt = sim_step(nxt, loads[j], self.geometry, self.condition)
        emit = ChunkEmit(
            final_state=nxt,
            initial_forces=initial_forces,
            final_forces=self._canonical(nxt, loads[self.stride]),
        )
        return nxt, emit


_EQUIVARIANT_ADAPTERS = {"egnn": EgnnAdapter, "gmn": GmnAdapter}


def adapter_from_checkpoint(
    ckpt: Checkpoint | str,
    geometry: BearingGeometry,
    condition: OperatingCondition,
):
    """Build the matching rollout adapter for a trained checkpoint."""
    if isinstance(ckpt, str):
        ckpt = load_checkpoint(ckpt)
    if ckpt.model_kind == "equi_euler":
        return EquiEulerAdapter(
            ckpt.params, ModelConfig(**ckpt.config), ckpt.stats, geometry, condition
        )
    module = baseline_module(ckpt.model_kind)
    config = BaselineConfig(**ckpt.config)
    if ckpt.model_kind == "gns":
        return GnsAdapter(module, ckpt.params, config, ckpt.stats, geometry, condition)
    adapter_cls = _EQUIVARIANT_ADAPTERS[ckpt.model_kind]
    return adapter_cls(module, ckpt.params, config, ckpt.stats, geometry, condition)


# ------------------------------------------------------------------ metrics


@dataclass
class MetricReport:
    """Ground-truth-aligned error curves for one rollout."""

    instants: np.ndarray
    t: np.ndarray
    position_rmse: np.ndarray  # (n_i,) over rollers
    force_rmse: np.ndarray  # (n_i,) over ring-incoming contact edges; NaN where invalid
    force_valid: np.ndarray
    cumulative_angle: np.ndarray  # (n_i,) |shaft rotation| since the start
    angle_bin_edges: np.ndarray  # (n_bins + 1,)
    angle_bin_rmse: np.ndarray  # (n_bins,)
    angle_bin_counts: np.ndarray
    summary: dict = field(default_factory=dict)


def _truth_forces(record, instants: np.ndarray) -> np.ndarray:
    a = record.arrays
    f_ir = a["f_on_ir_from_re"][instants]  # (n_i, Z, 2)
    f_or = a["f_on_or_from_re"][instants]
    return np.concatenate([f_ir, f_or], axis=1)  # ring-incoming contact rows


def metrics(
    result: RolloutResult,
    record,
    angle_bin_width: float = 0.1,
) -> MetricReport:
    """Error curves of a rollout against the aligned ground-truth record.

    Position RMSE per instant is the root mean squared roller displacement
    error (per-roller error = Euclidean distance, so a uniform offset of
    magnitude d gives RMSE exactly d). Force RMSE pools the ring-incoming
    contact edges (both raceways) the same way. The angle-binned curve pools
    squared force errors by cumulative shaft rotation since the rollout
    start.
    """
    instants = result.instants
    if instants[-1] >= record.n_steps:
        raise ValueError(
            f"rollout reaches step {instants[-1]} but the record has only "
            f"{record.n_steps} steps"
        )
    truth_x = record.arrays["x_re"][instants]
    pos_sq = ((result.x_re - truth_x) ** 2).sum(axis=2)  # (n_i, Z)
    position_rmse = np.sqrt(pos_sq.mean(axis=1))

    z = record.geometry.n_rollers
    truth_f = _truth_forces(record, instants)
    pred_f = result.forces[:, : 2 * z]
    force_sq = ((pred_f - truth_f) ** 2).sum(axis=2)  # (n_i, 2Z)
    force_rmse = np.sqrt(force_sq.mean(axis=1))
    force_rmse[~result.force_valid] = np.nan

    shaft = record.arrays["shaft_angle"][instants]
    cumulative = np.abs(shaft - shaft[0])

    top = cumulative[-1]
    n_bins = max(int(np.ceil(top / angle_bin_width)), 1)
    edges = np.arange(n_bins + 1) * angle_bin_width
    bin_idx = np.minimum((cumulative / angle_bin_width).astype(int), n_bins - 1)
    bin_rmse = np.full(n_bins, np.nan)
    bin_counts = np.zeros(n_bins, dtype=np.int64)
    for b in range(n_bins):
        rows = (bin_idx == b) & result.force_valid
        bin_counts[b] = rows.sum()
        if bin_counts[b]:
            bin_rmse[b] = np.sqrt(force_sq[rows].mean())

    valid = result.force_valid
    summary = {
        "kind": result.kind,
        "n_instants": int(result.n_instants),
        "horizon": int(instants[-1]),
        "diverged_at": result.diverged_at,
        "mean_position_rmse": float(position_rmse.mean()),
        "final_position_rmse": float(position_rmse[-1]),
        "mean_force_rmse": float(force_rmse[valid].mean()) if valid.any() else None,
        "final_force_rmse": (
            float(force_rmse[valid][-1]) if valid.any() else None
        ),
        "position_growth": _growth_ratios(position_rmse, instants),
        "force_growth": _growth_ratios(force_rmse, instants),
    }
    return MetricReport(
        instants=instants,
        t=result.t,
        position_rmse=position_rmse,
        force_rmse=force_rmse,
        force_valid=result.force_valid,
        cumulative_angle=cumulative,
        angle_bin_edges=edges,
        angle_bin_rmse=bin_rmse,
        angle_bin_counts=bin_counts,
        summary=summary,
    )


def _growth_ratios(curve: np.ndarray, instants: np.ndarray) -> dict[str, float]:
    """RMSE(2k)/RMSE(k) for the bounded-error-growth regression."""
    ratios: dict[str, float] = {}
    lookup = {int(s): i for i, s in enumerate(instants)}
    for k in (250, 500, 1000):
        i, j = lookup.get(k), lookup.get(2 * k)
        if i is None or j is None:
            continue
        a, b = curve[i], curve[j]
        if np.isfinite(a) and np.isfinite(b) and a > 0:
            ratios[str(k)] = float(b / a)
    return ratios


def polar_forces(result: RolloutResult, record, instant: int) -> dict:
    """Per-roller load snapshot for polar plotting at one rollout instant.

    The roller load is the contact force the roller exerts on the outer
    ring; azimuths come from each trajectory's own roller positions.
    """
    idx = np.flatnonzero(result.instants == instant)
    if idx.size == 0:
        raise ValueError(f"instant {instant} is not a rollout boundary")
    i = int(idx[0])
    z = record.geometry.n_rollers
    pred_f = result.forces[i, z : 2 * z]
    truth_f = record.arrays["f_on_or_from_re"][instant]
    truth_x = record.arrays["x_re"][instant]
    return {
        "instant": instant,
        "t": float(result.t[i]),
        "azimuth_pred": np.arctan2(result.x_re[i][:, 1], result.x_re[i][:, 0]),
        "magnitude_pred": np.linalg.norm(pred_f, axis=1),
        "azimuth_true": np.arctan2(truth_x[:, 1], truth_x[:, 0]),
        "magnitude_true": np.linalg.norm(truth_f, axis=1),
        "force_valid": bool(result.force_valid[i]),
    }


# ------------------------------------------------------------------ compare


def compare(
    adapters: dict[str, object],
    record,
    horizon: int,
    stats: NormalizationStats | None = None,
    angle_bin_width: float = 0.1,
) -> dict:
    """Run identical rollouts for several models against one record.

    Returns {"results": {name: RolloutResult}, "metrics": {name:
    MetricReport}, "summary": {name: dict}}. A diverging model contributes
    its partial curves and a diverged_at marker instead of aborting the
    comparison. ``stats`` is the envelope fallback for adapters that carry
    no statistics of their own (the simulator oracle).
    """
    results: dict[str, RolloutResult] = {}
    reports: dict[str, MetricReport] = {}
    for name, adapter in adapters.items():
        res = rollout(
            adapter,
            record.state_at(0),
            record.condition,
            horizon,
            getattr(adapter, "stats", None) or stats,
            raise_on_divergence=False,
        )
        results[name] = res
        reports[name] = metrics(res, record, angle_bin_width=angle_bin_width)
    return {
        "results": results,
        "metrics": reports,
        "summary": {name: rep.summary for name, rep in reports.items()},
    }


# ------------------------------------------------------------------- export


def export_curves_csv(path: str, reports: dict[str, MetricReport]) -> None:
    """One row per instant; per-model position/force RMSE columns."""
    import csv

    names = list(reports)
    base = reports[names[0]]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["instant", "t", "cumulative_angle"]
        for name in names:
            header += [f"{name}.position_rmse", f"{name}.force_rmse"]
        writer.writerow(header)
        n = max(rep.instants.shape[0] for rep in reports.values())
        for i in range(n):
            if i < base.instants.shape[0]:
                row = [int(base.instants[i]), base.t[i], base.cumulative_angle[i]]
            else:
                for rep in reports.values():
                    if i < rep.instants.shape[0]:
                        row = [int(rep.instants[i]), rep.t[i], rep.cumulative_angle[i]]
                        break
            for name in names:
                rep = reports[name]
                if i < rep.instants.shape[0]:
                    row += [rep.position_rmse[i], rep.force_rmse[i]]
                else:
                    row += ["", ""]
            writer.writerow(row)


def export_summary_json(path: str, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ----------------------------------------------------------------- storage


def save_rollout(path: str, result: RolloutResult, extra: dict | None = None) -> None:
    header = {
        "kind": "rollout",
        "model_kind": result.kind,
        "stride": result.stride,
        "diverged_at": result.diverged_at,
        "extra": extra or {},
    }
    arrays = {
        "instants": result.instants.astype(np.float64),
        "t": result.t,
        "x_re": result.x_re,
        "x_ir": result.x_ir,
        "x_or": result.x_or,
        "forces": result.forces,
        "force_valid": result.force_valid.astype(np.float64),
    }
    storage.write_container(path, header, arrays)


def load_rollout(path: str) -> RolloutResult:
    header, arrays = storage.read_container(path)
    if header.get("kind") != "rollout":
        raise storage.StorageError(
            f"expected a rollout container, found kind {header.get('kind')!r}"
        )
    return RolloutResult(
        kind=header["model_kind"],
        stride=int(header["stride"]),
        instants=arrays["instants"].astype(np.int64),
        t=arrays["t"],
        x_re=arrays["x_re"],
        x_ir=arrays["x_ir"],
        x_or=arrays["x_or"],
        forces=arrays["forces"],
        force_valid=arrays["force_valid"] > 0.5,
        diverged_at=header["diverged_at"],
    )
