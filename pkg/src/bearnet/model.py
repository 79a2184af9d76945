"""Equivariant bearing network with interleaved learned-force integration.

One forward step advances the bearing by M internal passes of duration dt_sub
each. Every pass runs:

1. a dynamics layer: per-edge-kind MLPs turn invariant scalars (contact
   radius, velocity-difference magnitude) into coefficients on the edge's
   unit displacement / unit velocity-difference vectors, giving pairwise
   forces; ring accelerations are the aggregated forces scaled by a learned
   per-type mobility;
2. a semi-implicit velocity update of both rings;
3. a kinematics layer: rollers get their velocities reconstructed from the
   updated ring velocities and shaft spin via coefficients on the parallel /
   perpendicular / rotation-coupling basis of each ring-to-roller edge;
4. a trapezoidal position update of every body.

All scalars fed to MLPs are rotation- and translation-invariant and all
vector outputs are built on rotation-covariant bases, so predictions are
exactly equivariant. Roller->ring and ring->roller messages are computed once
per pair and negated, making pairwise forces antisymmetric by construction.

Pass 1 consumes zeroed roller velocities (they are unobservable at
deployment); later passes use the reconstructed ones. The forces and ring
accelerations of the first and last dynamics evaluations are both returned:
the first describes the step's start instant, the last — evaluated one
sub-step before the end — is trained to match the end instant, so in rollouts
consecutive chunks yield two averageable estimates per interior instant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .graph import NormalizationStats
from .mlp import MlpParams, MlpSpec, init_mlp, mlp_forward
from .sim import SystemState

__all__ = [
    "BatchState",
    "ModelConfig",
    "ModelInputs",
    "StepOutput",
    "batch_states",
    "canonical_forces",
    "forward_step",
    "init_model",
    "model_mlp_specs",
    "ring_accelerations",
    "state_to_system",
]

_SEL2 = [np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])]
_SEL3 = [
    np.array([[1.0], [0.0], [0.0]]),
    np.array([[0.0], [1.0], [0.0]]),
    np.array([[0.0], [0.0], [1.0]]),
]


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and integration settings."""

    width: int = 128
    m_passes: int = 5
    activation: str = "silu"
    dt_sub: float = 6.667e-5

    def __post_init__(self):
        if self.width < 1 or self.m_passes < 1 or self.dt_sub <= 0:
            raise ValueError("width, m_passes must be >= 1 and dt_sub > 0")


def model_mlp_specs(config: ModelConfig) -> dict[str, MlpSpec]:
    w = config.width
    act = config.activation
    hidden = (w, w)

    def spec(i, o, zero):
        return MlpSpec(
            input_width=i, hidden_widths=hidden, output_width=o,
            activation=act, final_layer_zero_init=zero,
        )

    return {
        "phi_n": spec(4, w, False),
        "theta_n": spec(w, 1, True),
        "phi_e1": spec(2, w, False),
        "phi_e2": spec(2, w, False),
        "phi_e3": spec(2, w, False),
        "theta_e1": spec(w, 2, True),
        "theta_e2": spec(w, 2, True),
        "theta_e3": spec(w, 2, True),
        "phi_k": spec(5, w, False),
        "theta_k": spec(w, 3, True),
    }


def init_model(config: ModelConfig, rng: np.random.Generator) -> dict[str, MlpParams]:
    return {name: init_mlp(s, rng, name) for name, s in model_mlp_specs(config).items()}


@dataclass
class BatchState:
    """B bearing states stacked row-wise (rollers flattened to B*Z rows).

    Fields may be plain arrays or taped values; roller velocities are carried
    for bookkeeping but a forward step never reads them (they are treated as
    unobservable and reconstructed internally).
    """

    n_samples: int
    n_rollers: int
    x_re: object  # (B*Z, 2)
    v_re: object
    x_ir: object  # (B, 2)
    v_ir: object
    x_or: object
    v_or: object


@dataclass(frozen=True)
class ModelInputs:
    """Per-sample operating inputs: shaft speed and external ring load."""

    omega: np.ndarray  # (B,)
    f_ext: np.ndarray  # (B, 2) applied at the outer ring, physical units

    def __post_init__(self):
        if self.omega.ndim != 1 or self.f_ext.shape != (self.omega.shape[0], 2):
            raise ValueError("omega must be (B,), f_ext (B, 2)")


@dataclass
class StepOutput:
    """Model-scale outputs of the first and last dynamics evaluations plus
    the advanced state. Keys of the dicts: f_k1 (2BZ,2 roller->ring contact
    forces, inner block first), f_k2/f_k3 (B,2 mount forces), acc_ir/acc_or
    (B,2 ring accelerations, pre-amplitude-scale)."""

    initial: dict
    final: dict
    state: BatchState


def batch_states(states: list[SystemState]) -> BatchState:
    z = states[0].n_rollers
    if any(s.n_rollers != z for s in states):
        raise ValueError("all states in a batch must share the roller count")
    return BatchState(
        n_samples=len(states),
        n_rollers=z,
        x_re=np.concatenate([s.x_re for s in states]),
        v_re=np.concatenate([s.v_re for s in states]),
        x_ir=np.stack([s.x_ir for s in states]),
        v_ir=np.stack([s.v_ir for s in states]),
        x_or=np.stack([s.x_or for s in states]),
        v_or=np.stack([s.v_or for s in states]),
    )


def state_to_system(state: BatchState, i: int, t: float = 0.0) -> SystemState:
    z = state.n_rollers
    d = lambda v: v.data if isinstance(v, T.Value) else v
    return SystemState(
        t=t,
        x_ir=d(state.x_ir)[i].copy(),
        v_ir=d(state.v_ir)[i].copy(),
        x_or=d(state.x_or)[i].copy(),
        v_or=d(state.v_or)[i].copy(),
        x_re=d(state.x_re)[i * z:(i + 1) * z].copy(),
        v_re=d(state.v_re)[i * z:(i + 1) * z].copy(),
    )


def _minmax(x, name: str, stats: NormalizationStats, tape):
    lo, hi = stats.scalar_ranges[name]
    return T.affine(x, 1.0 / (hi - lo), -lo / (hi - lo), tape)


def _cols(x, selectors, tape):
    return [T.matmul(x, s, tape) for s in selectors]


def _dynamics_layer(
    state: BatchState,
    v_re_dyn,
    params: dict,
    inputs: ModelInputs,
    config: ModelConfig,
    stats: NormalizationStats,
    geometry_radii: tuple[float, float],
    seg: np.ndarray,
    tape,
) -> dict:
    """Pairwise forces and ring accelerations at the current internal state.

    v_re_dyn: roller velocities this evaluation should see ((B*Z,2) value/array).
    Returns model-scale outputs plus physical ring accelerations under keys
    'acc_ir_phys'/'acc_or_phys'.
    """
    b, z = state.n_samples, state.n_rollers
    r_ir, r_or = geometry_radii
    f_scale = stats.vector_maxima["force.global"]
    a_scale = stats.vector_maxima["acc.ring"]

    x_ir_b = T.gather_rows(state.x_ir, seg, tape)
    x_or_b = T.gather_rows(state.x_or, seg, tape)
    v_ir_b = T.gather_rows(state.v_ir, seg, tape)
    v_or_b = T.gather_rows(state.v_or, seg, tape)

    to_ir = T.sub(x_ir_b, state.x_re, tape)
    to_or = T.sub(x_or_b, state.x_re, tape)
    d_i = T.rownorm(to_ir, tape)
    d_o = T.rownorm(to_or, tape)
    u_ir = T.unit_rows(to_ir, tape)
    u_or = T.unit_rows(to_or, tape)
    # effective contact radius, one value per roller shared by both raceways;
    # it is also |dx| exactly, since the displacement feature is r_eff * unit
    r_eff = T.scale(T.add(T.affine(d_i, 1.0, -r_ir, tape),
                          T.affine(d_o, -1.0, r_or, tape), tape), 0.5, tape)

    dv_ir = T.sub(v_ir_b, v_re_dyn, tape)
    dv_or = T.sub(v_or_b, v_re_dyn, tape)
    ndv_ir = T.rownorm(dv_ir, tape)
    ndv_or = T.rownorm(dv_or, tape)
    udv_ir = T.unit_rows(dv_ir, tape)
    udv_or = T.unit_rows(dv_or, tape)

    feats_k1 = T.concat_cols(
        [
            _minmax(T.concat_rows([r_eff, r_eff], tape), "dyn.k1.dx", stats, tape),
            _minmax(T.concat_rows([ndv_ir, ndv_or], tape), "dyn.k1.dv", stats, tape),
        ],
        tape,
    )
    eps_k1 = mlp_forward(params["phi_e1"], feats_k1, tape)
    coef_k1 = mlp_forward(params["theta_e1"], eps_k1, tape)
    cx, cv = _cols(coef_k1, _SEL2, tape)
    u_dx = T.concat_rows([u_ir, u_or], tape)
    u_dv = T.concat_rows([udv_ir, udv_or], tape)
    f_k1 = T.add(T.col_scale(cx, u_dx, tape), T.col_scale(cv, u_dv, tape), tape)

    def mount_force(kind, x_ring, v_ring):
        feats = T.concat_cols(
            [
                _minmax(T.rownorm(x_ring, tape), f"dyn.k{kind}.dx", stats, tape),
                _minmax(T.rownorm(v_ring, tape), f"dyn.k{kind}.dv", stats, tape),
            ],
            tape,
        )
        coef = mlp_forward(params[f"theta_e{kind}"],
                           mlp_forward(params[f"phi_e{kind}"], feats, tape), tape)
        gx, gv = _cols(coef, _SEL2, tape)
        return T.add(
            T.col_scale(gx, T.unit_rows(x_ring, tape), tape),
            T.col_scale(gv, T.unit_rows(v_ring, tape), tape),
            tape,
        )

    f_k2 = mount_force(2, state.x_ir, state.v_ir)
    f_k3 = mount_force(3, state.x_or, state.v_or)

    # net model-scale force on each ring: contact sum + mount + external
    f_ir_contact = T.segment_sum(T.gather_rows(f_k1, np.arange(0, b * z), tape), seg, b, tape)
    f_or_contact = T.segment_sum(
        T.gather_rows(f_k1, np.arange(b * z, 2 * b * z), tape), seg, b, tape
    )
    f_ext_scaled = inputs.f_ext / f_scale
    f_net_ir = T.add(f_ir_contact, f_k2, tape)
    f_net_or = T.add(T.add(f_or_contact, f_k3, tape), f_ext_scaled, tape)

    onehot = np.zeros((2, 4))
    onehot[0, 1] = 1.0  # inner ring type
    onehot[1, 2] = 1.0  # outer ring type
    mobility = mlp_forward(params["theta_n"], mlp_forward(params["phi_n"], onehot, tape), tape)
    s_ir = T.gather_rows(mobility, np.array([0]), tape)
    s_or = T.gather_rows(mobility, np.array([1]), tape)
    acc_ir = T.scalar_scale(s_ir, f_net_ir, tape)
    acc_or = T.scalar_scale(s_or, f_net_or, tape)

    return {
        "f_k1": f_k1,
        "f_k2": f_k2,
        "f_k3": f_k3,
        "acc_ir": acc_ir,
        "acc_or": acc_or,
        "acc_ir_phys": T.scale(acc_ir, a_scale, tape),
        "acc_or_phys": T.scale(acc_or, a_scale, tape),
    }


def _kinematics_layer(
    state: BatchState,
    v_ir_new,
    v_or_new,
    params: dict,
    inputs: ModelInputs,
    stats: NormalizationStats,
    seg: np.ndarray,
    tape,
):
    """Reconstruct roller velocities from updated ring motion and shaft spin."""
    b, z = state.n_samples, state.n_rollers
    omega_col = np.repeat(inputs.omega, z)[:, None]
    blocks = []
    scalars = []
    for type_flag, x_ring, v_ring, omega in (
        (0.0, state.x_ir, v_ir_new, omega_col),
        (1.0, state.x_or, v_or_new, np.zeros_like(omega_col)),
    ):
        delta = T.sub(state.x_re, T.gather_rows(x_ring, seg, tape), tape)
        dist = T.rownorm(delta, tape)
        u = T.unit_rows(delta, tape)
        v_b = T.gather_rows(v_ring, seg, tape)
        vpar_c = T.rowdot(v_b, u, tape)
        v_par = T.col_scale(vpar_c, u, tape)
        v_perp = T.sub(v_b, v_par, tape)
        spin = T.col_scale(omega, T.perp2d(delta, tape), tape)
        feats = T.concat_cols(
            [
                _minmax(dist, "kin.dx", stats, tape),
                _minmax(T.rownorm(v_par, tape), "kin.vpar", stats, tape),
                _minmax(T.rownorm(v_perp, tape), "kin.vperp", stats, tape),
                _minmax(T.rownorm(spin, tape), "kin.womega", stats, tape),
                np.full((b * z, 1), type_flag),
            ],
            tape,
        )
        blocks.append((v_par, v_perp, spin))
        scalars.append(feats)

    feats = T.concat_rows(scalars, tape)
    coef = mlp_forward(params["theta_k"], mlp_forward(params["phi_k"], feats, tape), tape)
    c1, c2, c3 = _cols(coef, _SEL3, tape)
    total = None
    for i, (v_par, v_perp, spin) in enumerate(blocks):
        rows = np.arange(i * b * z, (i + 1) * b * z)
        m = T.add(
            T.add(
                T.col_scale(T.gather_rows(c1, rows, tape), v_par, tape),
                T.col_scale(T.gather_rows(c2, rows, tape), v_perp, tape),
                tape,
            ),
            T.col_scale(T.gather_rows(c3, rows, tape), spin, tape),
            tape,
        )
        total = m if total is None else T.add(total, m, tape)
    return total


def _trapezoid(x, v_old, v_new, dt, tape):
    return T.add(x, T.scale(T.add(v_old, v_new, tape), 0.5 * dt, tape), tape)


def forward_step(
    state: BatchState,
    params: dict,
    inputs: ModelInputs,
    config: ModelConfig,
    stats: NormalizationStats,
    geometry_radii: tuple[float, float],
    tape=None,
    detach_between_passes: bool = False,
) -> StepOutput:
    """Advance the batch by m_passes sub-steps of dt_sub.

    geometry_radii: (inner, outer) raceway radii for the contact-radius
    feature. detach_between_passes cuts gradient flow at pass boundaries
    (ablation switch); the default trains through the whole unroll.
    """
    b, z = state.n_samples, state.n_rollers
    if inputs.omega.shape[0] != b:
        raise ValueError("inputs batch size does not match state")
    seg = np.repeat(np.arange(b), z)
    dt = config.dt_sub

    x_re, x_ir, x_or = state.x_re, state.x_ir, state.x_or
    v_ir, v_or = state.v_ir, state.v_or
    v_re = np.zeros((b * z, 2))  # roller velocities are not observable
    initial = None
    final = None

    for p in range(config.m_passes):
        cur = BatchState(b, z, x_re, v_re, x_ir, v_ir, x_or, v_or)
        dyn = _dynamics_layer(
            cur, v_re, params, inputs, config, stats, geometry_radii, seg, tape
        )
        if p == 0:
            initial = dyn
        if p == config.m_passes - 1:
            final = dyn

        v_ir_new = T.add(v_ir, T.scale(dyn["acc_ir_phys"], dt, tape), tape)
        v_or_new = T.add(v_or, T.scale(dyn["acc_or_phys"], dt, tape), tape)
        v_re_new = _kinematics_layer(
            cur, v_ir_new, v_or_new, params, inputs, stats, seg, tape
        )

        x_re = _trapezoid(x_re, v_re, v_re_new, dt, tape)
        x_ir = _trapezoid(x_ir, v_ir, v_ir_new, dt, tape)
        x_or = _trapezoid(x_or, v_or, v_or_new, dt, tape)
        v_re, v_ir, v_or = v_re_new, v_ir_new, v_or_new

        if detach_between_passes and tape is not None and p < config.m_passes - 1:
            x_re, x_ir, x_or, v_re, v_ir, v_or = (
                val.data if isinstance(val, T.Value) else val
                for val in (x_re, x_ir, x_or, v_re, v_ir, v_or)
            )

    out_state = BatchState(b, z, x_re, v_re, x_ir, v_ir, x_or, v_or)
    keep = ("f_k1", "f_k2", "f_k3", "acc_ir", "acc_or")
    return StepOutput(
        initial={k: initial[k] for k in keep},
        final={k: final[k] for k in keep},
        state=out_state,
    )


def canonical_forces(outputs: dict, stats: NormalizationStats, b: int, z: int) -> np.ndarray:
    """Assemble physical pairwise forces in canonical edge order, (B, E, 2)."""
    f_scale = stats.vector_maxima["force.global"]
    d = lambda v: (v.data if isinstance(v, T.Value) else v) * f_scale
    f_k1 = d(outputs["f_k1"])
    f_ir = f_k1[: b * z].reshape(b, z, 2)
    f_or = f_k1[b * z:].reshape(b, z, 2)
    f_k2 = d(outputs["f_k2"])[:, None, :]
    f_k3 = d(outputs["f_k3"])[:, None, :]
    return np.concatenate([f_ir, f_or, -f_ir, -f_or, f_k2, f_k3], axis=1)


def ring_accelerations(outputs: dict, stats: NormalizationStats) -> np.ndarray:
    """Physical (B, 2, 2) ring accelerations, rows (inner, outer)."""
    a_scale = stats.vector_maxima["acc.ring"]
    d = lambda v: (v.data if isinstance(v, T.Value) else v) * a_scale
    return np.stack([d(outputs["acc_ir"]), d(outputs["acc_or"])], axis=1)
