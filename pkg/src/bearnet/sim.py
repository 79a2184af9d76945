"""Reference 2D lumped-parameter cylindrical-roller-bearing simulator.

The ground-truth oracle: both rings translate with two degrees of freedom on
ground springs, the inner ring spins at the prescribed shaft speed, rollers
ride at the kinematic cage speed with a dynamic radial degree of freedom, and
raceway contacts follow a Hertzian-style load-deflection law with gated
viscous damping. Semi-implicit Euler with internal substepping keeps the stiff
contacts stable at the recording time step.

Conventions: the bearing is centred on the origin; roller azimuths are
prescribed about the origin at cage speed; the applied load acts on the outer
ring; recorded forces are the forces exerted ON the rings (roller-side
reactions are the exact negations).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "BearingGeometry",
    "ContactLaw",
    "GroundMount",
    "LoadSchedule",
    "OperatingCondition",
    "SimulationError",
    "SystemState",
    "TrajectoryRecord",
    "contact_force",
    "default_geometry",
    "force_table",
    "initial_state",
    "mechanical_energy",
    "simulate",
    "step",
]


class SimulationError(Exception):
    """Unstable integration or invalid simulator state."""


@dataclass(frozen=True)
class BearingGeometry:
    """Nominal bearing dimensions and masses (SI units)."""

    n_rollers: int
    r_ir: float
    r_or: float
    r_roller: float
    clearance: float
    m_ir: float
    m_or: float
    m_roller: float

    def __post_init__(self):
        if self.n_rollers < 3:
            raise ValueError("need at least 3 rollers")
        gap = self.r_or - self.r_ir - 2.0 * self.r_roller
        if abs(gap - self.clearance) > 1e-12:
            raise ValueError(
                f"r_or - r_ir - 2*r_roller = {gap:.3e} != clearance {self.clearance:.3e}"
            )
        if self.clearance < 0:
            raise ValueError("clearance must be >= 0")
        if min(self.m_ir, self.m_or, self.m_roller) <= 0:
            raise ValueError("masses must be positive")

    @property
    def pitch_radius(self) -> float:
        return 0.5 * (self.r_ir + self.r_or)

    def cage_ratio(self) -> float:
        """omega_cage / omega_shaft for a stationary outer ring."""
        return self.r_ir / (self.r_ir + self.r_or)


def default_geometry(n_rollers: int = 13) -> BearingGeometry:
    return BearingGeometry(
        n_rollers=n_rollers,
        r_ir=0.0269,
        r_or=0.0381,
        r_roller=0.00559,
        clearance=2e-5,
        m_ir=0.15,
        m_or=0.25,
        m_roller=0.010,
    )


@dataclass(frozen=True)
class ContactLaw:
    """Load-deflection law F = k_c * delta^p plus contact-gated damping."""

    k_c: float = 1e9
    p: float = 10.0 / 9.0
    c_c: float = 200.0


@dataclass(frozen=True)
class GroundMount:
    """Ring-to-ground springs with damping as a fraction of critical."""

    k_ir: float = 5e6
    k_or: float = 5e8
    zeta: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError("zeta must lie in [0, 1]")

    def damping(self, geometry: BearingGeometry) -> tuple[float, float]:
        c_ir = 2.0 * self.zeta * np.sqrt(self.k_ir * geometry.m_ir)
        c_or = 2.0 * self.zeta * np.sqrt(self.k_or * geometry.m_or)
        return c_ir, c_or


@dataclass(frozen=True)
class LoadSchedule:
    """Step-load profile applied at the outer ring, indexed by recorded step."""

    base_load: tuple[float, float]
    double_at_step: int = 2500
    halve_at_step: int = 5000

    def __post_init__(self):
        if not 0 < self.double_at_step < self.halve_at_step:
            raise ValueError("need 0 < double_at_step < halve_at_step")

    def load_at(self, step_index: int) -> np.ndarray:
        base = np.asarray(self.base_load, dtype=np.float64)
        if step_index >= self.halve_at_step:
            return base
        if step_index >= self.double_at_step:
            return 2.0 * base
        return base


@dataclass(frozen=True)
class OperatingCondition:
    """One operating point: shaft speed, load profile, recording step, and the
    simulator's physical setup."""

    rpm: float
    load: LoadSchedule
    dt: float = 6.667e-5
    law: ContactLaw = field(default_factory=ContactLaw)
    mounts: GroundMount = field(default_factory=GroundMount)
    n_sub: int = 128

    @property
    def omega(self) -> float:
        return self.rpm * 2.0 * np.pi / 60.0


@dataclass
class SystemState:
    """Positions/velocities of rings and rollers plus angles at one instant."""

    t: float
    x_ir: np.ndarray
    v_ir: np.ndarray
    x_or: np.ndarray
    v_or: np.ndarray
    x_re: np.ndarray
    v_re: np.ndarray
    shaft_angle: float = 0.0
    cage_angle: float = 0.0

    def copy(self) -> "SystemState":
        return SystemState(
            t=self.t,
            x_ir=self.x_ir.copy(),
            v_ir=self.v_ir.copy(),
            x_or=self.x_or.copy(),
            v_or=self.v_or.copy(),
            x_re=self.x_re.copy(),
            v_re=self.v_re.copy(),
            shaft_angle=self.shaft_angle,
            cage_angle=self.cage_angle,
        )

    @property
    def n_rollers(self) -> int:
        return self.x_re.shape[0]


def initial_state(
    geometry: BearingGeometry, condition: OperatingCondition, phase: float = 0.0
) -> SystemState:
    """Concentric rest state with rollers on the pitch circle at cage speed."""
    z = geometry.n_rollers
    psi = phase + 2.0 * np.pi * np.arange(z) / z
    u = np.stack([np.cos(psi), np.sin(psi)], axis=1)
    up = np.stack([-np.sin(psi), np.cos(psi)], axis=1)
    rp = geometry.pitch_radius
    omega_c = condition.omega * geometry.cage_ratio()
    return SystemState(
        t=0.0,
        x_ir=np.zeros(2),
        v_ir=np.zeros(2),
        x_or=np.zeros(2),
        v_or=np.zeros(2),
        x_re=rp * u,
        v_re=rp * omega_c * up,
        shaft_angle=0.0,
        cage_angle=0.0,
    )


def contact_force(interference, rate, law: ContactLaw):
    """Normal contact force: zero when separated, k*delta^p plus gated
    damping otherwise, clamped at zero so damping never produces adhesion."""
    delta = np.asarray(interference, dtype=np.float64)
    rate = np.asarray(rate, dtype=np.float64)
    engaged = delta > 0.0
    elastic = law.k_c * np.power(np.where(engaged, delta, 0.0), law.p)
    total = np.where(engaged, np.maximum(elastic + law.c_c * rate, 0.0), 0.0)
    if total.ndim == 0:
        return float(total)
    return total


def _body_forces(
    geometry: BearingGeometry,
    law: ContactLaw,
    mounts: GroundMount,
    x_ir: np.ndarray,
    v_ir: np.ndarray,
    x_or: np.ndarray,
    v_or: np.ndarray,
    x_re: np.ndarray,
    v_re: np.ndarray,
    load: np.ndarray,
) -> dict:
    """Contact, mount, and net forces plus accelerations at one instant."""
    d_ir_vec = x_re - x_ir[None, :]
    d_ir = np.sqrt((d_ir_vec * d_ir_vec).sum(axis=1))
    u_ir = d_ir_vec / d_ir[:, None]
    delta_ir = (geometry.r_ir + geometry.r_roller) - d_ir
    rate_ir = -(u_ir * (v_re - v_ir[None, :])).sum(axis=1)
    f_i = contact_force(delta_ir, rate_ir, law)

    d_or_vec = x_re - x_or[None, :]
    d_or = np.sqrt((d_or_vec * d_or_vec).sum(axis=1))
    u_or = d_or_vec / d_or[:, None]
    delta_or = d_or - (geometry.r_or - geometry.r_roller)
    rate_or = (u_or * (v_re - v_or[None, :])).sum(axis=1)
    f_o = contact_force(delta_or, rate_or, law)

    f_on_ir = -f_i[:, None] * u_ir
    f_on_or = f_o[:, None] * u_or
    f_on_re = f_i[:, None] * u_ir - f_o[:, None] * u_or

    c_ir, c_or = mounts.damping(geometry)
    f_gnd_ir = -mounts.k_ir * x_ir - c_ir * v_ir
    f_gnd_or = -mounts.k_or * x_or - c_or * v_or

    a_ir = (f_on_ir.sum(axis=0) + f_gnd_ir) / geometry.m_ir
    a_or = (f_on_or.sum(axis=0) + f_gnd_or + load) / geometry.m_or
    return {
        "f_on_ir_from_re": f_on_ir,
        "f_on_or_from_re": f_on_or,
        "f_on_re_from_ir": f_i[:, None] * u_ir,
        "f_on_re_from_or": -f_o[:, None] * u_or,
        "f_on_re": f_on_re,
        "f_gnd_ir": f_gnd_ir,
        "f_gnd_or": f_gnd_or,
        "acc_ir": a_ir,
        "acc_or": a_or,
        "applied_load": load,
    }


def force_table(
    state: SystemState,
    load: np.ndarray,
    geometry: BearingGeometry,
    condition: OperatingCondition,
) -> dict:
    """Force table + accelerations at the state's instant.

    Ring accelerations satisfy f = m*a against the listed forces exactly;
    roller accelerations are the Cartesian accelerations of the cage-
    constrained radial dynamics.
    """
    omega_c = condition.omega * geometry.cage_ratio()
    tab = _body_forces(
        geometry,
        condition.law,
        condition.mounts,
        state.x_ir,
        state.v_ir,
        state.x_or,
        state.v_or,
        state.x_re,
        state.v_re,
        np.asarray(load, dtype=np.float64),
    )
    rho = np.sqrt((state.x_re**2).sum(axis=1))
    u = state.x_re / rho[:, None]
    up = np.stack([-u[:, 1], u[:, 0]], axis=1)
    rhodot = (state.v_re * u).sum(axis=1)
    f_rad = (tab["f_on_re"] * u).sum(axis=1)
    # radial EOM: rho_dd = f_r/m + rho*w^2; Cartesian acc = (rho_dd - rho*w^2)u
    # + 2*rhodot*w*u_perp (the cage constraint supplies the tangential force)
    tab["acc_re"] = (f_rad / geometry.m_roller)[:, None] * u + (
        2.0 * rhodot * omega_c
    )[:, None] * up
    return tab


def step(
    state: SystemState,
    load: np.ndarray,
    geometry: BearingGeometry,
    condition: OperatingCondition,
    n_sub: int | None = None,
) -> SystemState:
    """Advance one recording step of condition.dt with internal substepping.

    Semi-implicit Euler (velocities first) on ring translations and roller
    radial coordinates; roller azimuths and the shaft angle are prescribed.
    """
    if condition.dt <= 0:
        raise ValueError("dt must be positive")
    n_sub = condition.n_sub if n_sub is None else n_sub
    h = condition.dt / n_sub
    omega = condition.omega
    omega_c = omega * geometry.cage_ratio()
    load = np.asarray(load, dtype=np.float64)

    psi0 = np.arctan2(state.x_re[:, 1], state.x_re[:, 0])
    rho = np.sqrt((state.x_re**2).sum(axis=1))
    u0 = state.x_re / rho[:, None]
    rhodot = (state.v_re * u0).sum(axis=1)
    x_ir = state.x_ir.copy()
    v_ir = state.v_ir.copy()
    x_or = state.x_or.copy()
    v_or = state.v_or.copy()
    m_re = geometry.m_roller

    for i in range(n_sub):
        psi = psi0 + omega_c * (i * h)
        u = np.stack([np.cos(psi), np.sin(psi)], axis=1)
        up = np.stack([-u[:, 1], u[:, 0]], axis=1)
        x_re = rho[:, None] * u
        v_re = rhodot[:, None] * u + (rho * omega_c)[:, None] * up
        tab = _body_forces(
            geometry, condition.law, condition.mounts,
            x_ir, v_ir, x_or, v_or, x_re, v_re, load,
        )
        rho_dd = (tab["f_on_re"] * u).sum(axis=1) / m_re + rho * omega_c**2
        v_ir = v_ir + tab["acc_ir"] * h
        v_or = v_or + tab["acc_or"] * h
        rhodot = rhodot + rho_dd * h
        x_ir = x_ir + v_ir * h
        x_or = x_or + v_or * h
        rho = rho + rhodot * h

    lo = geometry.r_ir - 1e-4
    hi = geometry.r_or + 1e-4
    d_from_ir = np.sqrt(((rho[:, None] * _unit(psi0 + omega_c * condition.dt) - x_ir) ** 2).sum(axis=1))
    if np.any(d_from_ir < lo) or np.any(d_from_ir > hi) or not np.isfinite(rho).all():
        raise SimulationError(
            "roller escaped the raceway annulus; reduce dt or check parameters"
        )

    psi_end = psi0 + omega_c * condition.dt
    u = _unit(psi_end)
    up = np.stack([-u[:, 1], u[:, 0]], axis=1)
    return SystemState(
        t=state.t + condition.dt,
        x_ir=x_ir,
        v_ir=v_ir,
        x_or=x_or,
        v_or=v_or,
        x_re=rho[:, None] * u,
        v_re=rhodot[:, None] * u + (rho * omega_c)[:, None] * up,
        shaft_angle=state.shaft_angle + omega * condition.dt,
        cage_angle=state.cage_angle + omega_c * condition.dt,
    )


def _unit(psi: np.ndarray) -> np.ndarray:
    return np.stack([np.cos(psi), np.sin(psi)], axis=1)


@dataclass
class TrajectoryRecord:
    """Uniformly sampled states, pairwise forces, and ring accelerations."""

    geometry: BearingGeometry
    condition: OperatingCondition
    warmup: int
    filter_cutoff: float | None
    arrays: dict[str, np.ndarray]

    FORCE_CHANNELS = (
        "f_on_ir_from_re",
        "f_on_or_from_re",
        "f_gnd_ir",
        "f_gnd_or",
    )
    ACC_CHANNELS = ("acc_ir", "acc_or", "acc_re")

    @property
    def n_steps(self) -> int:
        return self.arrays["t"].shape[0]

    def state_at(self, i: int) -> SystemState:
        a = self.arrays
        return SystemState(
            t=float(a["t"][i]),
            x_ir=a["x_ir"][i].copy(),
            v_ir=a["v_ir"][i].copy(),
            x_or=a["x_or"][i].copy(),
            v_or=a["v_or"][i].copy(),
            x_re=a["x_re"][i].copy(),
            v_re=a["v_re"][i].copy(),
            shaft_angle=float(a["shaft_angle"][i]),
            cage_angle=float(a["cage_angle"][i]),
        )


_RECORD_CHANNELS = (
    "x_ir", "v_ir", "x_or", "v_or", "x_re", "v_re",
    "f_on_ir_from_re", "f_on_or_from_re", "f_gnd_ir", "f_gnd_or",
    "acc_ir", "acc_or", "acc_re", "applied_load",
)


def simulate(
    geometry: BearingGeometry,
    condition: OperatingCondition,
    n_steps: int,
    warmup: int = 0,
    filter_cutoff: float | None = None,
    phase: float = 0.0,
) -> TrajectoryRecord:
    """Run warmup then record n_steps states with their force tables.

    A few hundred warmup steps let the startup transient ring down before
    recording; the load schedule is indexed by recorded step (warmup sees the
    base load).

    The recorded force table at step k is evaluated on the recorded state, so
    f = m*a holds exactly per step (unless a low-pass filter is configured,
    which smooths force and acceleration channels identically).
    """
    z = geometry.n_rollers
    state = initial_state(geometry, condition, phase)
    state.t = -warmup * condition.dt
    for k in range(-warmup, 0):
        state = step(state, condition.load.load_at(k), geometry, condition)

    out: dict[str, np.ndarray] = {
        "t": np.empty(n_steps),
        "shaft_angle": np.empty(n_steps),
        "cage_angle": np.empty(n_steps),
        "x_ir": np.empty((n_steps, 2)),
        "v_ir": np.empty((n_steps, 2)),
        "x_or": np.empty((n_steps, 2)),
        "v_or": np.empty((n_steps, 2)),
        "x_re": np.empty((n_steps, z, 2)),
        "v_re": np.empty((n_steps, z, 2)),
        "f_on_ir_from_re": np.empty((n_steps, z, 2)),
        "f_on_or_from_re": np.empty((n_steps, z, 2)),
        "f_gnd_ir": np.empty((n_steps, 2)),
        "f_gnd_or": np.empty((n_steps, 2)),
        "acc_ir": np.empty((n_steps, 2)),
        "acc_or": np.empty((n_steps, 2)),
        "acc_re": np.empty((n_steps, z, 2)),
        "applied_load": np.empty((n_steps, 2)),
    }
    for k in range(n_steps):
        load = condition.load.load_at(k)
        tab = force_table(state, load, geometry, condition)
        out["t"][k] = state.t
        out["shaft_angle"][k] = state.shaft_angle
        out["cage_angle"][k] = state.cage_angle
        for name in ("x_ir", "v_ir", "x_or", "v_or", "x_re", "v_re"):
            out[name][k] = getattr(state, name)
        for name in (
            "f_on_ir_from_re", "f_on_or_from_re", "f_gnd_ir", "f_gnd_or",
            "acc_ir", "acc_or", "acc_re", "applied_load",
        ):
            out[name][k] = tab[name]
        if k + 1 < n_steps:
            state = step(state, load, geometry, condition)

    if filter_cutoff is not None and n_steps > 0:
        alpha = condition.dt / (1.0 / (2.0 * np.pi * filter_cutoff) + condition.dt)
        for name in TrajectoryRecord.FORCE_CHANNELS + TrajectoryRecord.ACC_CHANNELS:
            _lowpass_inplace(out[name], alpha)

    return TrajectoryRecord(
        geometry=geometry,
        condition=condition,
        warmup=warmup,
        filter_cutoff=filter_cutoff,
        arrays=out,
    )


def _lowpass_inplace(series: np.ndarray, alpha: float) -> None:
    for i in range(1, series.shape[0]):
        series[i] = series[i - 1] + alpha * (series[i] - series[i - 1])


def mechanical_energy(
    state: SystemState, geometry: BearingGeometry, mounts: GroundMount
) -> float:
    """Kinetic + mount spring energy (contact strain energy excluded; use for
    out-of-contact configurations)."""
    rho = np.sqrt((state.x_re**2).sum(axis=1))
    u = state.x_re / rho[:, None]
    rhodot = (state.v_re * u).sum(axis=1)
    ke = (
        0.5 * geometry.m_ir * (state.v_ir**2).sum()
        + 0.5 * geometry.m_or * (state.v_or**2).sum()
        + 0.5 * geometry.m_roller * (rhodot**2).sum()
    )
    pe = 0.5 * mounts.k_ir * (state.x_ir**2).sum() + 0.5 * mounts.k_or * (
        state.x_or**2
    ).sum()
    return float(ke + pe)
