"""Static load distribution across rollers for a radially loaded bearing.

Solves the classical problem: given the net contact force transmitted to the
inner ring, find the ring displacement along the load line and the resulting
per-roller contact forces. Exact contact geometry is used throughout (no
small-displacement linearization): for a trial ring displacement each roller's
radial position is solved for force balance between its two raceway contacts,
and a safeguarded damped Newton iteration drives the net transmitted force to
the requested value.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import BearingGeometry, ContactLaw, contact_force

__all__ = ["StaticSolution", "static_load_distribution"]


@dataclass(frozen=True)
class StaticSolution:
    """Equilibrium of the statically loaded bearing.

    forces: per-roller contact force magnitude (equal at both raceways).
    rho: per-roller centre radius from the outer-ring centre.
    azimuths: roller azimuths (rad).
    displacement: inner-ring displacement magnitude along the load line.
    residual: |net transmitted force - requested load| in newtons.
    """

    forces: np.ndarray
    rho: np.ndarray
    azimuths: np.ndarray
    displacement: float
    load: np.ndarray
    residual: float


def _roller_equilibrium(
    rho: np.ndarray,
    u: np.ndarray,
    x_ir: np.ndarray,
    geometry: BearingGeometry,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For fixed ring centres, place each roller where its two raceway gaps
    are equal (the force-balance point for identical contact laws).

    Returns (rho, interference, u_ir) where interference is the common contact
    interference (<= 0 means the roller floats force-free).
    """
    # g(rho) = delta_I(rho) - delta_O(rho) is strictly decreasing; Newton from
    # the pitch position converges in a handful of iterations.
    for _ in range(60):
        centre = rho[:, None] * u
        d_ir_vec = centre - x_ir[None, :]
        d_ir = np.sqrt((d_ir_vec**2).sum(axis=1))
        delta_i = (geometry.r_ir + geometry.r_roller) - d_ir
        delta_o = rho - (geometry.r_or - geometry.r_roller)
        g = delta_i - delta_o
        # d(d_ir)/d(rho) = (rho - x_ir . u)/d_ir
        dg = -(rho - (x_ir[None, :] * u).sum(axis=1)) / d_ir - 1.0
        stepv = g / dg
        rho = rho - stepv
        if np.max(np.abs(stepv)) < 1e-15 * geometry.pitch_radius:
            break
    centre = rho[:, None] * u
    d_ir_vec = centre - x_ir[None, :]
    d_ir = np.sqrt((d_ir_vec**2).sum(axis=1))
    u_ir = d_ir_vec / d_ir[:, None]
    delta_i = (geometry.r_ir + geometry.r_roller) - d_ir
    return rho, delta_i, u_ir


def _transmitted(
    e: float,
    u_load: np.ndarray,
    u: np.ndarray,
    geometry: BearingGeometry,
    law: ContactLaw,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Net contact-force magnitude delivered to the inner ring along the load
    direction when the ring is displaced by e opposite the load."""
    x_ir = -e * u_load
    rho = np.full(u.shape[0], geometry.pitch_radius)
    rho, delta, u_ir = _roller_equilibrium(rho, u, x_ir, geometry)
    forces = contact_force(delta, np.zeros_like(delta), law)
    net = -(forces[:, None] * u_ir).sum(axis=0)
    return float(net @ u_load), forces, rho


def static_load_distribution(
    geometry: BearingGeometry,
    load,
    law: ContactLaw | None = None,
    phase: float = 0.0,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> StaticSolution:
    """Distribute a radial load across the rollers at static equilibrium.

    load: net contact force (2-vector, N) delivered to the inner ring; the
    loaded zone sits opposite this direction (the ring is pushed toward the
    rollers that carry it).
    phase: azimuth of roller 0 (rad).
    tol: relative force-balance tolerance (residual < tol * |load|).
    """
    law = law or ContactLaw()
    load = np.asarray(load, dtype=np.float64)
    w = float(np.sqrt((load**2).sum()))
    z = geometry.n_rollers
    psi = phase + 2.0 * np.pi * np.arange(z) / z
    u = np.stack([np.cos(psi), np.sin(psi)], axis=1)

    if w == 0.0:
        rho = np.full(z, geometry.pitch_radius)
        return StaticSolution(
            forces=np.zeros(z), rho=rho, azimuths=psi,
            displacement=0.0, load=load, residual=0.0,
        )
    u_load = load / w

    # Bracket: no force until the clearance closes; expand until we exceed w.
    e_lo = 0.5 * geometry.clearance
    e_hi = geometry.clearance + 1e-7
    f_hi, _, _ = _transmitted(e_hi, u_load, u, geometry, law)
    grow = 0
    while f_hi < w:
        e_hi = geometry.clearance + 2.0 * (e_hi - geometry.clearance)
        f_hi, _, _ = _transmitted(e_hi, u_load, u, geometry, law)
        grow += 1
        if grow > 200:
            raise RuntimeError("failed to bracket the static equilibrium")

    e = e_hi
    f_e = f_hi
    for _ in range(max_iter):
        if abs(f_e - w) <= tol * w:
            break
        h = max(1e-8 * (e - geometry.clearance), 1e-14)
        f_p, _, _ = _transmitted(e + h, u_load, u, geometry, law)
        df = (f_p - f_e) / h
        if df <= 0:
            e_new = 0.5 * (e_lo + e_hi)
        else:
            e_new = e - (f_e - w) / df
            if not e_lo < e_new < e_hi:
                e_new = 0.5 * (e_lo + e_hi)
        f_new, _, _ = _transmitted(e_new, u_load, u, geometry, law)
        if f_new < w:
            e_lo = e_new
        else:
            e_hi = e_new
        e, f_e = e_new, f_new
    else:
        raise RuntimeError(
            f"static solve did not converge: residual {abs(f_e - w):.3e} N"
        )

    f_final, forces, rho = _transmitted(e, u_load, u, geometry, law)
    return StaticSolution(
        forces=forces,
        rho=rho,
        azimuths=psi,
        displacement=float(e),
        load=load,
        residual=abs(f_final - w),
    )
