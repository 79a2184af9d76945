"""Shared fixtures: expensive simulator runs are computed once per session."""
import numpy as np
import pytest

from bearnet.sim import (
    GroundMount,
    LoadSchedule,
    OperatingCondition,
    default_geometry,
    initial_state,
    step,
)


def make_quiet_condition(rpm=0.0, load=(0.0, 13e3), n_sub=64, zeta=0.2, **kw):
    """Heavily damped mounts so static tests settle quickly."""
    return OperatingCondition(
        rpm=rpm,
        load=LoadSchedule(
            base_load=load, double_at_step=10**8, halve_at_step=2 * 10**8
        ),
        mounts=GroundMount(zeta=zeta),
        n_sub=n_sub,
        **kw,
    )


def settle(load=(0.0, 13e3), rpm=0.0, phase=-np.pi / 2, n_settle=600):
    """Run the simulator to (quasi-)static equilibrium under a constant load."""
    g = default_geometry()
    cond = make_quiet_condition(rpm=rpm, load=load)
    s = initial_state(g, cond, phase=phase)
    w = np.asarray(load, dtype=float)
    for _ in range(n_settle):
        s = step(s, w, g, cond)
    return g, cond, s, w


@pytest.fixture(scope="session")
def settled_sim():
    """Simulator settled under a 13 kN vertical load, roller 0 at -pi/2."""
    return settle()


@pytest.fixture(scope="session")
def short_record():
    """A short loaded, rotating trajectory for fitting feature statistics."""
    from bearnet.sim import simulate

    g = default_geometry()
    cond = make_quiet_condition(rpm=375.0, load=(0.0, 5e3), n_sub=32, zeta=0.05)
    return simulate(g, cond, n_steps=60, warmup=150, phase=-np.pi / 2)


@pytest.fixture(scope="session")
def short_stats(short_record):
    from bearnet.graph import fit_normalization

    return fit_normalization([short_record])
