"""Static load-distribution solver tests against classical results."""
import numpy as np
import pytest

from bearnet.sim import BearingGeometry, ContactLaw, default_geometry
from bearnet.statics import static_load_distribution


def zero_clearance_geometry(n_rollers: int) -> BearingGeometry:
    g = default_geometry(n_rollers)
    return BearingGeometry(
        n_rollers=n_rollers,
        r_ir=g.r_ir,
        r_or=g.r_ir + 2 * g.r_roller,
        r_roller=g.r_roller,
        clearance=0.0,
        m_ir=g.m_ir,
        m_or=g.m_or,
        m_roller=g.m_roller,
    )


def test_force_balance_residual():
    sol = static_load_distribution(
        default_geometry(), load=(0.0, 120.0), phase=-np.pi / 2
    )
    assert sol.residual < 1e-9 * 120.0
    assert sol.forces.min() >= 0.0


def test_roller_opposite_load_carries_max():
    g = zero_clearance_geometry(13)
    sol = static_load_distribution(g, load=(0.0, 75.0), phase=-np.pi / 2)
    # load transmitted to the ring along +y -> ring displaced toward -y,
    # so roller 0 (at -pi/2) is the most heavily loaded
    assert sol.forces.argmax() == 0
    assert sol.forces[0] > 0


def test_classical_twelve_roller_distribution():
    """Zero clearance, linear law: discrete max ~= 4.08 * F/Z within 3%."""
    g = zero_clearance_geometry(12)
    law = ContactLaw(k_c=1e8, p=1.0, c_c=0.0)
    w = 200.0
    sol = static_load_distribution(g, load=(0.0, w), law=law, phase=-np.pi / 2)
    classical = 4.08 * w / 12
    assert sol.forces.max() == pytest.approx(classical, rel=0.03)
    # exactly the rollers in the half-space opposite the load carry force
    carrying = sol.forces > 1e-9 * sol.forces.max()
    assert carrying.sum() == 5  # 0, +-30, +-60 degrees from the load line


def test_linear_law_force_doubles_with_load():
    g = zero_clearance_geometry(13)
    law = ContactLaw(k_c=1e8, p=1.0, c_c=0.0)
    s1 = static_load_distribution(g, load=(0.0, 90.0), law=law, phase=-np.pi / 2)
    s2 = static_load_distribution(g, load=(0.0, 180.0), law=law, phase=-np.pi / 2)
    loaded = s1.forces > 1e-6 * s1.forces.max()
    # exact contact geometry is linear only to O(displacement/pitch radius)
    assert np.allclose(s2.forces[loaded], 2.0 * s1.forces[loaded], rtol=5e-4)
    assert s2.displacement == pytest.approx(2.0 * s1.displacement, rel=5e-4)


def test_symmetry_about_load_line():
    sol = static_load_distribution(
        default_geometry(13), load=(0.0, 150.0), phase=-np.pi / 2
    )
    z = 13
    for j in range(1, z // 2 + 1):
        assert sol.forces[j] == pytest.approx(sol.forces[z - j], rel=1e-9, abs=1e-12)


def test_rotated_problem_gives_same_magnitudes():
    g = default_geometry(13)
    alpha = 1.1
    base = static_load_distribution(g, load=(0.0, 150.0), phase=-np.pi / 2)
    w = 150.0 * np.array([-np.sin(alpha), np.cos(alpha)])
    rot = static_load_distribution(g, load=w, phase=-np.pi / 2 + alpha)
    assert np.allclose(rot.forces, base.forces, rtol=1e-9, atol=1e-9)
    assert rot.displacement == pytest.approx(base.displacement, rel=1e-9)


def test_zero_load_solution():
    sol = static_load_distribution(default_geometry(), load=(0.0, 0.0))
    assert np.array_equal(sol.forces, np.zeros(13))
    assert sol.displacement == 0.0


def test_displacement_exceeds_clearance_when_loaded():
    g = default_geometry()
    sol = static_load_distribution(g, load=(0.0, 30.0), phase=-np.pi / 2)
    assert sol.displacement > g.clearance


def test_matches_settled_simulation(settled_sim):
    """The damped simulator relaxes to the static solution (2% window)."""
    from bearnet.sim import force_table

    g, cond, s, w = settled_sim
    tab = force_table(s, w, g, cond)
    transmitted = tab["f_on_ir_from_re"].sum(axis=0)
    sol = static_load_distribution(g, load=transmitted, phase=-np.pi / 2, law=cond.law)
    sim_forces = np.sqrt((tab["f_on_or_from_re"] ** 2).sum(axis=1))
    assert sol.forces.max() == pytest.approx(sim_forces.max(), rel=0.02)
    e_sim = np.sqrt(((s.x_ir - s.x_or) ** 2).sum())
    assert sol.displacement == pytest.approx(e_sim, rel=0.02)
