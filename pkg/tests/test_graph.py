"""Graph construction and normalization statistics tests."""
import numpy as np
import pytest

from bearnet.graph import (
    EDGE_CONTACT,
    EDGE_GND_IR,
    EDGE_GND_OR,
    NODE_GROUND,
    NODE_INNER,
    NODE_OUTER,
    NODE_ROLLER,
    DegenerateStatisticError,
    NormalizationStats,
    apply_minmax,
    build_graph,
    edge_force_targets,
    effective_radius,
    fit_normalization,
    ring_acc_targets,
)
from bearnet.sim import default_geometry, initial_state, simulate


def rotate(arr, alpha):
    c, s = np.cos(alpha), np.sin(alpha)
    rot = np.array([[c, -s], [s, c]])
    return arr @ rot.T


@pytest.fixture()
def sample_state(short_record):
    return short_record.state_at(10)


def test_counts_and_topology(sample_state):
    g = default_geometry()
    graph = build_graph(sample_state, g)
    z = 13
    assert graph.n_nodes == 16
    assert graph.n_edges == 54
    assert graph.x.shape == (16, 2)
    assert graph.dx.shape == (54, 2)
    assert np.array_equal(np.sort(np.unique(graph.node_type)), [0, 1, 2, 3])
    assert (graph.node_type[:z] == NODE_ROLLER).all()
    assert graph.node_type[z] == NODE_INNER
    assert graph.node_type[z + 1] == NODE_OUTER
    assert graph.node_type[z + 2] == NODE_GROUND
    # every contact edge joins a roller and a ring
    contact = graph.edge_kind == EDGE_CONTACT
    assert contact.sum() == 4 * z
    ends = np.stack([graph.senders[contact], graph.receivers[contact]])
    roller_end = (ends < z).sum(axis=0)
    assert (roller_end == 1).all()
    assert graph.edge_kind[4 * z] == EDGE_GND_IR
    assert graph.edge_kind[4 * z + 1] == EDGE_GND_OR
    assert graph.senders[4 * z] == z + 2 and graph.receivers[4 * z] == z
    assert graph.senders[4 * z + 1] == z + 2 and graph.receivers[4 * z + 1] == z + 1


def test_reversed_edges_are_exact_negations(sample_state):
    graph = build_graph(sample_state, default_geometry())
    z = 13
    assert np.array_equal(graph.dx[2 * z:4 * z], -graph.dx[:2 * z])
    assert np.array_equal(graph.dv[2 * z:4 * z], -graph.dv[:2 * z])
    # and the reversed topology really is the swap of the forward block
    assert np.array_equal(graph.senders[2 * z:4 * z], graph.receivers[:2 * z])
    assert np.array_equal(graph.receivers[2 * z:4 * z], graph.senders[:2 * z])


def test_effective_radius_concentric():
    g = default_geometry()
    from conftest import make_quiet_condition

    s = initial_state(g, make_quiet_condition(load=(0.0, 1.0)))
    r = effective_radius(s.x_re, s.x_ir, s.x_or, g.r_ir, g.r_or)
    expected = g.r_roller + 0.5 * g.clearance
    assert np.allclose(r, expected, rtol=1e-12)


def test_effective_radius_displaced_ring():
    g = default_geometry()
    x_re = np.array([[0.0325, 0.0]])
    shift = 4e-6
    x_ir = np.array([shift, 0.0])
    x_or = np.array([0.0, 0.0])
    r = effective_radius(x_re, x_ir, x_or, g.r_ir, g.r_or)
    r_i = (0.0325 - shift) - g.r_ir
    r_ii = g.r_or - 0.0325
    assert r[0] == pytest.approx(0.5 * (r_i + r_ii), rel=1e-14)


def test_contact_dx_magnitude_is_effective_radius(sample_state):
    g = default_geometry()
    graph = build_graph(sample_state, g)
    r = effective_radius(sample_state.x_re, sample_state.x_ir, sample_state.x_or, g.r_ir, g.r_or)
    z = 13
    assert np.allclose(np.linalg.norm(graph.dx[:z], axis=1), r, rtol=1e-13)
    assert np.allclose(np.linalg.norm(graph.dx[z:2 * z], axis=1), r, rtol=1e-13)


def test_roller_velocity_zeroing(sample_state):
    g = default_geometry()
    z = 13
    deployed = build_graph(sample_state, g, zero_roller_velocity=True)
    oracle = build_graph(sample_state, g, zero_roller_velocity=False)
    assert np.array_equal(deployed.v[:z], np.zeros((z, 2)))
    assert np.array_equal(oracle.v[:z], sample_state.v_re)
    # ring rows and mount features unaffected
    assert np.array_equal(deployed.v[z:], oracle.v[z:])
    assert np.array_equal(deployed.dx, oracle.dx)
    # contact dv differs exactly by the roller velocity
    assert np.allclose(oracle.dv[:z] + sample_state.v_re, deployed.dv[:z], atol=0)


def test_mount_edge_features(sample_state):
    graph = build_graph(sample_state, default_geometry())
    assert np.array_equal(graph.dx[52], sample_state.x_ir)
    assert np.array_equal(graph.dx[53], sample_state.x_or)
    assert np.array_equal(graph.dv[52], sample_state.v_ir)
    assert np.array_equal(graph.dv[53], sample_state.v_or)


def test_rotation_covariance_of_features(sample_state):
    g = default_geometry()
    alpha = 0.9
    base = build_graph(sample_state, g, zero_roller_velocity=False)
    rot_state = sample_state.copy()
    rot_state.x_re = rotate(rot_state.x_re, alpha)
    rot_state.v_re = rotate(rot_state.v_re, alpha)
    rot_state.x_ir = rotate(rot_state.x_ir[None], alpha)[0]
    rot_state.v_ir = rotate(rot_state.v_ir[None], alpha)[0]
    rot_state.x_or = rotate(rot_state.x_or[None], alpha)[0]
    rot_state.v_or = rotate(rot_state.v_or[None], alpha)[0]
    rot = build_graph(rot_state, g, zero_roller_velocity=False)
    assert np.allclose(rot.dx, rotate(base.dx, alpha), atol=1e-16)
    assert np.allclose(rot.dv, rotate(base.dv, alpha), atol=1e-16)
    # scalar features are invariant to much tighter tolerance
    assert np.allclose(
        np.linalg.norm(rot.dx, axis=1), np.linalg.norm(base.dx, axis=1), rtol=1e-12
    )


def test_translation_invariance_with_ground(sample_state):
    g = default_geometry()
    t = np.array([0.57, -1.31])
    base = build_graph(sample_state, g)
    moved = sample_state.copy()
    moved.x_re = moved.x_re + t
    moved.x_ir = moved.x_ir + t
    moved.x_or = moved.x_or + t
    shifted = build_graph(moved, g, ground_position=t)
    assert np.allclose(shifted.dx, base.dx, atol=1e-12)
    assert np.array_equal(shifted.dv, base.dv)


def test_edge_force_targets_layout(short_record):
    i = 7
    targets = edge_force_targets(short_record, i)
    z = 13
    a = short_record.arrays
    assert targets.shape == (54, 2)
    assert np.array_equal(targets[:z], a["f_on_ir_from_re"][i])
    assert np.array_equal(targets[2 * z:3 * z], -a["f_on_ir_from_re"][i])
    assert np.array_equal(targets[52], a["f_gnd_ir"][i])
    assert np.array_equal(targets[53], a["f_gnd_or"][i])
    accs = ring_acc_targets(short_record, i)
    assert np.array_equal(accs[0], a["acc_ir"][i])
    assert np.array_equal(accs[1], a["acc_or"][i])


def test_fit_normalization_ranges(short_record, short_stats):
    s = short_stats
    g = short_record.geometry
    lo, hi = s.scalar_ranges["dyn.k1.dx"]
    assert g.r_roller - g.clearance < lo < hi < g.r_roller + g.clearance
    assert s.vector_maxima["force.k3"] > s.vector_maxima["force.k1"]
    assert s.vector_maxima["force.global"] == s.vector_maxima["force.k3"]
    assert s.vector_maxima["node.x"] == pytest.approx(g.pitch_radius, rel=1e-2)
    assert s.scalar_ranges["kin.womega"][0] == 0.0  # outer ring does not spin
    assert s.scalar_ranges["kin.womega"][1] > 0.0
    assert s.vector_maxima["acc.ring"] > 0.0


def test_fit_normalization_rejects_degenerate():
    from conftest import make_quiet_condition

    g = default_geometry(n_rollers=5)
    rec = simulate(g, make_quiet_condition(rpm=0.0, load=(0.0, 0.0), n_sub=4), n_steps=3)
    with pytest.raises(DegenerateStatisticError):
        fit_normalization([rec])


def test_fit_normalization_requires_data():
    with pytest.raises(ValueError):
        fit_normalization([])


def test_apply_minmax_endpoints():
    vals = np.array([2.0, 4.0, 6.0])
    out = apply_minmax(vals, (2.0, 6.0))
    assert np.allclose(out, [0.0, 0.5, 1.0], atol=1e-16)


def test_stats_round_trip(short_stats):
    d = short_stats.to_dict()
    back = NormalizationStats.from_dict(d)
    assert back.scalar_ranges == short_stats.scalar_ranges
    assert back.vector_maxima == short_stats.vector_maxima
