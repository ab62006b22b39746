import math

import numpy as np
import pytest

import isaacs_vex as iv
from isaacs_vex.errors import DivergedField
from isaacs_vex.grids import Grids, SimplexGrid, SpaceGrid, TimeGrid

from conftest import small_game_doc


def test_terminal_slice_heat(heat_config, rule_1d):
    grids = iv.build_grids(heat_config)
    term = iv.terminal_slice(heat_config.game, grids)
    xs = grids.space.points[:, 0]
    e1, e2 = grids.simplex.vertex_indices
    np.testing.assert_allclose(term.values[:, e1], np.sin(xs), atol=1e-15)
    np.testing.assert_allclose(term.values[:, e2], np.sin(xs) + 1.0, atol=1e-15)
    # p = (1/2, 1/2) at x = 0: (c1 + c2) / 2 = 1/2
    x0 = int(np.argmin(np.abs(xs)))
    half = grids.simplex.n_nodes // 2
    assert term.values[x0, half] == pytest.approx(0.5, abs=1e-15)


def test_terminal_identical_scenarios():
    doc = small_game_doc(I=2, l=["0", "0"], g=["sin(x1)", "sin(x1)"], bounds={
        "b_inf": 0.0, "sigma_inf": 1.0, "sigma_inv_inf": 1.0,
        "l_inf": 0.0, "g_inf": 1.0, "lip_g": 1.0,
    })
    doc["discretization"]["simplex_m"] = 4
    cfg = iv.config_from_dict(doc)
    grids = iv.build_grids(cfg)
    term = iv.terminal_slice(cfg.game, grids)
    spread = np.max(term.values, axis=1) - np.min(term.values, axis=1)
    assert np.max(spread) <= 1e-15


def test_one_step_heat_matches_closed_form(heat_config, rule_1d):
    # a single smoothing step of the terminal slice against
    # e^{-tau/2} sin(x) + c, on a grid fine enough for 1e-6
    doc = heat_config.to_dict()
    doc["discretization"] = {"L": 100, "space_nodes": [6401], "simplex_m": 2}
    cfg = iv.config_from_dict(doc)
    grids = iv.build_grids(cfg)
    term = iv.terminal_slice(cfg.game, grids)
    stepped, _, _ = iv.backward_step(cfg.game, grids, rule_1d, term)
    tau = grids.time.tau
    damp = math.exp(-tau / 2.0)
    xs = grids.space.points[:, 0]
    e1, e2 = grids.simplex.vertex_indices
    mask = np.abs(xs) <= 2.0
    err1 = np.max(np.abs(stepped.values[mask, e1] - damp * np.sin(xs[mask])))
    err2 = np.max(np.abs(stepped.values[mask, e2] - (damp * np.sin(xs[mask]) + 1.0)))
    assert err1 <= 1e-6 and err2 <= 1e-6
    # at x = 0, p = e1 the value is c1 = 0 up to odd symmetry
    x0 = int(np.argmin(np.abs(xs)))
    assert abs(stepped.values[x0, e1]) <= 1e-12


def test_constant_field_is_fixed_point(pursuit_config, rule_1d):
    # l = 0 and a centered zbar make constants exact fixed points
    grids = iv.build_grids(pursuit_config)
    term = iv.terminal_slice(pursuit_config.game, grids)
    const = term.copy_with(k=grids.time.L, t=grids.time.T,
                           values=np.full_like(term.values, 3.25))
    stepped, _, _ = iv.backward_step(pursuit_config.game, grids, rule_1d, const)
    np.testing.assert_allclose(stepped.values, 3.25, rtol=1e-13)


def test_unit_cost_adds_tau(rule_1d):
    # l_i = 1 for all i, b = 0, field = 0: one step yields exactly tau * 1
    doc = small_game_doc(I=2, l=["1", "1"], g=["0", "0"], bounds={
        "b_inf": 0.0, "sigma_inf": 1.0, "sigma_inv_inf": 1.0,
        "l_inf": 1.0, "g_inf": 0.1, "lip_g": 1.0,
    })
    doc["discretization"]["simplex_m"] = 2
    cfg = iv.config_from_dict(doc)
    grids = iv.build_grids(cfg)
    term = iv.terminal_slice(cfg.game, grids)
    stepped, _, _ = iv.backward_step(cfg.game, grids, rule_1d, term)
    np.testing.assert_allclose(stepped.values, grids.time.tau, atol=1e-15)


def test_solve_zero_steps(heat_config, rule_1d):
    doc = heat_config.to_dict()
    doc["discretization"]["L"] = 0
    cfg = iv.config_from_dict(doc)
    grids = iv.build_grids(cfg)
    result = iv.solve(cfg.game, grids, rule_1d)
    assert len(result.fields) == 1
    term = iv.terminal_slice(cfg.game, grids)
    np.testing.assert_array_equal(result.fields[0].values, term.values)


def test_solve_deterministic_across_workers(reveal2_config, rule_1d):
    doc = reveal2_config.to_dict()
    doc["discretization"] = {"L": 6, "space_nodes": [61], "simplex_m": 8}
    cfg = iv.config_from_dict(doc)
    grids = iv.build_grids(cfg)
    r1 = iv.solve(cfg.game, grids, rule_1d, workers=1)
    r4 = iv.solve(cfg.game, grids, rule_1d, workers=4)
    for f1, f4 in zip(r1.fields, r4.fields):
        np.testing.assert_array_equal(f1.values, f4.values)
    for k in r1.splits:
        for e1, e4 in zip(r1.splits[k].envelopes, r4.splits[k].envelopes):
            assert tuple(s.support for s in e1.splits) == tuple(s.support for s in e4.splits)


def test_every_slice_convex(reveal2_solve):
    _, grids, result = reveal2_solve
    triples = np.array(grids.simplex.edge_triples())
    for field in result.fields:
        second = (
            field.values[:, triples[:, 0]]
            - 2.0 * field.values[:, triples[:, 1]]
            + field.values[:, triples[:, 2]]
        )
        assert second.min() >= -1e-10
    rng = np.random.default_rng(17)
    for field in result.fields[:: max(1, len(result.fields) // 6)]:
        for xi in rng.integers(0, grids.space.n_nodes, size=8):
            assert iv.is_discretely_convex(field.values[xi], grids.simplex)


def test_value_below_vertex_chord(reveal2_solve):
    # convexity in p puts every value below the chord through the vertices
    _, grids, result = reveal2_solve
    e_idx = list(grids.simplex.vertex_indices)
    P = grids.simplex.nodes
    for field in result.fields:
        chord = np.einsum("xi,pi->xp", field.values[:, e_idx], P)
        assert np.max(field.values - chord) <= 1e-10


def test_diverged_field_guard(pursuit_config, rule_1d):
    grids = iv.build_grids(pursuit_config)
    term = iv.terminal_slice(pursuit_config.game, grids)
    absurd = term.copy_with(k=grids.time.L, t=grids.time.T,
                            values=np.full_like(term.values, 1e9))
    with pytest.raises(DivergedField):
        iv.backward_step(pursuit_config.game, grids, rule_1d, absurd, value_bound=10.0)


def test_diagnostics_constant_fields(heat_config, rule_1d):
    grids = iv.build_grids(heat_config)
    term = iv.terminal_slice(heat_config.game, grids)
    fields = [
        term.copy_with(k=k, t=grids.time.nodes[k], values=np.full_like(term.values, 1.5))
        for k in range(3)
    ]
    rep = iv.diagnostics(fields)
    assert max(rep.lip_x) == 0.0
    assert max(rep.lip_p) == 0.0
    assert rep.holder_max_ratio == 0.0
    assert not rep.growth_flagged


def test_diagnostics_terminal_lipschitz(heat_solve):
    config, grids, result = heat_solve
    rep = result.report
    # |d sin/dx| <= 1: divided differences stay within 1 + h eps
    assert rep.lip_x[-1] <= 1.0 + 1e-9
    assert rep.holder_max_ratio <= 1.1 * (max(rep.lip_x) * 1.0 + 0.0)
    assert not rep.bound_exceeded
    assert not rep.growth_flagged


def test_report_json_roundtrip(heat_solve):
    import json

    _, _, result = heat_solve
    doc = json.loads(result.report.to_json())
    assert doc["grid"]["L"] == 32
    assert len(doc["per_slice"]["max_value"]) == 33
    assert doc["per_slice"]["convexity_residual"][0] <= 1e-10


def test_isaacs_gap_warning():
    # a cost table with no pure saddle produces a gap, which is only warned
    doc = small_game_doc(
        I=1,
        controls_U=[[0.0], [1.0]],
        controls_V=[[0.0], [1.0]],
        l=["2 * (u1 - v1) * (u1 - v1) - 1"],  # matching-pennies-like
        g=["0"],
        bounds={
            "b_inf": 0.0, "sigma_inf": 1.0, "sigma_inv_inf": 1.0,
            "l_inf": 1.0, "g_inf": 0.1, "lip_g": 0.1,
        },
    )
    cfg = iv.config_from_dict(doc)
    grids = iv.build_grids(cfg)
    result = iv.solve(cfg.game, grids, iv.gh_rule(3, 1))
    assert max(result.report.isaacs_gap) > 1e-8
    assert result.report.warnings
