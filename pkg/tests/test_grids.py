import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import isaacs_vex as iv
from isaacs_vex.grids import (
    SimplexGrid,
    SpaceGrid,
    TimeGrid,
    ValueField,
    interpolate_many,
    read_snapshot,
    write_snapshot,
)


def make_field(domain, counts, values, I=1, m=1):
    space = SpaceGrid(np.asarray(domain, dtype=float), counts)
    simplex = SimplexGrid(I, m)
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None] * np.ones((1, simplex.n_nodes))
    return ValueField(k=0, t=0.0, values=vals, space=space, simplex=simplex)


def test_time_grid_endpoint_exact():
    tg = TimeGrid(0.1, 0.7, 7)
    nodes = tg.nodes
    assert nodes[-1] == 0.7
    assert len(nodes) == 8
    assert np.all(np.diff(nodes) > 0)


def test_time_grid_zero_steps():
    tg = TimeGrid(0.0, 1.0, 0)
    assert list(tg.nodes) == [1.0]
    assert tg.tau == 0.0


def test_interpolation_at_nodes_exact():
    field = make_field([[-1.0, 1.0]], (5,), [3.0, -1.0, 4.0, 1.0, -5.0])
    for j, x in enumerate(field.space.axes[0]):
        assert iv.interpolate(field, [x], 0) == field.values[j, 0]


def test_interpolation_linear_third():
    # 1-D field {0, 1} at nodes {0, h}: querying at h/3 gives 1/3
    field = make_field([[0.0, 1.0]], (2,), [0.0, 1.0])
    h = field.space.h[0]
    assert iv.interpolate(field, [h / 3.0], 0) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_interpolation_constant_field():
    field = make_field([[-2.0, 3.0]], (9,), np.full(9, 2.5))
    rng = np.random.default_rng(3)
    for x in rng.uniform(-4, 5, size=20):
        assert iv.interpolate(field, [x], 0) == pytest.approx(2.5, rel=1e-14)


def test_interpolation_clamps_outside_box():
    field = make_field([[0.0, 1.0]], (3,), [5.0, 1.0, -2.0])
    assert iv.interpolate(field, [-10.0], 0) == 5.0
    assert iv.interpolate(field, [10.0], 0) == -2.0


def test_interpolation_bounded_by_field():
    rng = np.random.default_rng(5)
    values = rng.normal(size=17)
    field = make_field([[-3.0, 3.0]], (17,), values)
    top = np.max(np.abs(values))
    for x in rng.uniform(-5, 5, size=200):
        assert abs(iv.interpolate(field, [x], 0)) <= top * (1 + 1e-12)


def test_interpolation_affine_exact_within_cell():
    # affine data is reproduced up to rounding anywhere inside the box
    space = SpaceGrid(np.array([[0.0, 2.0]]), (9,))
    vals = 3.0 * space.axes[0] - 1.0
    field = make_field([[0.0, 2.0]], (9,), vals)
    for x in np.linspace(0, 2, 23):
        assert iv.interpolate(field, [x], 0) == pytest.approx(3.0 * x - 1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    data=st.lists(
        st.tuples(
            st.floats(-1e3, 1e3), st.floats(0.0, 1e3)
        ),
        min_size=5, max_size=5,
    ),
    x=st.floats(-12.0, 12.0),
)
def test_interpolation_monotone(data, x):
    lo = np.array([a for a, _ in data])
    hi = lo + np.array([b for _, b in data])
    f_lo = make_field([[-5.0, 5.0]], (5,), lo)
    f_hi = make_field([[-5.0, 5.0]], (5,), hi)
    assert iv.interpolate(f_hi, [x], 0) >= iv.interpolate(f_lo, [x], 0)


def test_interpolate_many_2d():
    space = SpaceGrid(np.array([[0.0, 1.0], [0.0, 1.0]]), (3, 3))
    # bilinear function x + 2y is reproduced exactly by multilinear weights
    vals = (space.points[:, 0] + 2.0 * space.points[:, 1])[:, None]
    queries = np.array([[0.25, 0.75], [0.5, 0.5], [1.0, 0.0]])
    out = interpolate_many(vals, space, queries)
    np.testing.assert_allclose(
        out[:, 0], queries[:, 0] + 2.0 * queries[:, 1], atol=1e-14
    )


def test_simplex_nodes_two_scenarios():
    g = iv.simplex_nodes(2, 4)
    assert g.n_nodes == 5
    expected = [[0, 1], [0.25, 0.75], [0.5, 0.5], [0.75, 0.25], [1, 0]]
    np.testing.assert_allclose(g.nodes, expected)
    assert g.nodes[g.vertex_indices[0]].tolist() == [1.0, 0.0]
    assert g.nodes[g.vertex_indices[1]].tolist() == [0.0, 1.0]


def test_simplex_single_scenario():
    g = iv.simplex_nodes(1, 7)
    assert g.n_nodes == 1
    assert g.nodes.tolist() == [[1.0]]


def test_simplex_three_scenarios_count():
    # C(m + I - 1, I - 1) = C(4, 2) = 6
    g = iv.simplex_nodes(3, 2)
    assert g.n_nodes == 6
    assert math.comb(2 + 3 - 1, 3 - 1) == 6
    sums = g.coords.sum(axis=1)
    assert np.all(sums == 2)
    np.testing.assert_allclose(g.nodes.sum(axis=1), 1.0, atol=1e-15)
    for i in range(3):
        assert g.coords[g.vertex_indices[i], i] == 2


def test_simplex_node_count_formula():
    for I, m in [(2, 16), (3, 6), (4, 3)]:
        g = iv.simplex_nodes(I, m)
        assert g.n_nodes == math.comb(m + I - 1, I - 1)


def test_edge_triples_are_second_difference_stencils():
    g = iv.simplex_nodes(2, 4)
    triples = g.edge_triples()
    assert triples  # interior nodes exist for m >= 2
    for lo, mid, hi in triples:
        step_lo = g.coords[mid] - g.coords[lo]
        step_hi = g.coords[hi] - g.coords[mid]
        assert np.array_equal(step_lo, step_hi)
        assert sorted(step_hi.tolist()) == [-1, 1]


def test_nearest_index():
    space = SpaceGrid(np.array([[0.0, 1.0]]), (11,))
    queries = np.array([[0.0], [0.04], [0.06], [1.5], [-0.7]])
    idx = space.nearest_index(queries)
    assert idx.tolist() == [0, 0, 1, 10, 0]


def test_snapshot_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    field = make_field([[-1.0, 1.0]], (7,), rng.normal(size=7), I=2, m=2)
    field.values = rng.normal(size=field.values.shape)
    field.k = 3
    field.t = 0.375
    path = tmp_path / "slice.vexf"
    write_snapshot(field, path)
    k, t, values = read_snapshot(path)
    assert k == 3 and t == 0.375
    np.testing.assert_array_equal(values, field.values)


def test_snapshot_bad_magic(tmp_path):
    path = tmp_path / "bad.vexf"
    path.write_bytes(b"NOPE!" + b"\x00" * 32)
    with pytest.raises(iv.ParseError):
        read_snapshot(path)
