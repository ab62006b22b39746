import dataclasses
import itertools
import json

import numpy as np
import pytest

import isaacs_vex as iv
from isaacs_vex.errors import ParseError, UnknownProblem, ValidationError

from conftest import small_game_doc


def test_heat_builtin_shape():
    spec = iv.builtin_problem("heat")
    assert spec.d == 1 and spec.I == 2
    rng = np.random.default_rng(0)
    for _ in range(20):
        t = float(rng.uniform(0, 1))
        x = rng.uniform(-8, 8, size=(1,))
        b = spec.drift(t, x, spec.controls_U[0], spec.controls_V[0])
        assert np.all(b == 0.0)
        s = spec.sigma(t, x.reshape(1, 1))[0]
        assert s[0, 0] == 1.0
        l = spec.running_cost(t, x, spec.controls_U[0], spec.controls_V[0])
        assert np.all(l == 0.0)


def test_heat_hamiltonian_is_zero():
    spec = iv.builtin_problem("heat")
    rng = np.random.default_rng(1)
    for _ in range(10):
        h = iv.ham(spec, float(rng.uniform(0, 1)), rng.uniform(-8, 8, 1),
                   rng.normal(size=1), [0.5, 0.5])
        assert h.value == 0.0
        assert h.isaacs_gap == 0.0


def test_unknown_builtin():
    with pytest.raises(UnknownProblem):
        iv.builtin_problem("nosuch")


def test_pursuit_hamiltonian_at_unit_gradient():
    # brute-force oracle: enumerate the symmetric control grids
    spec = iv.builtin_problem("pursuit1d")
    us = spec.controls_U[:, 0]
    vs = spec.controls_V[:, 0]
    xi = 1.0
    expected = max(min((u + v) * xi for u in us) for v in vs)
    assert expected == 0.0
    got = iv.ham(spec, 0.3, [0.5], [xi], [0.25, 0.75])
    assert got.value == pytest.approx(expected, abs=1e-14)
    assert got.isaacs_gap == pytest.approx(0.0, abs=1e-14)


def test_load_config_roundtrip(tmp_path, tiny_doc):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny_doc))
    cfg = iv.load_config(path)
    assert cfg.to_dict() == tiny_doc
    # serialize -> load is the identity on the payload
    again = iv.config_from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == tiny_doc
    assert again.problem_hash() == cfg.problem_hash()


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        iv.load_config(path)


def test_missing_file():
    with pytest.raises(ParseError):
        iv.load_config("/nonexistent/config.json")


def test_empty_controls_rejected():
    doc = small_game_doc(controls_U=[])
    with pytest.raises(ValidationError):
        iv.config_from_dict(doc)


def test_singular_sigma_rejected():
    doc = small_game_doc(sigma=[["0"]])
    with pytest.raises(ValidationError):
        iv.config_from_dict(doc)


def test_bad_horizon_rejected():
    doc = small_game_doc(T=0.0)
    with pytest.raises(ValidationError):
        iv.config_from_dict(doc)


def test_bad_domain_rejected():
    doc = small_game_doc(domain=[[2.0, -2.0]])
    with pytest.raises(ValidationError):
        iv.config_from_dict(doc)


def test_unknown_keys_rejected(tiny_doc):
    tiny_doc["surprise"] = 1
    with pytest.raises(ValidationError):
        iv.config_from_dict(tiny_doc)


def test_unknown_game_keys_rejected(tiny_doc):
    tiny_doc["game"]["mystery"] = 1
    with pytest.raises(ValidationError):
        iv.config_from_dict(tiny_doc)


def test_sigma_cannot_depend_on_controls():
    doc = small_game_doc(sigma=[["1 + u1"]])
    with pytest.raises(ValidationError):
        iv.config_from_dict(doc)


def test_nonfinite_coefficient_rejected_at_load():
    # exp overflows on the sampled domain
    doc = small_game_doc(g=["exp(x1 * 1000) * 0 + exp(exp(x1 + 10))"])
    with pytest.raises(ValidationError):
        iv.config_from_dict(doc)


@pytest.mark.parametrize("name", ["heat", "pursuit1d", "reveal2"])
def test_declared_bounds_hold_on_samples(name):
    spec = iv.builtin_problem(name)
    rng = np.random.default_rng(7)
    lo, hi = spec.domain[:, 0], spec.domain[:, 1]
    for _ in range(100):
        t = float(rng.uniform(spec.t0, spec.T))
        x = rng.uniform(lo, hi)
        u = spec.controls_U[rng.integers(len(spec.controls_U))]
        v = spec.controls_V[rng.integers(len(spec.controls_V))]
        assert np.max(np.abs(spec.drift(t, x, u, v))) <= spec.bounds.b_inf + 1e-12
        assert np.max(np.abs(spec.running_cost(t, x, u, v))) <= spec.bounds.l_inf + 1e-12
        s = spec.sigma(t, x.reshape(1, -1))[0]
        assert abs(np.linalg.det(s)) > 1e-12
    xs = rng.uniform(lo, hi, size=(100, spec.d))
    assert np.max(np.abs(spec.terminal(xs))) <= spec.bounds.g_inf + 1e-12


def test_gamespec_immutable():
    spec = iv.builtin_problem("heat")
    with pytest.raises(dataclasses.FrozenInstanceError):
        spec.d = 2


def test_control_table_shapes():
    spec = iv.builtin_problem("reveal2")
    x = np.linspace(-1, 1, 5).reshape(-1, 1)
    B, L = spec.control_table(0.0, x)
    assert B.shape == (5, 4, 2, 1)
    assert L.shape == (2, 5, 4, 2)
    # table matches pointwise evaluation
    for xi, ui, vi in itertools.product(range(5), range(4), range(2)):
        direct = spec.running_cost(0.0, x[xi], spec.controls_U[ui], spec.controls_V[vi])
        np.testing.assert_allclose(L[:, xi, ui, vi], direct, atol=1e-14)
