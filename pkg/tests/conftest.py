import numpy as np
import pytest

import isaacs_vex as iv


@pytest.fixture(scope="session")
def heat_config():
    return iv.builtin_config("heat")


@pytest.fixture(scope="session")
def reveal2_config():
    return iv.builtin_config("reveal2")


@pytest.fixture(scope="session")
def pursuit_config():
    return iv.builtin_config("pursuit1d")


@pytest.fixture(scope="session")
def rule_1d():
    return iv.gh_rule(5, 1)


@pytest.fixture(scope="session")
def heat_solve(heat_config, rule_1d):
    grids = iv.build_grids(heat_config)
    result = iv.solve(heat_config.game, grids, rule_1d, problem_name="heat")
    return heat_config, grids, result


@pytest.fixture(scope="session")
def reveal2_solve(reveal2_config, rule_1d):
    grids = iv.build_grids(reveal2_config)
    result = iv.solve(reveal2_config.game, grids, rule_1d, problem_name="reveal2")
    return reveal2_config, grids, result


@pytest.fixture(scope="session")
def pursuit_solve(pursuit_config, rule_1d):
    grids = iv.build_grids(pursuit_config)
    result = iv.solve(pursuit_config.game, grids, rule_1d, problem_name="pursuit1d")
    return pursuit_config, grids, result


def small_game_doc(**game_overrides):
    """A tiny valid single-scenario game document for error-path tests."""
    doc = {
        "name": "tiny",
        "game": {
            "d": 1, "I": 1, "t0": 0.0, "T": 0.5,
            "domain": [[-2.0, 2.0]],
            "controls_U": [[0.0]],
            "controls_V": [[0.0]],
            "b": "0",
            "sigma": [["1"]],
            "l": ["0"],
            "g": ["sin(x1)"],
            "bounds": {
                "b_inf": 0.0, "sigma_inf": 1.0, "sigma_inv_inf": 1.0,
                "l_inf": 0.0, "g_inf": 1.0, "lip_g": 1.0,
            },
        },
        "discretization": {"L": 4, "space_nodes": [21], "simplex_m": 1},
        "quadrature": {"order": 3},
        "output": {},
    }
    doc["game"].update(game_overrides)
    return doc


@pytest.fixture()
def tiny_doc():
    return small_game_doc()


def rand_simplex_values(rng, grid, scale=1.0):
    return rng.normal(size=grid.n_nodes) * scale


np.seterr(all="ignore")
