"""Problem definition: game coefficients, control grids, config loading.

A game is described entirely by data: dimensions, horizon, a domain box,
finite control grids for both players, and coefficient expressions for the
drift, the volatility, the per-scenario running costs and terminal payoffs.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, UnknownProblem, ValidationError
from .exprs import CompiledExpr, compile_expr, variable_names

_BOUND_KEYS = ("b_inf", "sigma_inf", "sigma_inv_inf", "l_inf", "g_inf", "lip_g")


@dataclass(frozen=True)
class Bounds:
    """Declared coefficient bounds, consumed by the diagnostics suite."""

    b_inf: float
    sigma_inf: float
    sigma_inv_inf: float
    l_inf: float
    g_inf: float
    lip_g: float

    def to_dict(self):
        return {k: getattr(self, k) for k in _BOUND_KEYS}


@dataclass(frozen=True)
class GameSpec:
    """Immutable description of a two-player zero-sum game with I scenarios.

    Evaluators are pure functions of their arguments; the spec is safe to
    share across parallel workers.
    """

    d: int
    I: int
    t0: float
    T: float
    domain: np.ndarray  # (d, 2) rows [lo, hi]
    controls_U: np.ndarray  # (nu, du)
    controls_V: np.ndarray  # (nv, dv)
    b_exprs: tuple  # d CompiledExpr, components of the drift
    sigma_exprs: tuple  # d*d CompiledExpr, row-major
    l_exprs: tuple  # I CompiledExpr, running cost per scenario
    g_exprs: tuple  # I CompiledExpr, terminal payoff per scenario
    bounds: Bounds

    # -- environment helpers -------------------------------------------------

    def _env_txuv(self, t, x, u, v):
        env = {"t": t}
        for j in range(self.d):
            env[f"x{j + 1}"] = x[..., j]
        for j in range(self.controls_U.shape[1]):
            env[f"u{j + 1}"] = u[..., j]
        for j in range(self.controls_V.shape[1]):
            env[f"v{j + 1}"] = v[..., j]
        return env

    def _env_tx(self, t, x):
        env = {"t": t}
        for j in range(self.d):
            env[f"x{j + 1}"] = x[..., j]
        return env

    @staticmethod
    def _eval_to(expr: CompiledExpr, env, shape):
        out = np.asarray(expr(env), dtype=float)
        if out.shape != shape:
            out = np.broadcast_to(out, shape)
        return out

    # -- evaluators -----------------------------------------------------------

    def drift(self, t, x, u, v):
        """b(t, x, u, v) -> (..., d).  Arguments broadcast against each other."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], u.shape[:-1], v.shape[:-1])
        env = self._env_txuv(t, x, u, v)
        comps = [self._eval_to(e, env, shape) for e in self.b_exprs]
        return np.stack(comps, axis=-1)

    def sigma(self, t, x):
        """sigma(t, x) -> (..., d, d)."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        env = self._env_tx(t, x)
        rows = [self._eval_to(e, env, shape) for e in self.sigma_exprs]
        out = np.stack(rows, axis=-1)
        return out.reshape(shape + (self.d, self.d))

    def running_cost(self, t, x, u, v):
        """l_i(t, x, u, v) -> (I, ...)."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], u.shape[:-1], v.shape[:-1])
        env = self._env_txuv(t, x, u, v)
        return np.stack([self._eval_to(e, env, shape) for e in self.l_exprs], axis=0)

    def terminal(self, x):
        """g_i(x) -> (..., I)."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        env = self._env_tx(0.0, x)
        return np.stack([self._eval_to(e, env, shape) for e in self.g_exprs], axis=-1)

    def control_table(self, t, x):
        """Drift and cost tensors over the full control product at space points.

        Returns (B, L) with B of shape (n, nu, nv, d) and L of shape
        (I, n, nu, nv) for x of shape (n, d).  This is the per-step
        precomputation used by the Hamiltonian.
        """
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        nu = self.controls_U.shape[0]
        nv = self.controls_V.shape[0]
        xb = x[:, None, None, :]
        ub = self.controls_U[None, :, None, :]
        vb = self.controls_V[None, None, :, :]
        B = self.drift(t, xb, ub, vb)
        L = self.running_cost(t, xb, ub, vb)
        assert B.shape == (n, nu, nv, self.d)
        assert L.shape == (self.I, n, nu, nv)
        return B, L


@dataclass(frozen=True)
class Discretization:
    L: int
    space_nodes: tuple  # per-axis node counts
    simplex_m: int

    def to_dict(self):
        return {
            "L": self.L,
            "space_nodes": list(self.space_nodes),
            "simplex_m": self.simplex_m,
        }


@dataclass(frozen=True)
class OutputOptions:
    write_csv: bool = True
    write_binary: bool = True
    write_splits: bool = True
    x0: tuple | None = None
    p0: tuple | None = None


@dataclass(frozen=True)
class ProblemConfig:
    """Validated configuration: name, game, numerics and output options."""

    name: str
    game: GameSpec
    discretization: Discretization
    quad_order: int
    output: OutputOptions
    payload: dict = field(repr=False)  # the raw (validated) document

    def to_dict(self) -> dict:
        return copy.deepcopy(self.payload)

    def problem_hash(self) -> str:
        blob = json.dumps(self.payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Validation helpers


def _require_keys(block: dict, required, optional, where: str):
    if not isinstance(block, dict):
        raise ValidationError(f"{where} must be an object")
    unknown = set(block) - set(required) - set(optional)
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)} in {where}")
    missing = set(required) - set(block)
    if missing:
        raise ValidationError(f"missing keys {sorted(missing)} in {where}")


def _as_control_grid(raw, side: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) == 0:
        raise ValidationError(f"controls_{side} must be a nonempty list of points")
    pts = []
    width = None
    for entry in raw:
        if not isinstance(entry, list) or not entry:
            raise ValidationError(f"each controls_{side} entry must be a nonempty list")
        if width is None:
            width = len(entry)
        elif len(entry) != width:
            raise ValidationError(f"controls_{side} points have inconsistent dimension")
        pts.append([float(c) for c in entry])
    return np.asarray(pts, dtype=float)


def _compile_game(block: dict) -> GameSpec:
    _require_keys(
        block,
        required=(
            "d", "I", "t0", "T", "domain", "controls_U", "controls_V",
            "b", "sigma", "l", "g", "bounds",
        ),
        optional=(),
        where="game",
    )
    d = int(block["d"])
    I = int(block["I"])
    if d < 1 or I < 1:
        raise ValidationError("d and I must be >= 1")
    t0 = float(block["t0"])
    T = float(block["T"])
    if not T > t0:
        raise ValidationError(f"horizon requires T > t0, got t0={t0}, T={T}")
    domain = np.asarray(block["domain"], dtype=float)
    if domain.shape != (d, 2):
        raise ValidationError(f"domain must be a list of {d} [lo, hi] pairs")
    if not np.all(domain[:, 0] < domain[:, 1]):
        raise ValidationError("every domain axis needs lo < hi")
    controls_U = _as_control_grid(block["controls_U"], "U")
    controls_V = _as_control_grid(block["controls_V"], "V")
    du = controls_U.shape[1]
    dv = controls_V.shape[1]

    names_buv = variable_names(d, du, dv)
    names_tx = variable_names(d)
    names_x = variable_names(d, with_t=False)

    b_raw = block["b"]
    if isinstance(b_raw, str):
        b_raw = [b_raw]
    if not isinstance(b_raw, list) or len(b_raw) != d:
        raise ValidationError(f"b must be one expression (d=1) or a list of {d}")
    b_exprs = tuple(compile_expr(s, names_buv) for s in b_raw)

    sig_raw = block["sigma"]
    if (
        not isinstance(sig_raw, list)
        or len(sig_raw) != d
        or any(not isinstance(r, list) or len(r) != d for r in sig_raw)
    ):
        raise ValidationError(f"sigma must be a {d}x{d} matrix of expressions")
    sigma_exprs = tuple(compile_expr(s, names_tx) for row in sig_raw for s in row)

    l_raw = block["l"]
    if not isinstance(l_raw, list) or len(l_raw) != I:
        raise ValidationError(f"l must list {I} expressions (one per scenario)")
    l_exprs = tuple(compile_expr(s, names_buv) for s in l_raw)

    g_raw = block["g"]
    if not isinstance(g_raw, list) or len(g_raw) != I:
        raise ValidationError(f"g must list {I} expressions (one per scenario)")
    g_exprs = tuple(compile_expr(s, names_x) for s in g_raw)

    _require_keys(block["bounds"], required=_BOUND_KEYS, optional=(), where="game.bounds")
    bounds = Bounds(**{k: float(block["bounds"][k]) for k in _BOUND_KEYS})

    return GameSpec(
        d=d, I=I, t0=t0, T=T, domain=domain,
        controls_U=controls_U, controls_V=controls_V,
        b_exprs=b_exprs, sigma_exprs=sigma_exprs,
        l_exprs=l_exprs, g_exprs=g_exprs, bounds=bounds,
    )


def _spot_check(spec: GameSpec, disc: Discretization, samples: int = 100):
    """Finiteness spot-check of all evaluators plus sigma invertibility.

    Invertibility is checked at every grid node of the configured
    discretization, finiteness on a fixed random sample.
    """
    from .grids import SpaceGrid, TimeGrid  # local import avoids a cycle

    tg = TimeGrid(spec.t0, spec.T, disc.L)
    sg = SpaceGrid(spec.domain, disc.space_nodes)
    for tk in tg.nodes:
        S = spec.sigma(float(tk), sg.points)
        if not np.all(np.isfinite(S)):
            raise ValidationError(f"sigma not finite at t={tk}")
        det = np.linalg.det(S)
        bad = np.abs(det) <= 1e-12
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise ValidationError(
                f"sigma singular at t={tk}, x={sg.points[idx]} (|det|<=1e-12)"
            )

    rng = np.random.default_rng(20240517)
    lo, hi = spec.domain[:, 0], spec.domain[:, 1]
    ts = rng.uniform(spec.t0, spec.T, size=samples)
    xs = rng.uniform(lo, hi, size=(samples, spec.d))
    us = spec.controls_U[rng.integers(0, len(spec.controls_U), size=samples)]
    vs = spec.controls_V[rng.integers(0, len(spec.controls_V), size=samples)]
    for t, x, u, v in zip(ts, xs, us, vs):
        bval = spec.drift(float(t), x, u, v)
        lval = spec.running_cost(float(t), x, u, v)
        if not np.all(np.isfinite(bval)) or not np.all(np.isfinite(lval)):
            raise ValidationError(f"b or l not finite at sampled (t={t}, x={x})")
    gval = spec.terminal(xs)
    if not np.all(np.isfinite(gval)):
        raise ValidationError("g not finite on sampled domain points")


def config_from_dict(doc: dict) -> ProblemConfig:
    """Validate a configuration document and compile it.

    Unknown keys are rejected at every level so typos fail loudly.
    """
    _require_keys(
        doc,
        required=("name", "game", "discretization"),
        optional=("quadrature", "output"),
        where="config",
    )
    if not isinstance(doc.get("name"), str) or not doc["name"]:
        raise ValidationError("config.name must be a nonempty string")
    game = _compile_game(doc["game"])

    dblock = doc["discretization"]
    _require_keys(dblock, required=("L", "space_nodes", "simplex_m"), optional=(), where="discretization")
    L = int(dblock["L"])
    if L < 0:
        raise ValidationError("discretization.L must be >= 0")
    raw_nodes = dblock["space_nodes"]
    if isinstance(raw_nodes, int):
        raw_nodes = [raw_nodes] * game.d
    if not isinstance(raw_nodes, list) or len(raw_nodes) != game.d:
        raise ValidationError(f"space_nodes must be an int or a list of {game.d} ints")
    counts = tuple(int(n) for n in raw_nodes)
    if any(n < 2 for n in counts):
        raise ValidationError("space_nodes entries must be >= 2")
    m = int(dblock["simplex_m"])
    if m < 1:
        raise ValidationError("simplex_m must be >= 1")
    disc = Discretization(L=L, space_nodes=counts, simplex_m=m)

    qblock = doc.get("quadrature", {"order": 5})
    _require_keys(qblock, required=("order",), optional=(), where="quadrature")
    Q = int(qblock["order"])
    if Q < 1:
        raise ValidationError("quadrature.order must be >= 1")

    oblock = doc.get("output", {})
    _require_keys(
        oblock, required=(),
        optional=("write_csv", "write_binary", "write_splits", "x0", "p0"),
        where="output",
    )
    x0 = oblock.get("x0")
    if x0 is not None:
        x0 = tuple(float(c) for c in x0)
        if len(x0) != game.d:
            raise ValidationError(f"output.x0 must have {game.d} components")
    p0 = oblock.get("p0")
    if p0 is not None:
        p0 = tuple(float(c) for c in p0)
        if len(p0) != game.I or abs(sum(p0) - 1.0) > 1e-9 or min(p0) < -1e-12:
            raise ValidationError("output.p0 must be a probability vector over I scenarios")
    out = OutputOptions(
        write_csv=bool(oblock.get("write_csv", True)),
        write_binary=bool(oblock.get("write_binary", True)),
        write_splits=bool(oblock.get("write_splits", True)),
        x0=x0, p0=p0,
    )

    _spot_check(game, disc)
    return ProblemConfig(
        name=doc["name"], game=game, discretization=disc,
        quad_order=Q, output=out, payload=copy.deepcopy(doc),
    )


def load_config(path) -> ProblemConfig:
    """Load and validate a JSON problem configuration."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}") from exc
    return config_from_dict(doc)


# ---------------------------------------------------------------------------
# Built-in benchmark problems.
#
# "heat": coefficient-free, admits the closed-form Gaussian-smoothing oracle.
# "pursuit1d": symmetric drift game u+v with zero running cost.
# "reveal2": scenario-dependent running costs engineered so the convexity
# obstacle is active in the interior of the simplex (partial revelation).

_BUILTINS: dict = {
    "heat": {
        "name": "heat",
        "game": {
            "d": 1, "I": 2, "t0": 0.0, "T": 1.0,
            "domain": [[-8.0, 8.0]],
            "controls_U": [[0.0]],
            "controls_V": [[0.0]],
            "b": "0",
            "sigma": [["1"]],
            "l": ["0", "0"],
            "g": ["sin(x1)", "sin(x1) + 1"],
            "bounds": {
                "b_inf": 0.0, "sigma_inf": 1.0, "sigma_inv_inf": 1.0,
                "l_inf": 0.0, "g_inf": 2.0, "lip_g": 1.0,
            },
        },
        "discretization": {"L": 32, "space_nodes": [201], "simplex_m": 16},
        "quadrature": {"order": 5},
        "output": {},
    },
    "pursuit1d": {
        "name": "pursuit1d",
        "game": {
            "d": 1, "I": 2, "t0": 0.0, "T": 1.0,
            "domain": [[-6.0, 6.0]],
            "controls_U": [[-1.0], [-0.5], [0.0], [0.5], [1.0]],
            "controls_V": [[-1.0], [-0.5], [0.0], [0.5], [1.0]],
            "b": "u1 + v1",
            "sigma": [["1"]],
            "l": ["0", "0"],
            "g": ["clamp(x1, -2, 2)", "-clamp(x1, -2, 2)"],
            "bounds": {
                "b_inf": 2.0, "sigma_inf": 1.0, "sigma_inv_inf": 1.0,
                "l_inf": 0.0, "g_inf": 2.0, "lip_g": 1.0,
            },
        },
        "discretization": {"L": 24, "space_nodes": [181], "simplex_m": 8},
        "quadrature": {"order": 5},
        "output": {},
    },
    "reveal2": {
        "name": "reveal2",
        "game": {
            "d": 1, "I": 2, "t0": 0.0, "T": 1.0,
            "domain": [[-6.0, 6.0]],
            # u indexes the rows, v the columns of a 4x2 cost table encoded
            # as Lagrange polynomials.  The table's game value, as a function
            # of the belief p1, dips below its endpoint chord with hull
            # contacts at p1 = 1/16, 2/16, 3/16 and a concave bump above
            # them, while sup-inf = inf-sup for every p1 (no Isaacs gap):
            # the envelope then splits interior beliefs onto interior
            # contact points, i.e. partial revelation is optimal.
            "controls_U": [[0.0], [1.0], [2.0], [3.0]],
            "controls_V": [[0.0], [1.0]],
            "b": "0",
            "sigma": [["1"]],
            "l": [
                "(1 - v1) * (2 - 4*u1 + 4*u1*(u1 - 1) - (13/6)*u1*(u1 - 1)*(u1 - 2))"
                " + v1 * (-2 + u1*(u1 - 1) - u1*(u1 - 1)*(u1 - 2))",
                "(1 - v1) * (-2 + 4*u1 - (5/2)*u1*(u1 - 1) + (2/3)*u1*(u1 - 1)*(u1 - 2))"
                " + v1 * (-1 + (1/2)*u1*(u1 - 1))",
            ],
            "g": ["0.5 * sin(x1)", "-0.5 * sin(x1)"],
            "bounds": {
                "b_inf": 0.0, "sigma_inf": 1.0, "sigma_inv_inf": 1.0,
                "l_inf": 2.0, "g_inf": 0.5, "lip_g": 0.5,
            },
        },
        "discretization": {"L": 32, "space_nodes": [151], "simplex_m": 16},
        "quadrature": {"order": 5},
        "output": {},
    },
}


def builtin_names():
    return tuple(sorted(_BUILTINS))


def builtin_config(name: str) -> ProblemConfig:
    """Full configuration (game + default numerics) of a built-in problem."""
    if name not in _BUILTINS:
        raise UnknownProblem(
            f"unknown problem {name!r}; built-ins: {', '.join(builtin_names())}"
        )
    return config_from_dict(copy.deepcopy(_BUILTINS[name]))


def builtin_problem(name: str) -> GameSpec:
    """GameSpec of a built-in problem ("heat", "pursuit1d", "reveal2")."""
    return builtin_config(name).game
