"""Backward time-stepping solver and its regularity diagnostics.

Each step maps the slice at t_k to the slice at t_{k-1}:

    V(t_{k-1}, x, p) = Vex_p( E[V(t_k, X, p)] + tau H(t_{k-1}, x, zbar, p) )

with X the one-step Euler point of the uncontrolled diffusion, expectations
replaced by Gauss-Hermite quadrature, and the convex envelope in p applied
strictly last.  All per-node computations are independent, so worker count
changes scheduling only, never results.
"""

from __future__ import annotations

import concurrent.futures
import json
import time as _time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .convexify import EnvelopeSplit, vex
from .errors import DivergedField, SingularSigma
from .grids import Grids, ValueField
from .hamiltonian import ham_grid
from .quadrature import GHRule, grid_step_expectation


@dataclass(frozen=True)
class StepSplits:
    """Envelope splits for one produced slice, one EnvelopeSplit per x node."""

    k: int
    envelopes: tuple  # (n_x,) EnvelopeSplit


@dataclass(frozen=True)
class StepDiagnostics:
    k: int
    max_value: float
    min_value: float
    lip_x: float
    lip_p: float
    max_isaacs_gap: float
    convexity_residual: float
    seconds: float


@dataclass
class SolveReport:
    """Per-solve diagnostics mirroring the discrete regularity estimates."""

    problem: str = ""
    problem_hash: str = ""
    L: int = 0
    tau: float = 0.0
    space_counts: tuple = ()
    simplex_m: int = 0
    quad_order: int = 0
    max_value: list = dc_field(default_factory=list)  # per slice k = 0..L
    min_value: list = dc_field(default_factory=list)
    lip_x: list = dc_field(default_factory=list)
    lip_p: list = dc_field(default_factory=list)
    convexity_residual: list = dc_field(default_factory=list)
    isaacs_gap: list = dc_field(default_factory=list)
    holder_max_ratio: float = 0.0
    fitted_c_x: float = 0.0
    fitted_c_p: float = 0.0
    value_bound: float = 0.0  # ||g||_inf + c T (1 + M) shape
    bound_exceeded: bool = False
    growth_flagged: bool = False
    warnings: list = dc_field(default_factory=list)
    step_seconds: list = dc_field(default_factory=list)  # wall clock, timing only
    total_seconds: float = 0.0  # wall clock, timing only

    def to_dict(self):
        return {
            "problem": self.problem,
            "problem_hash": self.problem_hash,
            "grid": {
                "L": self.L,
                "tau": self.tau,
                "space_counts": list(self.space_counts),
                "simplex_m": self.simplex_m,
                "quad_order": self.quad_order,
            },
            "per_slice": {
                "max_value": self.max_value,
                "min_value": self.min_value,
                "lip_x": self.lip_x,
                "lip_p": self.lip_p,
                "convexity_residual": self.convexity_residual,
                "isaacs_gap": self.isaacs_gap,
            },
            "holder_max_ratio": self.holder_max_ratio,
            "fitted_c_x": self.fitted_c_x,
            "fitted_c_p": self.fitted_c_p,
            "value_bound": self.value_bound,
            "bound_exceeded": self.bound_exceeded,
            "growth_flagged": self.growth_flagged,
            "warnings": self.warnings,
            "timing_wall_clock": {
                "step_seconds": self.step_seconds,
                "total_seconds": self.total_seconds,
            },
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


@dataclass
class SolveResult:
    fields: list  # ValueField, index == time index k = 0..L
    splits: dict  # k -> StepSplits for k = 0..L-1
    report: SolveReport


def terminal_slice(spec, grids: Grids, problem_hash: str = "") -> ValueField:
    """Terminal condition <p, g(x)> on the grid; affine in p at every x."""
    G = spec.terminal(grids.space.points)  # (n_x, I)
    values = G @ grids.simplex.nodes.T  # (n_x, n_p)
    return ValueField(
        k=grids.time.L, t=grids.time.T, values=values,
        space=grids.space, simplex=grids.simplex, problem_hash=problem_hash,
    )


def _slice_lip_x(values, space):
    """Max divided difference over neighboring space nodes, per axis."""
    if space.n_nodes == 1:
        return 0.0
    grid_shape = space.counts + (values.shape[1],)
    v = values.reshape(grid_shape)
    out = 0.0
    for j in range(space.d):
        dv = np.abs(np.diff(v, axis=j)) / space.h[j]
        if dv.size:
            out = max(out, float(dv.max()))
    return out


def _slice_lip_p(values, simplex):
    pairs = _edge_pairs(simplex)
    if not pairs:
        return 0.0
    a, b = pairs
    step = np.sqrt(2.0) / simplex.m
    dv = np.abs(values[:, a] - values[:, b]) / step
    return float(dv.max())


_EDGE_PAIR_CACHE: dict = {}


def _edge_pairs(simplex):
    key = (simplex.I, simplex.m)
    if key not in _EDGE_PAIR_CACHE:
        pairs_a, pairs_b = [], []
        for c_idx in range(simplex.n_nodes):
            c = simplex.coords[c_idx]
            for i in range(simplex.I):
                for j in range(simplex.I):
                    if i == j:
                        continue
                    if c[i] + 1 <= simplex.m and c[j] - 1 >= 0:
                        nb = list(c)
                        nb[i] += 1
                        nb[j] -= 1
                        nb_idx = simplex.index_of(nb)
                        if nb_idx > c_idx:
                            pairs_a.append(c_idx)
                            pairs_b.append(nb_idx)
        _EDGE_PAIR_CACHE[key] = (
            (np.array(pairs_a), np.array(pairs_b)) if pairs_a else ()
        )
    return _EDGE_PAIR_CACHE[key]


def _second_difference_residual(values, simplex):
    triples = simplex.edge_triples()
    if not triples:
        return 0.0
    t = np.array(triples)
    second = values[:, t[:, 0]] - 2.0 * values[:, t[:, 1]] + values[:, t[:, 2]]
    return float(max(0.0, -second.min()))


def default_value_bound(spec, terminal_field) -> float:
    """A-priori sup bound of the recursion, ||V_L|| + c T (1 + M) shape."""
    c_h = max(spec.bounds.b_inf, spec.bounds.l_inf)
    m_term = _slice_lip_x(terminal_field.values, terminal_field.space)
    vmax = float(np.max(np.abs(terminal_field.values)))
    return vmax + c_h * (spec.T - spec.t0) * (1.0 + m_term)


def backward_step(spec, grids: Grids, rule: GHRule, field_k: ValueField,
                  workers: int = 1, value_bound: float | None = None):
    """One backward step: slice k -> slice k-1 plus splits and diagnostics.

    Order of operations per (x, p) node: quadrature expectation and zbar,
    then the Hamiltonian at zbar, then the sum, and the envelope across the
    simplex grid per x node strictly last.
    """
    k = field_k.k
    if k <= 0:
        raise ValueError("cannot step below k=0")
    t_prev = float(grids.time.nodes[k - 1])
    tau = grids.time.tau
    space, simplex = grids.space, grids.simplex
    n_x, n_p = field_k.values.shape
    if value_bound is None:
        value_bound = default_value_bound(spec, field_k)

    started = _time.perf_counter()
    sigma_nodes = spec.sigma(t_prev, space.points)
    if not np.all(np.isfinite(sigma_nodes)):
        raise SingularSigma(f"sigma not finite at t={t_prev}")
    dets = np.linalg.det(sigma_nodes)
    if np.any(np.abs(dets) <= 1e-12):
        bad = int(np.argmax(np.abs(dets) <= 1e-12))
        raise SingularSigma(f"sigma singular at t={t_prev}, x={space.points[bad]}")
    B, Lcost = spec.control_table(t_prev, space.points)
    P = simplex.nodes

    new_values = np.empty_like(field_k.values)
    envelopes: list = [None] * n_x
    gap_max = np.zeros(n_x)

    def run_block(lo, hi):
        idx = np.arange(lo, hi)
        mean, zbar = grid_step_expectation(
            field_k.values, space, sigma_nodes[idx], tau, rule, x_indices=idx,
        )
        H, gap = ham_grid(B[idx], Lcost[:, idx], zbar, P)
        pre = mean + tau * H
        for row, xi in enumerate(idx):
            env = vex(pre[row], simplex)
            new_values[xi] = env.values
            envelopes[xi] = env
        gap_max[idx] = gap.max(axis=1)

    if workers <= 1 or n_x < 2:
        run_block(0, n_x)
    else:
        block = (n_x + workers - 1) // workers
        spans = [(lo, min(lo + block, n_x)) for lo in range(0, n_x, block)]
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_block, lo, hi) for lo, hi in spans]
            for fut in futures:
                fut.result()

    vmax = float(np.max(np.abs(new_values)))
    if not np.all(np.isfinite(new_values)) or vmax > 10.0 * (value_bound + 1.0):
        raise DivergedField(
            f"slice {k - 1}: max |value| {vmax:.3g} exceeds 10x a-priori bound "
            f"{value_bound:.3g}; check coefficients and declared bounds"
        )

    diag = StepDiagnostics(
        k=k - 1,
        max_value=float(new_values.max()),
        min_value=float(new_values.min()),
        lip_x=_slice_lip_x(new_values, space),
        lip_p=_slice_lip_p(new_values, simplex),
        max_isaacs_gap=float(gap_max.max()),
        convexity_residual=_second_difference_residual(new_values, simplex),
        seconds=_time.perf_counter() - started,
    )
    new_field = field_k.copy_with(k=k - 1, t=t_prev, values=new_values)
    return new_field, StepSplits(k=k - 1, envelopes=tuple(envelopes)), diag


def _fit_growth_constant(lip_per_slice, tau):
    """Largest c consistent with the one-step recursion M' <= M (1+c tau) + c tau."""
    c = 0.0
    for k in range(len(lip_per_slice) - 1):
        m_next = lip_per_slice[k + 1]  # slice closer to the terminal time
        m_prev = lip_per_slice[k]
        if tau > 0:
            c = max(c, (m_prev - m_next) / (tau * (m_next + 1.0)))
    return max(0.0, c)


def diagnostics(fields, spec=None) -> SolveReport:
    """Regularity report over finished slices.

    Computes discrete Lipschitz constants in x and p per slice, the maximal
    Hoelder-in-t ratio |V(t_{k+l}) - V(t_k)| / sqrt(t_{k+l} - t_k), and flags
    growth beyond what the one-step recursion predicts.
    """
    if not fields:
        raise ValueError("need at least one slice")
    fields = sorted(fields, key=lambda f: f.k)
    space = fields[0].space
    simplex = fields[0].simplex
    report = SolveReport()
    report.L = fields[-1].k
    report.space_counts = space.counts
    report.simplex_m = simplex.m
    for f in fields:
        report.max_value.append(float(f.values.max()))
        report.min_value.append(float(f.values.min()))
        report.lip_x.append(_slice_lip_x(f.values, space))
        report.lip_p.append(_slice_lip_p(f.values, simplex))
        report.convexity_residual.append(_second_difference_residual(f.values, simplex))

    if len(fields) >= 2:
        tau = fields[1].t - fields[0].t
        report.tau = tau
        ratio = 0.0
        for a in range(len(fields)):
            for b in range(a + 1, len(fields)):
                gap = fields[b].t - fields[a].t
                if gap <= 0:
                    continue
                diff = float(np.max(np.abs(fields[b].values - fields[a].values)))
                ratio = max(ratio, diff / np.sqrt(gap))
        report.holder_max_ratio = ratio
        report.fitted_c_x = _fit_growth_constant(report.lip_x, tau)
        report.fitted_c_p = _fit_growth_constant(report.lip_p, tau)
        horizon = fields[-1].t - fields[0].t
        # the recursion M' = M (1 + c tau) + c tau solves to (M_L + 1) e^{cT} - 1
        bound_x = ((report.lip_x[-1] + 1.0) * np.exp(report.fitted_c_x * horizon) - 1.0) * 1.1 + 1e-9
        bound_p = ((report.lip_p[-1] + 1.0) * np.exp(report.fitted_c_p * horizon) - 1.0) * 1.1 + 1e-9
        report.growth_flagged = bool(
            max(report.lip_x) > bound_x or max(report.lip_p) > bound_p
        )

    if spec is not None:
        c_h = max(spec.bounds.b_inf, spec.bounds.l_inf)
        horizon = spec.T - spec.t0
        m_const = max(report.lip_x)
        g_max = report.max_value[-1], report.min_value[-1]
        g_inf = max(abs(g_max[0]), abs(g_max[1]))
        report.value_bound = g_inf + c_h * horizon * (1.0 + m_const)
        vmax = max(max(abs(v) for v in report.max_value),
                   max(abs(v) for v in report.min_value))
        report.bound_exceeded = bool(vmax > report.value_bound + 1e-9)
    return report


def solve(spec, grids: Grids, rule: GHRule, workers: int = 1,
          problem_name: str = "", problem_hash: str = "") -> SolveResult:
    """Full backward recursion from the terminal slice down to k = 0.

    Deterministic for a fixed problem and grids: results are independent of
    the worker count.
    """
    total_start = _time.perf_counter()
    term = terminal_slice(spec, grids, problem_hash)
    bound = default_value_bound(spec, term)
    fields = [term]
    splits: dict = {}
    diags = []
    current = term
    for _ in range(grids.time.L):
        current, step_splits, diag = backward_step(
            spec, grids, rule, current, workers=workers, value_bound=bound,
        )
        fields.append(current)
        splits[step_splits.k] = step_splits
        diags.append(diag)
    fields = fields[::-1]  # index by time slice k

    report = diagnostics(fields, spec=spec)
    report.problem = problem_name
    report.problem_hash = problem_hash
    report.quad_order = rule.order
    report.tau = grids.time.tau
    report.step_seconds = [d.seconds for d in reversed(diags)]
    report.isaacs_gap = [d.max_isaacs_gap for d in reversed(diags)] + [0.0]
    gap_tol_scale = max(1.0, max(abs(v) for v in report.max_value + report.min_value))
    worst_gap = max(report.isaacs_gap)
    if worst_gap > 1e-8 * gap_tol_scale:
        report.warnings.append(
            f"isaacs gap {worst_gap:.3e} exceeds tolerance on the control grids; "
            "the sup-inf value was used"
        )
    report.total_seconds = _time.perf_counter() - total_start
    return SolveResult(fields=fields, splits=splits, report=report)
