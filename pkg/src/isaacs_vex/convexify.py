"""Discrete convex envelope on the simplex grid with barycentric splits.

The envelope computed here is the lower hull of the sampled points over grid
nodes (not the continuum envelope restricted to nodes); this choice makes the
splitting identities

    sum_l lambda_l pi^l = p,   sum_l lambda_l f(pi^l) = envelope(p)

hold to rounding accuracy, which is what the belief kernels consume.

Hull predicates run on scaled-integer abscissae (nodes are multiples of 1/m).
Points within a rounding-error band of a supporting segment or facet count as
contacts: this keeps hull combinatorics independent of accumulated noise,
makes re-enveloping an exact no-op, and gives affine inputs singleton splits
at every node.  For three or more scenarios, genuine ties beyond the float
band are settled in exact rational arithmetic with a symbolic perturbation of
the lift values in lexicographic node order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NonFiniteInput
from .grids import SimplexGrid

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SplitNode:
    """Envelope data at one simplex node: value, support and weights."""

    value: float
    support: tuple  # simplex node indices, len <= I
    weights: tuple  # positive, summing to one
    touching: bool  # envelope value equals the input value here


@dataclass(frozen=True)
class EnvelopeSplit:
    """Envelope of one value array over the simplex grid."""

    values: np.ndarray  # (n_p,)
    splits: tuple  # SplitNode per grid node


def _affine_fit(values, grid: SimplexGrid):
    """Vertex-interpolated affine part; returns (fit, residual)."""
    vertex_vals = values[list(grid.vertex_indices)]
    fit = grid.nodes @ vertex_vals
    return fit, float(np.max(np.abs(values - fit)))


def _identity_envelope(values) -> EnvelopeSplit:
    splits = tuple(
        SplitNode(value=float(v), support=(j,), weights=(1.0,), touching=True)
        for j, v in enumerate(values)
    )
    return EnvelopeSplit(values=values.copy(), splits=splits)


def _keep_point(ox, oy, ax, ay, bx, by) -> bool:
    """True when the middle point (ax, ay) stays on the lower chain.

    Works on the float cross product with an error band covering both the
    predicate's own rounding and one ulp of noise on the ordinates, so points
    that are collinear up to rounding are kept as contacts.
    """
    t1 = (ax - ox) * (by - oy)
    t2 = (ay - oy) * (bx - ox)
    cross = t1 - t2
    band = 8.0 * _EPS * (abs(t1) + abs(t2)) + 8.0 * _EPS * (
        abs(oy) + abs(ay) + abs(by)
    ) * (bx - ox)
    return cross >= -band


def _vex_two(values, grid: SimplexGrid) -> EnvelopeSplit:
    """I = 2: lower hull of (j, f_j) by a single monotone-chain pass.

    Grid order is ascending in the first coordinate, so the nodes are already
    the 1-D abscissae 0..m.  Chain vertices keep their value exactly and get
    singleton splits; every other node interpolates its bracketing vertices.
    """
    m = grid.m
    f = values
    hull = [0]
    for j in range(1, m + 1):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            if _keep_point(o, f[o], a, f[a], j, f[j]):
                break
            hull.pop()
        hull.append(j)

    out = np.empty(m + 1)
    splits = []
    on_hull = set(hull)
    seg = 0
    for j in range(m + 1):
        if j in on_hull:
            out[j] = f[j]
            splits.append(
                SplitNode(value=float(f[j]), support=(j,), weights=(1.0,), touching=True)
            )
            continue
        while hull[seg + 1] < j:
            seg += 1
        a, b = hull[seg], hull[seg + 1]
        wa = (b - j) / (b - a)
        wb = (j - a) / (b - a)
        val = wa * f[a] + wb * f[b]
        if val > f[j]:  # only within rounding of a collinear tie
            val = f[j]
        splits.append(
            SplitNode(
                value=float(val), support=(a, b), weights=(float(wa), float(wb)),
                touching=bool(val >= f[j]),
            )
        )
        out[j] = val
    return EnvelopeSplit(values=out, splits=tuple(splits))


# -- exact rational helpers for I >= 3 --------------------------------------


def _fraction_solve(rows, rhs):
    """Solve a small dense linear system in exact rational arithmetic."""
    n = len(rows)
    M = [[Fraction(v) for v in row] + [Fraction(r)] for row, r in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        inv = M[col][col]
        M[col] = [v / inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                factor = M[r][col]
                M[r] = [v - factor * w for v, w in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def _perturbed_sign(base: Fraction, node: int, support, bary):
    """Sign of f~(node) - facet(node) under the lexicographic lift perturbation.

    base is the unperturbed difference; on a tie the node's own infinitesimal
    competes with the support's, ordered by node index (lower index wins).
    """
    if base != 0:
        return 1 if base > 0 else -1
    coeffs = {node: Fraction(1)}
    for k, lam in zip(support, bary):
        if lam != 0:
            coeffs[k] = coeffs.get(k, Fraction(0)) - lam
    for idx in sorted(coeffs):
        if coeffs[idx] != 0:
            return 1 if coeffs[idx] > 0 else -1
    return 0


def _vex_simplex(values, grid: SimplexGrid) -> EnvelopeSplit:
    """I >= 3: lower hull of the lifted cloud by valid-facet enumeration.

    A candidate support of I affinely independent nodes spans a lower-hull
    facet iff no lifted point lies below its plane; each node then takes the
    barycentric split of its first containing facet in lexicographic order.
    Verdicts inside the float error band are settled exactly.
    """
    n = grid.n_nodes
    I = grid.I
    f = values
    chart = grid.coords[:, : I - 1]
    A = np.hstack([chart.astype(float), np.ones((n, 1))])  # rows [y, 1]
    scale = float(np.max(np.abs(f))) + 1.0
    band = 1e-9 * scale

    combos = list(itertools.combinations(range(n), I))
    valid = []  # (combo, coef) in lexicographic order
    chunk = 4096
    for start in range(0, len(combos), chunk):
        batch = combos[start : start + chunk]
        sel = np.array(batch)
        M = A[sel]  # (nb, I, I)
        dets = np.linalg.det(M)
        for bi, combo in enumerate(batch):
            if abs(dets[bi]) < 0.5:  # integer determinant: zero means degenerate
                continue
            coef = np.linalg.solve(M[bi], f[list(combo)])
            diff = f - A @ coef
            members = set(combo)
            ok = True
            exact_coef = None
            for j in range(n):
                if j in members:
                    continue
                if diff[j] > band:
                    continue
                if diff[j] < -band:
                    ok = False
                    break
                # tie zone: exact verdict with perturbation
                if exact_coef is None:
                    rows = [[int(c) for c in chart[k]] + [1] for k in combo]
                    exact_coef = _fraction_solve(rows, [f[k] for k in combo])
                base = (
                    Fraction(f[j])
                    - sum(
                        ce * Fraction(int(yc))
                        for ce, yc in zip(exact_coef[:-1], chart[j])
                    )
                    - exact_coef[-1]
                )
                rows_t = [
                    [int(chart[k][r]) for k in combo] for r in range(I - 1)
                ] + [[1] * I]
                bary = _fraction_solve(rows_t, [int(c) for c in chart[j]] + [1])
                if _perturbed_sign(base, j, combo, bary) < 0:
                    ok = False
                    break
            if ok:
                valid.append((combo, coef))

    out = np.empty(n)
    splits: list = [None] * n
    for j in range(n):
        assigned = False
        target = A[j]
        for combo, coef in valid:
            sel = list(combo)
            MT = A[sel].T  # columns are the support rows
            try:
                lam = np.linalg.solve(MT, target)
            except np.linalg.LinAlgError:  # pragma: no cover - filtered above
                continue
            if np.min(lam) < -1e-9:
                continue
            if np.min(np.abs(lam)) < 1e-9 or np.min(lam) < 0:
                rows_t = [
                    [int(chart[k][r]) for k in sel] for r in range(I - 1)
                ] + [[1] * I]
                lam_ex = _fraction_solve(rows_t, [int(c) for c in chart[j]] + [1])
                if lam_ex is None or any(l < 0 for l in lam_ex):
                    continue
                support = tuple(k for k, l in zip(sel, lam_ex) if l != 0)
                weights = tuple(float(l) for l in lam_ex if l != 0)
            else:
                support = tuple(sel)
                weights = tuple(float(l) for l in lam)
            if len(support) == 1:
                out[j] = f[support[0]]
                splits[j] = SplitNode(
                    value=float(out[j]), support=support, weights=(1.0,),
                    touching=bool(support[0] == j or out[j] >= f[j]),
                )
            else:
                val = 0.0
                for k, wl in zip(support, weights):
                    val += wl * f[k]
                if val > f[j]:
                    val = f[j]
                out[j] = val
                splits[j] = SplitNode(
                    value=float(val), support=support, weights=weights,
                    touching=bool(val >= f[j]),
                )
            assigned = True
            break
        if not assigned:  # pragma: no cover - the hull covers its chart
            out[j] = f[j]
            splits[j] = SplitNode(value=float(f[j]), support=(j,), weights=(1.0,), touching=True)
    return EnvelopeSplit(values=out, splits=tuple(splits))


def vex(values, grid: SimplexGrid) -> EnvelopeSplit:
    """Lower convex envelope of values sampled on the simplex grid.

    Returns the envelope values together with one admissible barycentric
    split per node (support capped at I points, zero weights dropped,
    lexicographic tie-breaking).  Inputs affine in p up to rounding are their
    own envelope: every node touches with a singleton split.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] != grid.n_nodes:
        raise ValueError(
            f"expected {grid.n_nodes} values for I={grid.I}, m={grid.m}, "
            f"got {values.shape[0]}"
        )
    if not np.all(np.isfinite(values)):
        raise NonFiniteInput("envelope input contains NaN or Inf")
    if grid.I == 1:
        return _identity_envelope(values)
    _, residual = _affine_fit(values, grid)
    if residual <= 1e-12 * (float(np.max(np.abs(values))) + 1.0):
        return _identity_envelope(values)
    if grid.I == 2:
        return _vex_two(values, grid)
    return _vex_simplex(values, grid)


def is_discretely_convex(values, grid: SimplexGrid) -> bool:
    """Discrete convexity test used on every emitted slice.

    Checks second differences along all edge directions (e_i - e_j)/m and
    consistency with the computed hull, both at 1e-10.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(values)):
        raise NonFiniteInput("convexity test input contains NaN or Inf")
    for lo, mid, hi in grid.edge_triples():
        if values[lo] - 2.0 * values[mid] + values[hi] < -1e-10:
            return False
    env = vex(values, grid)
    return bool(np.max(np.abs(env.values - values)) <= 1e-10)
