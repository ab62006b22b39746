"""Time, space and simplex grids plus multilinear interpolation and slice IO.

The boundary policy of the interpolator is clamping (constant extension
outside the box): weights stay nonnegative and sum to one, which preserves
pointwise bounds, ordering between fields, and discrete convexity in the
belief variable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ParseError

SNAPSHOT_MAGIC = b"VEXF1"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [t0, T] into L steps; the last node is exactly T."""

    t0: float
    T: float
    L: int

    @property
    def tau(self) -> float:
        return (self.T - self.t0) / self.L if self.L > 0 else 0.0

    @property
    def nodes(self) -> np.ndarray:
        if self.L == 0:
            return np.array([self.T])
        out = self.t0 + np.arange(self.L + 1) * self.tau
        out[-1] = self.T
        return out


class SpaceGrid:
    """Uniform tensor grid over an axis-aligned box."""

    def __init__(self, domain, counts):
        domain = np.asarray(domain, dtype=float)
        self.domain = domain
        self.counts = tuple(int(c) for c in counts)
        if any(c < 2 for c in self.counts):
            raise ValueError("every axis needs at least 2 nodes")
        self.d = domain.shape[0]
        self.axes = [
            np.linspace(domain[j, 0], domain[j, 1], self.counts[j])
            for j in range(self.d)
        ]
        self.h = np.array(
            [(domain[j, 1] - domain[j, 0]) / (self.counts[j] - 1) for j in range(self.d)]
        )
        self.n_nodes = int(np.prod(self.counts))
        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        # row-major strides for flattening per-axis indices
        strides = [1] * self.d
        for j in range(self.d - 2, -1, -1):
            strides[j] = strides[j + 1] * self.counts[j + 1]
        self._strides = np.array(strides)

    def interp_weights(self, x):
        """Clamped multilinear weights for query points x of shape (n, d).

        Returns (idx, w): corner flat indices (n, 2**d) and nonnegative
        weights (n, 2**d) summing to one (up to rounding).
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        cell = np.empty((n, self.d), dtype=np.int64)
        frac = np.empty((n, self.d))
        for j in range(self.d):
            ax = self.axes[j]
            xi = np.clip(x[:, j], ax[0], ax[-1])
            c = np.clip(np.searchsorted(ax, xi, side="right") - 1, 0, len(ax) - 2)
            cell[:, j] = c
            span = ax[c + 1] - ax[c]
            frac[:, j] = np.clip((xi - ax[c]) / span, 0.0, 1.0)
        ncorner = 1 << self.d
        idx = np.empty((n, ncorner), dtype=np.int64)
        w = np.empty((n, ncorner))
        for corner in range(ncorner):
            flat = np.zeros(n, dtype=np.int64)
            weight = np.ones(n)
            for j in range(self.d):
                hi = (corner >> j) & 1
                flat += (cell[:, j] + hi) * self._strides[j]
                weight = weight * (frac[:, j] if hi else (1.0 - frac[:, j]))
            idx[:, corner] = flat
            w[:, corner] = weight
        return idx, w

    def nearest_index(self, x):
        """Flat index of the grid node closest to each query point (n, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        flat = np.zeros(x.shape[0], dtype=np.int64)
        for j in range(self.d):
            ax = self.axes[j]
            xi = np.clip(x[:, j], ax[0], ax[-1])
            c = np.rint((xi - ax[0]) / self.h[j]).astype(np.int64)
            flat += np.clip(c, 0, len(ax) - 1) * self._strides[j]
        return flat


class SimplexGrid:
    """All probability vectors with coordinates in {0, 1/m, ..., 1}.

    Nodes are generated as integer compositions of m into I parts
    (lexicographic order) and divided once, so each node sums to one up to
    a single rounding.
    """

    def __init__(self, I: int, m: int):
        if I < 1 or m < 1:
            raise ValueError("need I >= 1 and m >= 1")
        self.I = I
        self.m = m
        comps = []
        self._compose(m, I, (), comps)
        self.coords = np.array(comps, dtype=np.int64)
        self.nodes = self.coords / float(m)
        self.n_nodes = len(comps)
        self._index = {tuple(c): k for k, c in enumerate(comps)}
        self.vertex_indices = tuple(
            self._index[tuple(m if i == j else 0 for j in range(I))] for i in range(I)
        )

    @staticmethod
    def _compose(m, parts, prefix, out):
        if parts == 1:
            out.append(prefix + (m,))
            return
        for k in range(m + 1):
            SimplexGrid._compose(m - k, parts - 1, prefix + (k,), out)

    def index_of(self, coords) -> int:
        return self._index[tuple(int(c) for c in coords)]

    def edge_triples(self):
        """Interior second-difference stencils along all edge directions.

        Yields (minus, center, plus) flat indices with
        p_plus - p_center = (e_i - e_j)/m.
        """
        triples = []
        for c_idx in range(self.n_nodes):
            c = self.coords[c_idx]
            for i in range(self.I):
                for j in range(i + 1, self.I):
                    if c[i] + 1 <= self.m and c[j] - 1 >= 0 and c[i] - 1 >= 0 and c[j] + 1 <= self.m:
                        plus = list(c)
                        plus[i] += 1
                        plus[j] -= 1
                        minus = list(c)
                        minus[i] -= 1
                        minus[j] += 1
                        triples.append(
                            (self._index[tuple(minus)], c_idx, self._index[tuple(plus)])
                        )
        return triples


def simplex_nodes(I: int, m: int) -> SimplexGrid:
    """Simplex grid with C(m + I - 1, I - 1) nodes, containing all vertices."""
    return SimplexGrid(I, m)


@dataclass(frozen=True)
class Grids:
    """Bundle of the three grids a solve runs on."""

    time: TimeGrid
    space: SpaceGrid
    simplex: SimplexGrid


def build_grids(config) -> Grids:
    return Grids(
        time=TimeGrid(config.game.t0, config.game.T, config.discretization.L),
        space=SpaceGrid(config.game.domain, config.discretization.space_nodes),
        simplex=SimplexGrid(config.game.I, config.discretization.simplex_m),
    )


@dataclass
class ValueField:
    """One time slice of the scheme: values indexed by (space node, simplex node)."""

    k: int
    t: float
    values: np.ndarray  # (n_x, n_p)
    space: SpaceGrid
    simplex: SimplexGrid
    problem_hash: str = ""

    def copy_with(self, k: int, t: float, values: np.ndarray) -> "ValueField":
        return ValueField(
            k=k, t=t, values=values, space=self.space, simplex=self.simplex,
            problem_hash=self.problem_hash,
        )


def interpolate(field: ValueField, x, p_index: int) -> float:
    """Multilinear interpolation of one slice at a point x for a fixed p node.

    Total on all of R^d: x is clamped to the box first, so the result never
    leaves the range of the stored values.
    """
    idx, w = field.space.interp_weights(np.asarray(x, dtype=float).reshape(1, -1))
    col = field.values[:, p_index]
    out = 0.0
    for c in range(idx.shape[1]):
        out = out + w[0, c] * col[idx[0, c]]
    return float(out)


def interpolate_many(field_values, space: SpaceGrid, x):
    """Interpolate all simplex columns at once for query points (n, d).

    Returns (n, n_p).  Corner contributions accumulate in a fixed order, so
    the result does not depend on how callers chunk the queries.
    """
    idx, w = space.interp_weights(x)
    out = w[:, 0:1] * field_values[idx[:, 0]]
    for c in range(1, idx.shape[1]):
        out = out + w[:, c : c + 1] * field_values[idx[:, c]]
    return out


# ---------------------------------------------------------------------------
# Slice export


def write_snapshot(field: ValueField, path):
    """Binary slice snapshot: magic "VEXF1", dims, then little-endian f64."""
    values = np.ascontiguousarray(field.values, dtype="<f8")
    n_x, n_p = values.shape
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<III", field.k, n_x, n_p))
        fh.write(struct.pack("<d", field.t))
        fh.write(values.tobytes(order="C"))


def read_snapshot(path):
    """Read a binary snapshot; returns (k, t, values)."""
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != SNAPSHOT_MAGIC:
            raise ParseError(f"{path}: bad magic {magic!r}")
        k, n_x, n_p = struct.unpack("<III", fh.read(12))
        (t,) = struct.unpack("<d", fh.read(8))
        data = np.frombuffer(fh.read(8 * n_x * n_p), dtype="<f8")
        if data.size != n_x * n_p:
            raise ParseError(f"{path}: truncated payload")
    return k, t, data.reshape(n_x, n_p).copy()


def write_slices_csv(fields, grids: Grids, path):
    """CSV export with columns (k, t_k, x_1..x_d, p_1..p_I, value)."""
    d = grids.space.d
    I = grids.simplex.I
    header = (
        ["k", "t_k"]
        + [f"x_{j + 1}" for j in range(d)]
        + [f"p_{i + 1}" for i in range(I)]
        + ["value"]
    )
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for field in fields:
            for xi in range(grids.space.n_nodes):
                xrow = grids.space.points[xi]
                for pi in range(grids.simplex.n_nodes):
                    prow = grids.simplex.nodes[pi]
                    cells = (
                        [str(field.k), repr(float(field.t))]
                        + [repr(float(c)) for c in xrow]
                        + [repr(float(c)) for c in prow]
                        + [repr(float(field.values[xi, pi]))]
                    )
                    fh.write(",".join(cells) + "\n")
