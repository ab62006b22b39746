"""Deterministic Gaussian expectations for the one-step operator.

A tensorized Gauss-Hermite rule (probabilists' normalization) replaces the
law of the Brownian increment.  The same rule evaluates both the plain
expectation of the continuation value and the increment-correlation vector
zbar that feeds the Hamiltonian as a gradient estimate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularSigma


def tree_sum(a, axis: int = 0):
    """Pairwise (tree) summation along an axis.

    The reduction order is a function of the axis length only, so results
    are bit-identical no matter how callers chunk or schedule the work.
    """
    a = np.asarray(a)
    a = np.moveaxis(a, axis, 0)
    n = a.shape[0]
    if n == 0:
        return np.zeros(a.shape[1:], dtype=a.dtype)
    while a.shape[0] > 1:
        k = a.shape[0]
        even = (k // 2) * 2
        paired = a[0:even:2] + a[1:even:2]
        if k % 2:
            paired = np.concatenate([paired, a[even : even + 1]], axis=0)
        a = paired
    return a[0]


@dataclass(frozen=True)
class GHRule:
    """Tensorized Gauss-Hermite rule for the standard normal in d dimensions."""

    order: int
    dim: int
    nodes_1d: np.ndarray
    weights_1d: np.ndarray
    nodes: np.ndarray  # (order**dim, dim)
    weights: np.ndarray  # (order**dim,)


def _golub_welsch(order: int):
    """Nodes/weights of the probabilists' Hermite rule via the Jacobi matrix.

    Eigen-decomposition of the symmetric tridiagonal matrix with off-diagonal
    sqrt(1..Q-1); weights are squared first eigenvector components.  Nodes are
    symmetrized afterwards so that odd moments cancel pairwise.
    """
    if order == 1:
        return np.array([0.0]), np.array([1.0])
    off = np.sqrt(np.arange(1, order, dtype=float))
    J = np.diag(off, 1) + np.diag(off, -1)
    evals, evecs = np.linalg.eigh(J)
    nodes = evals
    weights = evecs[0, :] ** 2
    # enforce exact symmetry of the rule
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / tree_sum(weights)
    return nodes, weights


def _validate(rule: GHRule):
    w, z = rule.weights, rule.nodes
    total = tree_sum(w)
    if abs(total - 1.0) > 1e-14:
        raise AssertionError(f"GH weights sum to {total}, not 1")
    mean = tree_sum(w[:, None] * z, axis=0)
    if np.max(np.abs(mean)) > 1e-13:
        raise AssertionError(f"GH odd moment {mean} not zero")
    if rule.order >= 2:
        var = tree_sum(w[:, None] * z * z, axis=0)
        if np.max(np.abs(var - 1.0)) > 1e-12:
            raise AssertionError(f"GH second moment {var} not 1")


_RULE_CACHE: dict = {}


def gh_rule(order: int, dim: int) -> GHRule:
    """Build (and cache) the tensor rule; moment invariants checked once."""
    key = (int(order), int(dim))
    if key in _RULE_CACHE:
        return _RULE_CACHE[key]
    nodes_1d, weights_1d = _golub_welsch(key[0])
    idx = list(itertools.product(range(key[0]), repeat=key[1]))
    nodes = np.array([[nodes_1d[i] for i in combo] for combo in idx])
    weights = np.array(
        [math.prod(weights_1d[i] for i in combo) for combo in idx]
    )
    rule = GHRule(
        order=key[0], dim=key[1], nodes_1d=nodes_1d, weights_1d=weights_1d,
        nodes=nodes, weights=weights,
    )
    _validate(rule)
    _RULE_CACHE[key] = rule
    return rule


@dataclass(frozen=True)
class StepExpectation:
    """One-step quadrature output: continuation mean and the zbar vector."""

    mean: float
    zbar: np.ndarray  # (d,)


def _sigma_at(spec, t: float, x: np.ndarray) -> np.ndarray:
    S = spec.sigma(t, x.reshape(1, -1))[0]
    if not np.all(np.isfinite(S)):
        raise SingularSigma(f"sigma not finite at t={t}, x={x}")
    if abs(np.linalg.det(S)) <= 1e-12:
        raise SingularSigma(f"sigma singular at t={t}, x={x}")
    return S


def step_expectation(phi, spec, t_k: float, x, tau: float, rule: GHRule) -> StepExpectation:
    """Quadrature evaluation of the one-step expectations at a single point.

    phi maps a batch of states (n, d) to values (n,).  The Euler point is
    x + sigma(t_k, x) dB with dB ~ N(0, tau I) replaced by the rule, and

        mean = sum_q w_q phi(x + sqrt(tau) sigma zeta_q)
        zbar = (1/tau) sum_q w_q phi(...) (sigma^*)^{-1} sqrt(tau) zeta_q .

    zbar is accumulated with phi centered at phi(x); the shift has zero
    expectation by symmetry of the rule and makes zbar of a constant field
    exactly zero in floating point.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    S = _sigma_at(spec, t_k, x)
    root = math.sqrt(tau)
    points = x[None, :] + root * (rule.nodes @ S.T)
    vals = np.asarray(phi(points), dtype=float).reshape(-1)
    phi0 = float(np.asarray(phi(x.reshape(1, -1))).reshape(-1)[0])
    mean = float(tree_sum(rule.weights * vals))
    svec = tree_sum((rule.weights * (vals - phi0))[:, None] * rule.nodes, axis=0)
    zbar = np.linalg.solve(S.T, svec) / root
    return StepExpectation(mean=mean, zbar=zbar)


def grid_step_expectation(field_values, space, sigma_nodes, tau: float, rule: GHRule,
                          x_indices=None):
    """Vectorized one-step expectations at space nodes (all simplex columns).

    field_values: (n_x, n_p) continuation slice used for interpolation;
    sigma_nodes: (m, d, d) volatility at the queried nodes; x_indices selects
    which space nodes are queried (default: all, in grid order).  Returns
    (mean, zbar) of shapes (m, n_p) and (m, n_p, d).  Per-node arithmetic is
    independent of the batch composition, so chunked and full evaluations
    agree bit for bit.
    """
    from .grids import interpolate_many

    if x_indices is None:
        x_indices = np.arange(space.n_nodes)
    centers = space.points[x_indices]
    base = field_values[x_indices]
    m = centers.shape[0]
    d = space.d
    root = math.sqrt(tau)
    # per node: sqrt(tau) * sigma @ zeta_q, laid out (m, Q, d)
    shift = root * np.einsum("qk,xjk->xqj", rule.nodes, sigma_nodes)
    points = centers[:, None, :] + shift
    Q = rule.nodes.shape[0]
    vals = interpolate_many(field_values, space, points.reshape(m * Q, d))
    vals = vals.reshape(m, Q, -1)  # (m, Q, n_p)
    mean = tree_sum(rule.weights[None, :, None] * vals, axis=1)
    centered = vals - base[:, None, :]
    terms = (rule.weights[None, :, None, None] * centered[..., None]) * rule.nodes[None, :, None, :]
    svec = tree_sum(terms, axis=1)  # (m, n_p, d)
    ST = np.swapaxes(sigma_nodes, 1, 2)
    zbar = np.linalg.solve(ST[:, None, :, :], svec[..., None])[..., 0] / root
    return mean, zbar


def gaussian_tail_moment(C: float, tau: float, d: int) -> float:
    """Closed-form tail moment  tau^(1/2) e^(-1/(2 C^2 tau)) / (2^(d/2-1) Gamma(d/2)).

    This is the quantity bounding the defect in the one-step monotonicity
    estimate; it vanishes super-polynomially as tau -> 0.
    """
    if C <= 0 or tau <= 0:
        raise ValueError("C and tau must be positive")
    if d < 1:
        raise ValueError("d must be >= 1")
    coeff = 1.0 / (2.0 ** (d / 2.0 - 1.0) * math.gamma(d / 2.0))
    return coeff * math.sqrt(tau) * math.exp(-1.0 / (2.0 * C * C * tau))
