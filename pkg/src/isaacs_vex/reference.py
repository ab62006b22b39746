"""Slow independent oracles used to certify the fast paths on small inputs.

None of these share code with the solver: expectations are plain Monte
Carlo, the envelope is exhaustive support enumeration (I = 2) or a generic
simplex-method LP (I >= 3), and the coefficient-free problem has a closed
form.  They exist to certify, not to perform, and are size-capped by
precondition.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import UnsupportedG


@dataclass(frozen=True)
class McStepExpectation:
    mean: float
    zbar: np.ndarray
    se_mean: float
    se_zbar: np.ndarray


def mc_step_expectation(phi, spec, t: float, x, tau: float, n: int, seed: int) -> McStepExpectation:
    """Plain Monte Carlo estimate of the one-step expectations with errors.

    Unbiased for both the continuation mean and zbar; the reported standard
    errors are per-component sample standard deviations over sqrt(n).
    """
    if n < 100:
        raise ValueError("need n >= 100 samples")
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float).reshape(-1)
    S = spec.sigma(t, x.reshape(1, -1))[0]
    dB = math.sqrt(tau) * rng.standard_normal((n, spec.d))
    points = x[None, :] + dB @ S.T
    vals = np.asarray(phi(points), dtype=float).reshape(-1)
    mean = float(vals.mean())
    se_mean = float(vals.std(ddof=1) / math.sqrt(n))
    eta = np.linalg.solve(S.T, dB.T).T / tau  # (sigma^*)^{-1} dB / tau
    zsamples = vals[:, None] * eta
    zbar = zsamples.mean(axis=0)
    se_zbar = zsamples.std(axis=0, ddof=1) / math.sqrt(n)
    return McStepExpectation(mean=mean, zbar=zbar, se_mean=se_mean, se_zbar=se_zbar)


def envelope_oracle(values, grid) -> np.ndarray:
    """Discrete convex envelope by direct minimization over supports.

    For each node p the envelope is  min sum_j lambda_j f_j  over all
    nonnegative grid-node weights with barycenter p.  I = 2 enumerates all
    bracketing pairs exhaustively; I >= 3 solves the small LP with a generic
    dual-simplex routine.  Capped at 200 nodes by precondition.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    n = grid.n_nodes
    if values.shape[0] != n:
        raise ValueError("values length does not match the grid")
    if n > 200:
        raise ValueError("oracle capped at 200 simplex nodes")
    if grid.I == 1:
        return values.copy()
    if grid.I == 2:
        out = values.copy()
        for j in range(n):
            best = values[j]
            for a in range(0, j + 1):
                for b in range(j, n):
                    if a == b:
                        continue
                    wa = (b - j) / (b - a)
                    cand = wa * values[a] + (1.0 - wa) * values[b]
                    if cand < best:
                        best = cand
            out[j] = best
        return out
    A_eq = grid.nodes.T  # (I, n); the weight-sum row is implied
    out = np.empty(n)
    for j in range(n):
        res = linprog(
            c=values, A_eq=A_eq, b_eq=grid.nodes[j], bounds=(0, None),
            method="highs-ds",
        )
        if not res.success:  # pragma: no cover - feasible by construction
            raise RuntimeError(f"envelope LP failed at node {j}: {res.message}")
        out[j] = res.fun
    return out


def _match_sin_family(g_src: str):
    """Recognize g(x) = sin(x1) + c (and the obvious rearrangements).

    Returns (amplitude, offset) or None.
    """
    try:
        tree = ast.parse(g_src, mode="eval").body
    except SyntaxError:
        return None

    def is_sin(node):
        return (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id == "sin"
            and len(node.args) == 1
            and isinstance(node.args[0], ast.Name)
            and node.args[0].id == "x1"
        )

    def const(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            inner = const(node.operand)
            return None if inner is None else -inner
        return None

    def amp_sin(node):
        # sin(x1) | c * sin(x1) | -sin(x1)
        if is_sin(node):
            return 1.0
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            inner = amp_sin(node.operand)
            return None if inner is None else -inner
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
            for a, b in ((node.left, node.right), (node.right, node.left)):
                c = const(a)
                if c is not None and is_sin(b):
                    return c
        return None

    a = amp_sin(tree)
    if a is not None:
        return a, 0.0
    if isinstance(tree, ast.BinOp) and isinstance(tree.op, (ast.Add, ast.Sub)):
        sign = 1.0 if isinstance(tree.op, ast.Add) else -1.0
        a = amp_sin(tree.left)
        c = const(tree.right)
        if a is not None and c is not None:
            return a, sign * c
        if isinstance(tree.op, ast.Add):
            a = amp_sin(tree.right)
            c = const(tree.left)
            if a is not None and c is not None:
                return a, c
    return None


def heat_closed_form(x, t: float, T: float, sigma: float, g: str) -> float:
    """Exact E[g(x + sigma (B_T - B_t))] for g in the sin + constant family.

    Gaussian smoothing of a pure frequency:  E[sin(x + s Z)] = e^{-s^2/2} sin x
    with Z standard normal and s^2 = sigma^2 (T - t).
    """
    matched = _match_sin_family(g)
    if matched is None:
        raise UnsupportedG(f"no closed form for terminal payoff {g!r}")
    amp, off = matched
    damp = math.exp(-0.5 * sigma * sigma * (T - t))
    x = float(np.asarray(x).reshape(-1)[0])
    return amp * damp * math.sin(x) + off


def heat_value_closed_form(x, t: float, T: float, sigma: float, g_list, p) -> float:
    """Closed-form game value sum_i p_i E[g_i(X_T)] for sin-family payoffs."""
    p = np.asarray(p, dtype=float).reshape(-1)
    total = 0.0
    for pi, g in zip(p, g_list):
        total += pi * heat_closed_form(x, t, T, sigma, g)
    return total
