"""One-step belief kernels, path simulation and the one-step DPP check.

The informed player's optimal belief manipulation is encoded by the envelope
splits: from belief node p with split (lambda_l, pi^l), the scenario-i kernel
jumps to pi^l with probability lambda_l (pi^l)_i / p_i.  Averaged over the
hidden scenario the jump probabilities are exactly lambda_l, which makes the
belief process a martingale ending in full revelation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .convexify import SplitNode
from .errors import InconsistentSplit
from .grids import Grids
from .hamiltonian import ham_grid
from .quadrature import GHRule, grid_step_expectation


@dataclass(frozen=True)
class KernelNode:
    """Belief transition kernel at one (time step, x node, p node).

    atoms/lam: unconditional categorical (the split itself);
    per_scenario[i]: (atom indices, probabilities) conditioned on scenario i.
    """

    p_index: int
    atoms: tuple
    lam: tuple
    per_scenario: tuple


def kernel_from_split(split: SplitNode, p_index: int, simplex) -> KernelNode:
    """Bayes-consistent kernel of one envelope split.

    Raises InconsistentSplit when the split fails the coordinatewise
    barycenter identity sum_l lambda_l (pi^l)_i = p_i beyond 1e-9.
    """
    p = simplex.nodes[p_index]
    atoms = split.support
    lam = split.weights
    recon = np.zeros(simplex.I)
    for a, w in zip(atoms, lam):
        recon += w * simplex.nodes[a]
    if np.max(np.abs(recon - p)) > 1e-9:
        raise InconsistentSplit(
            f"split at node {p_index} reconstructs {recon}, expected {p}"
        )
    per_scenario = []
    for i in range(simplex.I):
        if p[i] <= 0.0:
            per_scenario.append(((p_index,), (1.0,)))
            continue
        idx = []
        probs = []
        for a, w in zip(atoms, lam):
            q = w * simplex.nodes[a][i] / p[i]
            if q > 0.0:
                idx.append(a)
                probs.append(q)
        per_scenario.append((tuple(idx), tuple(probs)))
    return KernelNode(
        p_index=p_index, atoms=tuple(atoms), lam=tuple(lam),
        per_scenario=tuple(per_scenario),
    )


@dataclass(frozen=True)
class BeliefPath:
    """One simulated path: hidden scenario, states, and belief node indices.

    beliefs has length L+2: entries 0..L are the stepwise beliefs, entry L+1
    is the forced terminal revelation e^i.
    """

    path_id: int
    scenario: int
    seed: int
    states: np.ndarray  # (L+1, d)
    beliefs: np.ndarray  # (L+2,) simplex node indices


def _nearest_simplex_node(simplex, p) -> int:
    p = np.asarray(p, dtype=float).reshape(-1)
    dist = np.linalg.norm(simplex.nodes - p[None, :], axis=1)
    return int(np.argmin(dist))


def simulate_beliefs(fields, splits, spec, grids: Grids, rule: GHRule,
                     n_paths: int, seed: int, x0=None, p0=None):
    """Simulate belief martingale paths conditioned on the hidden scenario.

    The state follows the uncontrolled Euler dynamics with sampled Gaussian
    increments; the belief jumps by the kernel of the stored split at the
    nearest x node.  Each path consumes its own counter-based RNG stream
    (Philox keyed by (seed, path id)), so output is reproducible and
    independent of scheduling.  The quadrature rule is part of the solve
    artifacts' signature but unused here: increments are sampled, not
    integrated.
    """
    del fields, rule
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    L = grids.time.L
    tau = grids.time.tau
    d = grids.space.d
    simplex = grids.simplex

    if x0 is None:
        x0 = 0.5 * (spec.domain[:, 0] + spec.domain[:, 1])
    x0 = np.asarray(x0, dtype=float).reshape(d)
    if p0 is None:
        p0 = np.full(spec.I, 1.0 / spec.I)
    p0_idx = _nearest_simplex_node(simplex, p0)
    p0_node = simplex.nodes[p0_idx]

    # per-path streams, drawn up front: scenario, L jump uniforms, L normals
    uniforms = np.empty((n_paths, L + 1))
    normals = np.empty((n_paths, L, d))
    for pid in range(n_paths):
        gen = np.random.Generator(np.random.Philox(key=[seed, pid]))
        uniforms[pid] = gen.random(L + 1)
        normals[pid] = gen.standard_normal((L, d))

    cump = np.cumsum(p0_node)
    scen = np.searchsorted(cump, uniforms[:, 0], side="right")
    scen = np.minimum(scen, spec.I - 1).astype(np.int64)

    states = np.empty((n_paths, L + 1, d))
    states[:, 0] = x0
    beliefs = np.empty((n_paths, L + 2), dtype=np.int64)
    beliefs[:, 0] = p0_idx

    kernel_cache: dict = {}
    X = np.tile(x0, (n_paths, 1))
    p_idx = np.full(n_paths, p0_idx, dtype=np.int64)
    for k in range(L):
        step_splits = splits[k]
        xi = grids.space.nearest_index(X)
        keys = (xi * simplex.n_nodes + p_idx) * spec.I + scen
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        boundaries = np.flatnonzero(np.r_[True, sorted_keys[1:] != sorted_keys[:-1]])
        u_step = uniforms[:, 1 + k]
        nxt = np.empty(n_paths, dtype=np.int64)
        for b0, b1 in zip(boundaries, np.r_[boundaries[1:], len(order)]):
            members = order[b0:b1]
            key = sorted_keys[b0]
            i_scen = int(key % spec.I)
            rest = key // spec.I
            pi = int(rest % simplex.n_nodes)
            xnode = int(rest // simplex.n_nodes)
            ck = (k, xnode, pi)
            kernel = kernel_cache.get(ck)
            if kernel is None:
                kernel = kernel_from_split(
                    step_splits.envelopes[xnode].splits[pi], pi, simplex
                )
                kernel_cache[ck] = kernel
            idx, probs = kernel.per_scenario[i_scen]
            if len(idx) == 1:
                nxt[members] = idx[0]
            else:
                cum = np.cumsum(probs)
                pos = np.searchsorted(cum, u_step[members], side="right")
                pos = np.minimum(pos, len(idx) - 1)
                nxt[members] = np.asarray(idx)[pos]
        p_idx = nxt
        beliefs[:, k + 1] = p_idx

        t_k = float(grids.time.nodes[k])
        sig = spec.sigma(t_k, X)  # (n_paths, d, d)
        X = X + np.sqrt(tau) * np.einsum("njk,nk->nj", sig, normals[:, k])
        states[:, k + 1] = X

    for pid in range(n_paths):
        beliefs[pid, L + 1] = simplex.vertex_indices[scen[pid]]

    return [
        BeliefPath(
            path_id=pid, scenario=int(scen[pid]), seed=seed,
            states=states[pid], beliefs=beliefs[pid],
        )
        for pid in range(n_paths)
    ]


def dpp_residual(fields, splits, spec, grids: Grids, rule: GHRule,
                 k: int, x_index: int, p_index: int) -> float:
    """One-step dynamic-programming residual at a grid node.

    Re-evaluates, with quadrature weights rather than sampling,

        | V(t_k, x, p) - sum_l lambda_l ( E[V(t_{k+1}, X, pi^l)]
                                          + tau H(t_k, x, zbar(x, pi^l), pi^l) ) |

    using the stored split at (k, x, p).  The re-evaluation follows the same
    arithmetic path as the solver step, so the residual reflects only the
    envelope identity.
    """
    if k >= grids.time.L:
        raise ValueError("dpp_residual needs k < L")
    t_k = float(grids.time.nodes[k])
    tau = grids.time.tau
    idx = np.array([x_index])
    sigma_nodes = spec.sigma(t_k, grids.space.points[idx])
    mean, zbar = grid_step_expectation(
        fields[k + 1].values, grids.space, sigma_nodes, tau, rule, x_indices=idx,
    )
    B, Lcost = spec.control_table(t_k, grids.space.points[idx])
    H, _ = ham_grid(B, Lcost, zbar, grids.simplex.nodes)
    pre = mean + tau * H  # (1, n_p)
    split = splits[k].envelopes[x_index].splits[p_index]
    acc = 0.0
    for a, w in zip(split.support, split.weights):
        acc += w * pre[0, a]
    return abs(float(fields[k].values[x_index, p_index]) - acc)


# ---------------------------------------------------------------------------
# Export helpers


def write_paths_csv(paths, grids: Grids, out_path):
    """CSV rows (path_id, i, k, t_k, x..., p...); the extra row k = L+1 holds
    the forced terminal revelation with the final state repeated."""
    d = grids.space.d
    I = grids.simplex.I
    nodes = grids.time.nodes
    header = (
        ["path_id", "i", "k", "t_k"]
        + [f"x_{j + 1}" for j in range(d)]
        + [f"p_{i + 1}" for i in range(I)]
    )
    with open(out_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for path in paths:
            L = path.states.shape[0] - 1
            for k in range(L + 2):
                xrow = path.states[min(k, L)]
                prow = grids.simplex.nodes[path.beliefs[k]]
                t_k = float(nodes[min(k, L)])
                cells = (
                    [str(path.path_id), str(path.scenario), str(k), repr(t_k)]
                    + [repr(float(c)) for c in xrow]
                    + [repr(float(c)) for c in prow]
                )
                fh.write(",".join(cells) + "\n")


def belief_summary(paths, grids: Grids) -> dict:
    """Martingale drift per step and the revelation-time histogram."""
    n = len(paths)
    L = paths[0].states.shape[0] - 1
    I = grids.simplex.I
    beliefs = np.array([p.beliefs for p in paths])  # (n, L+2)
    coords = grids.simplex.nodes[beliefs]  # (n, L+2, I)
    p0 = coords[:, 0, :].mean(axis=0)
    drift = []
    for k in range(L + 2):
        mean_k = coords[:, k, :].mean(axis=0)
        var_k = coords[:, k, :].var(axis=0)
        band = 4.0 * np.sqrt(np.maximum(var_k, 1e-300) / n)
        drift.append(
            {
                "k": k,
                "mean_belief": [float(v) for v in mean_k],
                "max_drift": float(np.max(np.abs(mean_k - p0))),
                "band_4se": float(np.max(band)),
            }
        )
    vertex_set = set(grids.simplex.vertex_indices)
    hist: dict = {}
    for p in paths:
        hit = next(
            (k for k in range(L + 2) if int(p.beliefs[k]) in vertex_set), L + 1
        )
        hist[hit] = hist.get(hit, 0) + 1
    return {
        "n_paths": n,
        "drift_per_step": drift,
        "revelation_histogram": {str(k): hist[k] for k in sorted(hist)},
    }


def write_belief_summary(paths, grids: Grids, out_path):
    with open(out_path, "w") as fh:
        json.dump(belief_summary(paths, grids), fh, indent=2, sort_keys=True)
        fh.write("\n")
