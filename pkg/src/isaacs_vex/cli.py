"""Command-line front end: solve, refine, beliefs, verify.

Exit codes: 0 success, 1 property failure (verify), 2 usage or validation
error, 3 numerical divergence.  All outputs are plain CSV/JSON plus the
binary slice snapshots; nothing depends on wall clock except timing fields
in the report, which are marked as such.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import belief, reference
from .convexify import EnvelopeSplit, SplitNode, is_discretely_convex, vex
from .errors import (
    DivergedField,
    IsaacsVexError,
    MissingArtifacts,
    ParseError,
    UnknownProblem,
    ValidationError,
)
from .grids import (
    Grids,
    SimplexGrid,
    SpaceGrid,
    TimeGrid,
    ValueField,
    build_grids,
    read_snapshot,
    write_slices_csv,
    write_snapshot,
)
from .model import builtin_config, builtin_names, load_config
from .quadrature import gaussian_tail_moment, gh_rule, grid_step_expectation
from .scheme import StepSplits, backward_step, diagnostics, solve, terminal_slice

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3


def _resolve_config(path: str):
    """Load a config file; bare built-in names are accepted as a convenience."""
    p = Path(path)
    if not p.exists() and path in builtin_names():
        return builtin_config(path)
    return load_config(p)


def _resolve_workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("ISAACS_VEX_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"ISAACS_VEX_WORKERS={env!r} is not an integer")
    return 1


# ---------------------------------------------------------------------------
# Artifact IO


def write_splits_csv(splits: dict, grids: Grids, path):
    """CSV dump of all splits: one row per split component."""
    d = grids.space.d
    I = grids.simplex.I
    header = (
        ["k"]
        + [f"x_{j + 1}" for j in range(d)]
        + [f"p_{i + 1}" for i in range(I)]
        + ["l", "lambda_l"]
        + [f"pi_{i + 1}" for i in range(I)]
    )
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for k in sorted(splits):
            table = splits[k]
            for xi, env in enumerate(table.envelopes):
                xrow = grids.space.points[xi]
                for pi, node in enumerate(env.splits):
                    prow = grids.simplex.nodes[pi]
                    for li, (sup, w) in enumerate(zip(node.support, node.weights)):
                        pirow = grids.simplex.nodes[sup]
                        cells = (
                            [str(k)]
                            + [repr(float(c)) for c in xrow]
                            + [repr(float(c)) for c in prow]
                            + [str(li), repr(float(w))]
                            + [repr(float(c)) for c in pirow]
                        )
                        fh.write(",".join(cells) + "\n")


def save_splits_npz(splits: dict, path):
    ks, xs, ps, lens, touch = [], [], [], [], []
    sup_flat, w_flat, val = [], [], []
    for k in sorted(splits):
        for xi, env in enumerate(splits[k].envelopes):
            for pi, node in enumerate(env.splits):
                ks.append(k)
                xs.append(xi)
                ps.append(pi)
                lens.append(len(node.support))
                touch.append(1 if node.touching else 0)
                val.append(node.value)
                sup_flat.extend(node.support)
                w_flat.extend(node.weights)
    np.savez_compressed(
        path,
        entry_k=np.array(ks, dtype=np.int64),
        entry_x=np.array(xs, dtype=np.int64),
        entry_p=np.array(ps, dtype=np.int64),
        entry_len=np.array(lens, dtype=np.int64),
        entry_touch=np.array(touch, dtype=np.int64),
        entry_value=np.array(val, dtype=float),
        support=np.array(sup_flat, dtype=np.int64),
        weights=np.array(w_flat, dtype=float),
    )


def load_splits_npz(path, grids: Grids) -> dict:
    data = np.load(path)
    n_x = grids.space.n_nodes
    n_p = grids.simplex.n_nodes
    offsets = np.concatenate([[0], np.cumsum(data["entry_len"])])
    per_k: dict = {}
    for row in range(len(data["entry_k"])):
        k = int(data["entry_k"][row])
        xi = int(data["entry_x"][row])
        pi = int(data["entry_p"][row])
        lo, hi = offsets[row], offsets[row + 1]
        node = SplitNode(
            value=float(data["entry_value"][row]),
            support=tuple(int(s) for s in data["support"][lo:hi]),
            weights=tuple(float(w) for w in data["weights"][lo:hi]),
            touching=bool(data["entry_touch"][row]),
        )
        per_k.setdefault(k, {})[(xi, pi)] = node
    out: dict = {}
    for k, nodes in per_k.items():
        envs = []
        for xi in range(n_x):
            split_nodes = tuple(nodes[(xi, pi)] for pi in range(n_p))
            values = np.array([s.value for s in split_nodes])
            envs.append(EnvelopeSplit(values=values, splits=split_nodes))
        out[k] = StepSplits(k=k, envelopes=tuple(envs))
    return out


def write_solve_artifacts(config, grids: Grids, result, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    if config.output.write_binary:
        for f in result.fields:
            write_snapshot(f, out_dir / f"slice_{f.k:04d}.vexf")
    if config.output.write_csv:
        write_slices_csv(result.fields, grids, out_dir / "slices.csv")
    if config.output.write_splits:
        write_splits_csv(result.splits, grids, out_dir / "splits.csv")
        save_splits_npz(result.splits, out_dir / "splits.npz")
    (out_dir / "report.json").write_text(result.report.to_json() + "\n")


def load_solve_artifacts(solve_dir: Path):
    """Reload config, grids, slices and splits from a solve output directory."""
    cfg_path = solve_dir / "config.json"
    if not cfg_path.exists():
        raise MissingArtifacts(f"no config.json under {solve_dir}")
    config = load_config(cfg_path)
    grids = build_grids(config)
    L = grids.time.L
    fields = []
    for k in range(L + 1):
        snap = solve_dir / f"slice_{k:04d}.vexf"
        if not snap.exists():
            raise MissingArtifacts(f"missing slice snapshot {snap}")
        kk, t, values = read_snapshot(snap)
        fields.append(
            ValueField(
                k=kk, t=t, values=values, space=grids.space,
                simplex=grids.simplex, problem_hash=config.problem_hash(),
            )
        )
    splits_path = solve_dir / "splits.npz"
    if not splits_path.exists():
        raise MissingArtifacts(f"missing splits table {splits_path}")
    splits = load_splits_npz(splits_path, grids)
    return config, grids, fields, splits


# ---------------------------------------------------------------------------
# Commands


def cmd_solve(args) -> int:
    config = _resolve_config(args.config)
    workers = _resolve_workers(args)
    grids = build_grids(config)
    rule = gh_rule(config.quad_order, config.game.d)
    result = solve(
        config.game, grids, rule, workers=workers,
        problem_name=config.name, problem_hash=config.problem_hash(),
    )
    out_dir = Path(args.out)
    write_solve_artifacts(config, grids, result, out_dir)
    rep = result.report
    print(
        f"solved {config.name}: L={grids.time.L} tau={grids.time.tau:.5g} "
        f"space={grids.space.counts} m={grids.simplex.m} Q={rule.order}"
    )
    print(
        f"  value range [{min(rep.min_value):.6g}, {max(rep.max_value):.6g}]  "
        f"max isaacs gap {max(rep.isaacs_gap):.3e}  "
        f"total {rep.total_seconds:.2f}s (wall clock)"
    )
    for w in rep.warnings:
        print(f"  warning: {w}")
    print(f"  artifacts in {out_dir}")
    return EXIT_OK


def _interior_mask(grids: Grids, spec) -> np.ndarray:
    margin = 3.0 * spec.bounds.sigma_inf * math.sqrt(spec.T - spec.t0)
    lo = spec.domain[:, 0] + margin
    hi = spec.domain[:, 1] - margin
    pts = grids.space.points
    mask = np.all((pts >= lo) & (pts <= hi), axis=1)
    if not mask.any():
        return np.ones(len(pts), dtype=bool)
    return mask


def _heat_sigma_constant(spec) -> float | None:
    """Constant scalar volatility if the problem is coefficient-free, else None."""
    if spec.d != 1 or spec.bounds.b_inf != 0.0 or spec.bounds.l_inf != 0.0:
        return None
    ts = np.linspace(spec.t0, spec.T, 5)
    xs = np.linspace(spec.domain[0, 0], spec.domain[0, 1], 7).reshape(-1, 1)
    vals = np.array([spec.sigma(float(t), xs)[:, 0, 0] for t in ts])
    if np.ptp(vals) != 0.0:
        return None
    return float(vals.flat[0])


def cmd_refine(args) -> int:
    if args.levels < 2:
        raise ValidationError("refine needs --levels >= 2")
    config = _resolve_config(args.config)
    workers = _resolve_workers(args)
    base = config.discretization
    sigma_const = _heat_sigma_constant(config.game)
    g_exprs = [e.src for e in config.game.g_exprs]

    runs = []
    for level in range(args.levels):
        factor = 2**level
        grids = Grids(
            time=TimeGrid(config.game.t0, config.game.T, base.L * factor),
            space=SpaceGrid(
                config.game.domain,
                tuple((n - 1) * factor + 1 for n in base.space_nodes),
            ),
            simplex=SimplexGrid(config.game.I, base.simplex_m * factor),
        )
        rule = gh_rule(config.quad_order, config.game.d)
        result = solve(config.game, grids, rule, workers=workers,
                       problem_name=config.name)
        runs.append((grids, result))

    rows = []
    for level in range(args.levels - 1):
        coarse_grids, coarse = runs[level]
        fine_grids, fine = runs[level + 1]
        mask = _interior_mask(coarse_grids, config.game)
        # halving h nests the grids: coarse axis index i sits at fine index 2i
        axis_idx = np.unravel_index(
            np.arange(coarse_grids.space.n_nodes), coarse_grids.space.counts
        )
        x_map = np.ravel_multi_index(
            tuple(2 * ix for ix in axis_idx), fine_grids.space.counts
        )
        p_map = np.array(
            [fine_grids.simplex.index_of(2 * c) for c in coarse_grids.simplex.coords]
        )
        vc = coarse.fields[0].values[mask]
        vf = fine.fields[0].values[np.ix_(x_map[mask], p_map)]
        diff = float(np.max(np.abs(vc - vf)))
        row = {"level": level, "sup_diff_interior": diff}
        if sigma_const is not None:
            for name, grids_r, res in (
                ("err_coarse", coarse_grids, coarse),
                ("err_fine", fine_grids, fine),
            ):
                msk = _interior_mask(grids_r, config.game)
                exact = np.array(
                    [
                        [
                            reference.heat_value_closed_form(
                                x, config.game.t0, config.game.T, sigma_const,
                                g_exprs, grids_r.simplex.nodes[pi],
                            )
                            for pi in range(grids_r.simplex.n_nodes)
                        ]
                        for x in grids_r.space.points[msk]
                    ]
                )
                row[name] = float(np.max(np.abs(res.fields[0].values[msk] - exact)))
        rows.append(row)
    for i in range(1, len(rows)):
        prev, cur = rows[i - 1]["sup_diff_interior"], rows[i]["sup_diff_interior"]
        rows[i]["ratio"] = prev / cur if cur > 0 else float("inf")

    print(f"refinement study for {config.name} ({args.levels} levels)")
    for row in rows:
        bits = [f"level {row['level']}->{row['level'] + 1}:",
                f"sup diff {row['sup_diff_interior']:.4e}"]
        if "ratio" in row:
            bits.append(f"ratio {row['ratio']:.2f}")
        if "err_coarse" in row:
            bits.append(f"oracle err {row['err_coarse']:.4e} -> {row['err_fine']:.4e}")
        print("  " + " ".join(bits))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "refine.json").write_text(json.dumps(rows, indent=2) + "\n")
        print(f"  table written to {out_dir / 'refine.json'}")
    return EXIT_OK


def cmd_beliefs(args) -> int:
    solve_dir = Path(args.solve_dir)
    config, grids, fields, splits = load_solve_artifacts(solve_dir)
    rule = gh_rule(config.quad_order, config.game.d)
    paths = belief.simulate_beliefs(
        fields, splits, config.game, grids, rule,
        n_paths=args.paths, seed=args.seed,
        x0=config.output.x0, p0=config.output.p0,
    )
    out_dir = Path(args.out) if args.out else solve_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    belief.write_paths_csv(paths, grids, out_dir / "paths.csv")
    belief.write_belief_summary(paths, grids, out_dir / "belief_summary.json")
    summary = belief.belief_summary(paths, grids)
    worst = max(row["max_drift"] for row in summary["drift_per_step"])
    print(f"simulated {args.paths} paths (seed {args.seed}); max mean-belief drift {worst:.4g}")
    print(f"  outputs in {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify: property battery


def _verify_checks(config, workers: int, seed: int):
    """Yield (name, ok, detail) for each verification property."""
    spec = config.game
    rng = np.random.default_rng(seed)

    # declared bounds versus sampled coefficients and the terminal payoff
    ok = True
    detail = ""
    lo, hi = spec.domain[:, 0], spec.domain[:, 1]
    ts = rng.uniform(spec.t0, spec.T, size=100)
    xs = rng.uniform(lo, hi, size=(100, spec.d))
    us = spec.controls_U[rng.integers(0, len(spec.controls_U), size=100)]
    vs = spec.controls_V[rng.integers(0, len(spec.controls_V), size=100)]
    for t, x, u, v in zip(ts, xs, us, vs):
        bval = spec.drift(float(t), x, u, v)
        if np.max(np.abs(bval)) > spec.bounds.b_inf + 1e-9:
            ok, detail = False, f"|b|={np.max(np.abs(bval)):.3g} > declared {spec.bounds.b_inf}"
            break
        lval = spec.running_cost(float(t), x, u, v)
        if np.max(np.abs(lval)) > spec.bounds.l_inf + 1e-9:
            ok, detail = False, f"|l|={np.max(np.abs(lval)):.3g} > declared {spec.bounds.l_inf}"
            break
        S = spec.sigma(float(t), x.reshape(1, -1))[0]
        if np.linalg.norm(S, 2) > spec.bounds.sigma_inf + 1e-9:
            ok, detail = False, "sigma exceeds declared bound"
            break
        if np.linalg.norm(np.linalg.inv(S), 2) > spec.bounds.sigma_inv_inf + 1e-9:
            ok, detail = False, "sigma inverse exceeds declared bound"
            break
    grids = build_grids(config)
    gvals = spec.terminal(grids.space.points)
    if ok and np.max(np.abs(gvals)) > spec.bounds.g_inf + 1e-9:
        ok, detail = False, f"|g| exceeds declared {spec.bounds.g_inf}"
    if ok and grids.space.n_nodes > 1:
        from .scheme import _slice_lip_x

        lip_term = _slice_lip_x(gvals @ grids.simplex.nodes.T, grids.space)
        if lip_term > 1.05 * spec.bounds.lip_g + 1e-9:
            ok, detail = (
                False,
                f"terminal Lipschitz {lip_term:.3g} exceeds declared {spec.bounds.lip_g}",
            )
    yield "declared-bounds", ok, detail

    rule = gh_rule(config.quad_order, spec.d)
    w, z = rule.weights, rule.nodes
    moments_ok = (
        abs(float(np.sum(w)) - 1.0) <= 1e-13
        and np.max(np.abs(w @ z)) <= 1e-12
        and np.max(np.abs(w @ (z * z) - 1.0)) <= 1e-11
    )
    yield "quadrature-moments", moments_ok, ""

    ok = True
    detail = ""
    for C, tau in ((10.0, 0.04), (5.0, 0.1), (2.0, 0.25)):
        closed = gaussian_tail_moment(C, tau, 1)
        samples = math.sqrt(tau) * rng.standard_normal(200_000)
        vals = np.where(np.abs(samples) >= 1.0 / C, np.abs(samples), 0.0)
        mc = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
        if abs(mc - closed) > 4.0 * se:
            ok = False
            detail = f"(C={C}, tau={tau}): |{mc:.5g} - {closed:.5g}| > 4 SE"
            break
    yield "tail-moment-vs-mc", ok, detail

    ok = True
    detail = ""
    g2 = SimplexGrid(2, 12)
    for trial in range(10):
        f = rng.normal(size=g2.n_nodes)
        fast = vex(f, g2).values
        slow = reference.envelope_oracle(f, g2)
        if np.max(np.abs(fast - slow)) > 1e-9:
            ok, detail = False, f"I=2 oracle mismatch on trial {trial}"
            break
    if ok:
        g3 = SimplexGrid(3, 4)
        for trial in range(3):
            f = rng.normal(size=g3.n_nodes)
            fast = vex(f, g3).values
            slow = reference.envelope_oracle(f, g3)
            if np.max(np.abs(fast - slow)) > 1e-9:
                ok, detail = False, f"I=3 oracle mismatch on trial {trial}"
                break
    yield "envelope-vs-lp-oracle", ok, detail

    ok = True
    for trial in range(100):
        f = rng.normal(size=g2.n_nodes)
        once = vex(f, g2).values
        twice = vex(once, g2).values
        if np.max(np.abs(twice - once)) > 1e-12:
            ok = False
            break
    yield "envelope-idempotence", ok, ""

    ok = True
    detail = ""
    term = terminal_slice(spec, grids)
    for trial in range(10):
        xq = rng.uniform(lo, hi)
        tau_q = grids.time.tau if grids.time.L else 0.01
        pq = rng.integers(0, grids.simplex.n_nodes)

        def phi(pts, pq=pq):
            from .grids import interpolate_many

            return interpolate_many(term.values, grids.space, pts)[:, pq]

        from .quadrature import step_expectation

        fast = step_expectation(phi, spec, spec.t0, xq, tau_q, rule)
        slow = reference.mc_step_expectation(
            phi, spec, spec.t0, xq, tau_q, n=100_000, seed=seed + trial
        )
        if abs(fast.mean - slow.mean) > max(4.0 * slow.se_mean, 1e-12):
            ok, detail = False, f"mean mismatch at trial {trial}"
            break
        if np.any(np.abs(fast.zbar - slow.zbar) > np.maximum(4.0 * slow.se_zbar, 1e-10)):
            ok, detail = False, f"zbar mismatch at trial {trial}"
            break
    yield "quadrature-vs-mc", ok, detail

    yield from _verify_solve_properties(config, spec, grids, rule, workers, seed)


def _verify_solve_properties(config, spec, grids, rule, workers, seed):
    rng = np.random.default_rng(seed + 1)
    result = solve(spec, grids, rule, workers=workers, problem_name=config.name)
    rep = result.report

    ok = max(rep.convexity_residual) <= 1e-10
    sample_x = rng.integers(0, grids.space.n_nodes, size=5)
    for f in result.fields[:: max(1, len(result.fields) // 4)]:
        for xi in sample_x:
            if not is_discretely_convex(f.values[xi], grids.simplex):
                ok = False
    yield "slice-convexity", ok, f"max residual {max(rep.convexity_residual):.2e}"

    ok = True
    detail = ""
    L = grids.time.L
    if L > 0:
        for _ in range(300):
            k = int(rng.integers(0, L))
            xi = int(rng.integers(0, grids.space.n_nodes))
            pi = int(rng.integers(0, grids.simplex.n_nodes))
            node = result.splits[k].envelopes[xi].splits[pi]
            lam = np.array(node.weights)
            sup = np.array([grids.simplex.nodes[s] for s in node.support])
            p = grids.simplex.nodes[pi]
            pre = result.splits[k].envelopes[xi]
            if abs(lam.sum() - 1.0) > 1e-12:
                ok, detail = False, "weights do not sum to one"
                break
            if np.max(np.abs(lam @ sup - p)) > 1e-12:
                ok, detail = False, "barycenter identity violated"
                break
            if abs(float(lam @ pre.values[list(node.support)]) - node.value) > 1e-10:
                ok, detail = False, "value identity violated"
                break
        else:
            pass
    yield "splitting-identities", ok, detail

    ok = True
    detail = ""
    if L > 0:
        for _ in range(200):
            k = int(rng.integers(0, L))
            xi = int(rng.integers(0, grids.space.n_nodes))
            pi = int(rng.integers(0, grids.simplex.n_nodes))
            res = belief.dpp_residual(
                result.fields, result.splits, spec, grids, rule, k, xi, pi
            )
            if res > 1e-10:
                ok, detail = False, f"residual {res:.2e} at (k={k}, x={xi}, p={pi})"
                break
    yield "one-step-dpp", ok, detail

    ok = True
    detail = ""
    if L > 0:
        for _ in range(200):
            k = int(rng.integers(0, L))
            xi = int(rng.integers(0, grids.space.n_nodes))
            pi = int(rng.integers(0, grids.simplex.n_nodes))
            node = result.splits[k].envelopes[xi].splits[pi]
            kernel = belief.kernel_from_split(node, pi, grids.simplex)
            p = grids.simplex.nodes[pi]
            post = np.zeros(spec.I)
            for i in range(spec.I):
                idx, probs = kernel.per_scenario[i]
                for a, q in zip(idx, probs):
                    post += p[i] * q * grids.simplex.nodes[a]
            if np.max(np.abs(post - p)) > 1e-12:
                ok, detail = False, "kernel martingale identity violated"
                break
    yield "kernel-martingale", ok, detail

    ok = not rep.bound_exceeded and not rep.growth_flagged
    yield "regularity-bounds", ok, (
        f"bound_exceeded={rep.bound_exceeded} growth_flagged={rep.growth_flagged}"
    )

    # one-step monotonicity with the tail-moment slack
    tau = grids.time.tau if L > 0 else 0.05
    M = max(1.0, spec.bounds.b_inf)
    slack = (
        2.0 * M * spec.bounds.sigma_inv_inf
        * gaussian_tail_moment(M * spec.bounds.sigma_inv_inf, tau, spec.d)
        + 1e-12
    )
    ok = True
    detail = ""
    n_p = grids.simplex.n_nodes
    for trial in range(50):
        psi_vals, phi_vals = _lipschitz_pair(rng, grids, M)
        field_lo = np.tile(psi_vals[:, None], (1, n_p))
        field_hi = np.tile(phi_vals[:, None], (1, n_p))
        xi = int(rng.integers(0, grids.space.n_nodes))
        idx = np.array([xi])
        t_k = spec.t0
        sig = spec.sigma(t_k, grids.space.points[idx])
        B, Lc = spec.control_table(t_k, grids.space.points[idx])
        vals = []
        for fld in (field_hi, field_lo):
            mean, zbar = grid_step_expectation(fld, grids.space, sig, tau, rule, x_indices=idx)
            from .hamiltonian import ham_grid

            H, _ = ham_grid(B, Lc, zbar, grids.simplex.nodes)
            vals.append(mean + tau * H)
        violation = float(np.max(vals[1] - vals[0]))
        if violation > slack:
            ok, detail = False, f"violation {violation:.3e} > slack {slack:.3e}"
            break
    yield "one-step-monotonicity", ok, detail


def _lipschitz_pair(rng, grids, M):
    """Two piecewise-linear grid fields with phi >= psi and both Lip <= M."""
    xs = grids.space.points[:, 0] if grids.space.d == 1 else None
    n = grids.space.n_nodes
    if xs is None:
        base = rng.normal(size=n)
        gap = np.abs(rng.normal(size=n))
        return base, base + gap
    h = np.diff(xs)
    slopes_psi = rng.uniform(-0.5 * M, 0.5 * M, size=n - 1)
    psi = np.concatenate([[0.0], np.cumsum(slopes_psi * h)])
    slopes_gap = rng.uniform(-0.5 * M, 0.5 * M, size=n - 1)
    gap = np.concatenate([[0.0], np.cumsum(slopes_gap * h)])
    gap = gap - gap.min()  # nonnegative, Lip <= M/2
    return psi, psi + gap


def cmd_verify(args) -> int:
    config = _resolve_config(args.config)
    workers = _resolve_workers(args)
    failures = 0
    for name, ok, detail in _verify_checks(config, workers, args.seed):
        tag = "PASS" if ok else "FAIL"
        line = f"[{tag}] {name}"
        if detail and not ok:
            line += f": {detail}"
        print(line)
        if not ok:
            failures += 1
    if failures:
        print(f"{failures} properties failed")
        return EXIT_PROPERTY
    print("all properties passed")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isaacs-vex",
        description="Backward solver for stochastic differential games "
        "with one-sided incomplete information",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run the backward scheme")
    p_solve.add_argument("--config", required=True, help="config JSON path or built-in name")
    p_solve.add_argument("--out", required=True, help="output directory")
    p_solve.add_argument("--workers", type=int, default=None)
    p_solve.set_defaults(func=cmd_solve)

    p_ref = sub.add_parser("refine", help="empirical refinement study")
    p_ref.add_argument("--config", required=True)
    p_ref.add_argument("--levels", type=int, required=True)
    p_ref.add_argument("--out", default=None)
    p_ref.add_argument("--workers", type=int, default=None)
    p_ref.set_defaults(func=cmd_refine)

    p_bel = sub.add_parser("beliefs", help="simulate belief martingale paths")
    p_bel.add_argument("--config", default=None, help="unused; kept for symmetry")
    p_bel.add_argument("--solve-dir", required=True, help="directory written by solve")
    p_bel.add_argument("--paths", type=int, default=1000)
    p_bel.add_argument("--seed", type=int, default=0)
    p_bel.add_argument("--out", default=None)
    p_bel.set_defaults(func=cmd_beliefs)

    p_ver = sub.add_parser("verify", help="run the property battery")
    p_ver.add_argument("--config", required=True)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--workers", type=int, default=None)
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergedField as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ParseError, ValidationError, UnknownProblem, MissingArtifacts) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IsaacsVexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROPERTY


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
