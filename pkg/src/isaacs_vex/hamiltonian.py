"""Isaacs Hamiltonian over finite control grids.

With finite control sets the sup-inf is an exact enumeration:

    H(t, x, xi, p) = max_v min_u { <b(t,x,u,v), xi> + sum_i p_i l_i(t,x,u,v) }

The dual ordering (min_u max_v) is enumerated as well; their difference is
the Isaacs gap, nonnegative by weak duality, which the solver reports rather
than enforcing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteCoefficient


@dataclass(frozen=True)
class HamiltonianValue:
    value: float  # sup_v inf_u ordering
    isaacs_gap: float  # inf_u sup_v minus sup_v inf_u, >= 0 up to rounding
    argmin_u: int
    argmax_v: int


def _check_simplex(p, I):
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != I:
        raise ValueError(f"p must have {I} components")
    if abs(float(np.sum(p)) - 1.0) > 1e-9 or float(np.min(p)) < -1e-9:
        raise ValueError(f"p={p} is not on the simplex")
    return p


def inner_values(spec, t: float, x, xi, p) -> np.ndarray:
    """The (nu, nv) payoff matrix <b, xi> + sum_i p_i l_i at one point."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    B, L = spec.control_table(t, x)
    if not np.all(np.isfinite(B)):
        raise NonFiniteCoefficient(f"drift not finite at t={t}, x={x.ravel()}")
    if not np.all(np.isfinite(L)):
        raise NonFiniteCoefficient(f"running cost not finite at t={t}, x={x.ravel()}")
    inner = np.einsum("uvd,d->uv", B[0], xi)
    inner = inner + np.einsum("i,iuv->uv", p, L[:, 0])
    return inner


def ham(spec, t: float, x, xi, p) -> HamiltonianValue:
    """Exact finite sup-inf with deterministic lowest-index tie-breaking."""
    p = _check_simplex(p, spec.I)
    inner = inner_values(spec, t, x, xi, p)
    mins_over_u = inner.min(axis=0)  # (nv,)
    v_star = int(np.argmax(mins_over_u))  # first maximizer
    u_star = int(np.argmin(inner[:, v_star]))  # first minimizer at v*
    supinf = float(mins_over_u[v_star])
    infsup = float(inner.max(axis=1).min())
    return HamiltonianValue(
        value=supinf,
        isaacs_gap=infsup - supinf,
        argmin_u=u_star,
        argmax_v=v_star,
    )


def ham_grid(B, L, Z, P):
    """Vectorized sup-inf values and gaps on the solve grid.

    B: (n_x, nu, nv, d) drift table, L: (I, n_x, nu, nv) cost table,
    Z: (n_x, n_p, d) gradient estimates, P: (n_p, I) simplex nodes.
    Returns (H, gap) of shape (n_x, n_p).
    """
    if not np.all(np.isfinite(B)):
        raise NonFiniteCoefficient("drift table not finite")
    if not np.all(np.isfinite(L)):
        raise NonFiniteCoefficient("running-cost table not finite")
    inner = np.einsum("xuvd,xpd->xpuv", B, Z)
    inner += np.einsum("pi,ixuv->xpuv", P, L)
    mins = inner.min(axis=2)  # over u -> (n_x, n_p, nv)
    supinf = mins.max(axis=2)
    infsup = inner.max(axis=3).min(axis=2)
    return supinf, infsup - supinf


@dataclass(frozen=True)
class GrowthReport:
    """Empirical growth/Lipschitz constants of H over random samples."""

    samples: int
    fitted_growth: float  # smallest c with |H| <= c (1 + |xi|) on the sample
    fitted_lip_xi: float
    fitted_lip_p: float
    fitted_lip_tx: float  # |dH| / ((1+|xi|) (|dx| + |dt|))
    declared_growth: float
    max_violation: float  # max over samples of |H| - declared (1 + |xi|), clipped at 0

    def to_dict(self):
        return {
            "samples": self.samples,
            "fitted_growth": self.fitted_growth,
            "fitted_lip_xi": self.fitted_lip_xi,
            "fitted_lip_p": self.fitted_lip_p,
            "fitted_lip_tx": self.fitted_lip_tx,
            "declared_growth": self.declared_growth,
            "max_violation": self.max_violation,
        }


def check_growth(spec, samples: int, seed: int) -> GrowthReport:
    """Fit growth and Lipschitz moduli of H empirically.

    Probes |H| <= c (1 + |xi|) and the moduli in xi, p and (t, x) on paired
    random samples; reports the largest violation of the declared growth
    constant (zero when the declaration is consistent).
    """
    if samples < 2:
        raise ValueError("need samples >= 2")
    rng = np.random.default_rng(seed)
    lo, hi = spec.domain[:, 0], spec.domain[:, 1]
    declared = spec.bounds.b_inf + spec.bounds.l_inf

    growth = 0.0
    lip_xi = 0.0
    lip_p = 0.0
    lip_tx = 0.0
    violation = 0.0
    for _ in range(samples):
        t = float(rng.uniform(spec.t0, spec.T))
        x = rng.uniform(lo, hi)
        xi = rng.uniform(-5.0, 5.0, size=spec.d)
        p = rng.dirichlet(np.ones(spec.I))
        h0 = ham(spec, t, x, xi, p).value
        growth = max(growth, abs(h0) / (1.0 + float(np.linalg.norm(xi))))
        violation = max(
            violation, abs(h0) - declared * (1.0 + float(np.linalg.norm(xi)))
        )

        xi2 = xi + rng.normal(scale=1.0, size=spec.d)
        h_xi = ham(spec, t, x, xi2, p).value
        dxi = float(np.linalg.norm(xi2 - xi))
        if dxi > 1e-12:
            lip_xi = max(lip_xi, abs(h_xi - h0) / dxi)

        p2 = rng.dirichlet(np.ones(spec.I))
        h_p = ham(spec, t, x, xi, p2).value
        dp = float(np.linalg.norm(p2 - p))
        if dp > 1e-12:
            lip_p = max(lip_p, abs(h_p - h0) / dp)

        t2 = float(rng.uniform(spec.t0, spec.T))
        x2 = rng.uniform(lo, hi)
        h_tx = ham(spec, t2, x2, xi, p).value
        dtx = abs(t2 - t) + float(np.linalg.norm(x2 - x))
        if dtx > 1e-12:
            lip_tx = max(
                lip_tx, abs(h_tx - h0) / ((1.0 + float(np.linalg.norm(xi))) * dtx)
            )

    return GrowthReport(
        samples=samples,
        fitted_growth=growth,
        fitted_lip_xi=lip_xi,
        fitted_lip_p=lip_p,
        fitted_lip_tx=lip_tx,
        declared_growth=declared,
        max_violation=max(0.0, violation),
    )
