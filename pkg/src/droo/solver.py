"""Exact time allocation for a fixed offloading decision.

For a binary decision x the weighted-rate maximization over the WPT fraction
a and the offload slots tau is convex.  Introducing a multiplier v for the
time budget ``a + sum(tau) <= 1`` decouples it:

* every offloader i runs at SNR rho_i where its marginal rate
  ``w_i*eps*(ln(1+rho) - rho/(1+rho))`` equals v (eps = B / (v_u ln 2)),
  so rho depends on v and w_i only;
* the WPT fraction then has the closed form ``a = (A / (3 D))**1.5`` with
  A the local-rate coefficient and ``D = v - sum_i w_i eps c_i / (1 + rho_i)``;
* tau_i = c_i a / rho_i, c_i = mu P h_i^2 / N0.

The budget ``a * (1 + sum c_i / rho_i)`` is strictly decreasing in v, so the
single dual variable is found by a bracketed Newton iteration on log v.  The
search is vectorized over a batch of decisions; each row evolves
independently, so a row's answer does not depend on what else is in the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from droo.errors import ConvergenceError, DomainError
from droo.system import SystemParams, local_rate, offload_rate

_NEWTON_RHO_STEPS = 5


@dataclass(frozen=True)
class SolverConfig:
    budget_tol: float = 1e-12
    bracket_tol: float = 1e-15
    max_iter: int = 200

    def __post_init__(self):
        if self.budget_tol <= 0 or self.bracket_tol <= 0:
            raise DomainError("solver tolerances must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")


@dataclass(frozen=True)
class AllocationResult:
    a: float
    tau: np.ndarray
    q: float


@dataclass(frozen=True)
class BatchAllocation:
    """Allocations for a stack of decisions, one row per decision."""

    q: np.ndarray
    a: np.ndarray
    tau: np.ndarray

    def __len__(self):
        return len(self.q)

    def row(self, i: int) -> AllocationResult:
        return AllocationResult(float(self.a[i]), self.tau[i].copy(), float(self.q[i]))


_SERIES_Z = 0.1
# Taylor coefficients of z + exp(-z) - 1 = sum_{k>=2} (-z)^k / k!
_SERIES_COEF = np.array([(-1.0) ** k / math.factorial(k) for k in range(2, 14)])


def _excess(z):
    """z + exp(-z) - 1 without cancellation near z = 0."""
    z = np.asarray(z, float)
    out = np.asarray(z + np.expm1(-z))
    small = np.abs(z) < _SERIES_Z
    if small.any():
        zs = z[small]
        acc = np.full(zs.shape, _SERIES_COEF[-1])
        for c in _SERIES_COEF[-2::-1]:
            acc = acc * zs + c
        out[small] = zs * zs * acc
    return out[()] if out.ndim == 0 else out


def marginal_gain(rho):
    """ln(1+rho) - rho/(1+rho): the per-weight marginal rate, in nats."""
    return _excess(np.log1p(np.asarray(rho, float)))


def rho_from_marginal(y):
    """Invert marginal_gain: the rho >= 0 with ln(1+rho) - rho/(1+rho) = y.

    Newton on z = ln(1+rho), where the equation reads z + exp(-z) - 1 = y.
    The left side is convex and increasing, and the start point lies right of
    the root, so the iterates decrease monotonically onto it.
    """
    y = np.asarray(y, float)
    z = np.minimum(y + 1.0, np.sqrt(2.0 * y) + y)
    for _ in range(_NEWTON_RHO_STEPS):
        slope = -np.expm1(-z)
        z = np.where(z > 0, z - (_excess(z) - y) / np.where(z > 0, slope, 1.0), 0.0)
    with np.errstate(over="ignore"):  # rho = inf is the right limit for huge trial v
        return np.expm1(z)


def _as_decisions(x, n):
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != n:
        raise DomainError(f"decisions must have {n} columns, got shape {x.shape}")
    if not np.all((x == 0) | (x == 1)):
        raise DomainError("offloading decisions must be binary")
    return x.astype(bool)


def _gains(h, n, rows=None):
    h = getattr(h, "h", h)
    h = np.asarray(h, float)
    if h.shape != (n,) and (rows is None or h.shape != (rows, n)):
        raise DomainError(f"channel gains must have shape ({n},) or (decisions, {n}), got {h.shape}")
    if np.any(h < 0):
        raise DomainError("channel gains must be non-negative")
    return h


def solve_batch(h, x, p: SystemParams, cfg: SolverConfig | None = None) -> BatchAllocation:
    """Optimal (a, tau) and weighted rate for each row of the decision matrix x.

    h is either one channel vector shared by all rows or one vector per row.
    """
    cfg = cfg or SolverConfig()
    X = _as_decisions(x, p.n)
    m = X.shape[0]
    h = _gains(h, p.n, m)
    w = p.weights
    eps = p.bandwidth_hz / (p.vu * np.log(2.0))
    c = p.snr_coeff * h**2

    S = X & (h > 0)
    local_coef = w * p.eta1 * np.cbrt(h / p.energy_coeff)
    A = np.where(X, 0.0, local_coef).sum(axis=1)

    # Offloaders are pooled by weight: rho only depends on v / (w eps).
    ws, inv = np.unique(w, return_inverse=True)
    cS = np.where(S, c, 0.0)
    C = np.stack([cS[:, inv == j].sum(axis=1) for j in range(len(ws))], axis=1)
    we = ws * eps

    no_off = ~S.any(axis=1)
    no_local = (A <= 0) & ~no_off

    def evaluate(v, C, A, no_local):
        r = rho_from_marginal(v[:, None] / we)
        inv_r = np.where(C > 0, 1.0 / r, 0.0)
        G = (C * we / (1.0 + r)).sum(axis=1)
        D = v - G
        T = (C * inv_r).sum(axis=1)
        dT = -(C * inv_r / we * (1.0 + inv_r) ** 2).sum(axis=1)
        pos = D > 0
        Ds = np.where(pos, D, 1.0)
        with np.errstate(divide="ignore"):
            phi_ln = np.where(pos, 1.5 * np.log(np.where(A > 0, A, 1.0) / (3.0 * Ds)) + np.log1p(T), np.inf)
        dphi_ln = v * (-1.5 * (1.0 + T) / Ds + dT / (1.0 + T))
        # all-offload rows: the budget pins a, v solves G(v) = v; dG/dv = -T
        with np.errstate(divide="ignore"):
            phi_d = np.log(np.where(no_local, G, 1.0)) - np.log(v)
        dphi_d = -v * T / np.where(G > 0, G, 1.0) - 1.0
        phi = np.where(no_local, phi_d, phi_ln)
        dphi = np.where(no_local, dphi_d, dphi_ln)
        return phi, dphi, r, T

    v = (C * we).sum(axis=1) + 1.0
    # only rows still searching are evaluated; each row's path is independent of the others
    idx = np.flatnonzero(~no_off)
    vi = v[idx]
    lo = np.zeros(len(idx))
    hi = np.full(len(idx), np.inf)
    for _ in range(cfg.max_iter):
        if len(idx) == 0:
            break
        phi, dphi, _, _ = evaluate(vi, C[idx], A[idx], no_local[idx])
        lo = np.where(phi > 0, vi, lo)
        hi = np.where(phi <= 0, vi, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            width = np.where(lo > 0, hi / lo - 1.0, np.inf)
        done = (np.abs(phi) <= cfg.budget_tol) | (width <= cfg.bracket_tol)
        v[idx[done]] = vi[done]
        with np.errstate(over="ignore", invalid="ignore"):
            cand = vi * np.exp(-phi / dphi)
        ok = np.isfinite(phi) & np.isfinite(cand) & (cand > lo) & (cand < hi)
        with np.errstate(invalid="ignore"):
            fallback = np.where(np.isfinite(hi), np.where(lo > 0, np.sqrt(lo * hi), hi / 4.0), lo * 4.0)
        keep = ~done
        idx, lo, hi = idx[keep], lo[keep], hi[keep]
        vi = np.where(ok, cand, fallback)[keep]
    if len(idx):
        raise ConvergenceError(f"dual search did not converge in {cfg.max_iter} iterations")

    _, _, r, T = evaluate(v, C, A, no_local)
    # tau_i = c_i a / rho_i, so filling the budget fixes a = 1 / (1 + T)
    a = np.where(no_off, 1.0, 1.0 / (1.0 + T))

    rr = r[:, inv]
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.where(S, c * a[:, None] / rr, 0.0)
        off = np.where(S & (tau > 0), w * tau * np.log1p(rr) / np.log(2.0), 0.0)
    q = A * np.cbrt(a) + p.bandwidth_hz / p.vu * off.sum(axis=1)
    return BatchAllocation(q=q, a=a, tau=tau)


def solve_p2(h, x, p: SystemParams, cfg: SolverConfig | None = None) -> AllocationResult:
    """Optimal allocation and weighted rate for a single decision vector."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise DomainError("solve_p2 takes one decision vector; use solve_batch for stacks")
    return solve_batch(h, x, p, cfg).row(0)


# --- brute-force oracle -----------------------------------------------------


def _inner_equal_marginal(a, c, w, eps, iters=52):
    """Offload slots maximizing the offload rate for each a in the grid.

    Nested geometric bisection: rho_i(lam) from the marginal condition, then lam
    until the slots fill 1 - a.  Deliberately shares no code with solve_batch.
    Returns tau with shape (len(a), len(c)).
    """
    a = a[:, None]
    budget = 1.0 - a
    scale = w * eps

    def rho_at(lam):
        target = lam / scale
        lo = np.full(target.shape, 1e-12)
        # marginal_gain(rho) > ln(1 + rho) - 1 brackets the root from above
        hi = np.maximum(np.expm1(target + 1.0), 2e-12)
        for _ in range(iters):
            mid = np.sqrt(lo * hi)
            below = marginal_gain(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return np.sqrt(lo * hi)

    lam_lo = np.full(a.shape, 1e-300)
    lam_hi = np.full(a.shape, np.max(scale * marginal_gain(1e12)))
    for _ in range(iters):
        lam = np.sqrt(lam_lo * lam_hi)
        used = (c * a / rho_at(lam)).sum(axis=1, keepdims=True)
        over = used > budget
        lam_lo = np.where(over, lam, lam_lo)
        lam_hi = np.where(over, lam_hi, lam)
    tau = c * a / rho_at(lam_hi)
    # rescale onto the budget exactly; keeps the point feasible
    tot = tau.sum(axis=1, keepdims=True)
    return np.where(tot > 0, tau * budget / np.where(tot > 0, tot, 1.0), 0.0)


def grid_oracle_p2(h, x, p: SystemParams, resolution: float = 1e-3) -> AllocationResult:
    """Brute-force lower bound on the optimal rate for decision x.

    a is swept over a uniform grid on [0, 1] (both endpoints included).  With
    one offloader it takes the remaining time; with two the split is gridded
    too; with more, each grid point gets an equal-marginal slot allocation.
    Every returned point is feasible and its rate is evaluated directly from
    the rate formulas, so the result never exceeds the true optimum.
    """
    if not (0 < resolution <= 0.1):
        raise DomainError(f"resolution must lie in (0, 0.1], got {resolution}")
    h = _gains(h, p.n)
    x = _as_decisions(x, p.n)[0]
    S = np.flatnonzero(x & (h > 0))
    steps = int(round(1.0 / resolution))
    a_grid = np.linspace(0.0, 1.0, steps + 1)
    local = ~x
    w = p.weights

    def local_part(a):
        return (w[local] * local_rate(h[local], p.energy_coeff[local], a[:, None], p)).sum(axis=1)

    tau_full = np.zeros((len(a_grid), p.n))
    if len(S) == 0:
        a_pts = np.ones(1)
        tau_full = np.zeros((1, p.n))
    elif len(S) == 1:
        a_pts = a_grid
        tau_full[:, S[0]] = 1.0 - a_grid
    elif len(S) == 2:
        i, j = np.meshgrid(np.arange(steps + 1), np.arange(steps + 1), indexing="ij")
        keep = i + j <= steps
        i, j = i[keep], j[keep]
        a_pts = i / steps
        tau_full = np.zeros((len(a_pts), p.n))
        tau_full[:, S[0]] = j / steps
        tau_full[:, S[1]] = np.maximum(1.0 - a_pts - j / steps, 0.0)
    else:
        a_pts = a_grid
        eps = p.bandwidth_hz / (p.vu * np.log(2.0))
        inner = a_pts[1:-1]
        tau_S = _inner_equal_marginal(inner, p.snr_coeff * h[S] ** 2, w[S], eps)
        tau_full[1:-1, S] = tau_S

    off = (w[S] * offload_rate(h[S], a_pts[:, None], tau_full[:, S], p)).sum(axis=1) if len(S) else 0.0
    q = local_part(a_pts) + off
    best = int(np.argmax(q))
    return AllocationResult(float(a_pts[best]), tau_full[best].copy(), float(q[best]))
