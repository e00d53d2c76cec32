"""Exact reference solvers for the covering LP and its regularized variant.

The LP  min 1'x  s.t.  sum_{j in omega(i)} x_j >= 1,  0 <= x <= 1  is solved
with a dense two-phase simplex using Bland's rule, so results are
deterministic and reproducible. The box x <= 1 is harmless: 0/1 constraint
coefficients mean any optimum can be clipped into the box without losing
feasibility. Desk-scale instances only; the distributed solver is the
production path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import StorageGraph
from .problem import neighborhood_sums

MAX_ORACLE_NODES = 2000

_TOL = 1e-9


class OracleBudgetError(ValueError):
    """Instance exceeds the size the dense oracle is budgeted for."""


class SimplexStallError(RuntimeError):
    """Pivot limit hit; never expected on well-posed covering instances."""


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective: float
    status: str  # "optimal"; infeasibility cannot occur (x = 1 is feasible)


def _closed_adjacency(g: StorageGraph) -> np.ndarray:
    a = np.eye(g.n)
    for i, nbrs in enumerate(g.neighbors):
        for j in nbrs:
            a[i, j] = 1.0
    return a


def _pivot(t, rhs, z_row, z_val, basis, row, col):
    piv = t[row, col]
    t[row] /= piv
    rhs[row] /= piv
    factors = t[:, col].copy()
    factors[row] = 0.0
    t -= np.outer(factors, t[row])
    rhs -= factors * rhs[row]
    f = z_row[col]
    if f != 0.0:
        z_row -= f * t[row]
        z_val -= f * rhs[row]
    basis[row] = col
    return z_val


def _bland_loop(t, rhs, z_row, z_val, basis, allowed, max_pivots):
    """Minimize with Bland's rule: smallest eligible entering index, leaving
    row by min ratio with smallest basic index on ties."""
    basis_arr = np.asarray(basis)
    for _ in range(max_pivots):
        eligible = np.flatnonzero(allowed & (z_row < -_TOL))
        if eligible.size == 0:
            return z_val
        col = int(eligible[0])
        pos = t[:, col] > _TOL
        if not pos.any():
            raise SimplexStallError("unbounded direction in a bounded covering LP")
        ratios = np.full(t.shape[0], np.inf)
        ratios[pos] = rhs[pos] / t[pos, col]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12)
        row = int(ties[np.argmin(basis_arr[ties])])
        z_val = _pivot(t, rhs, z_row, z_val, basis, row, col)
        basis_arr[row] = basis[row]
    raise SimplexStallError("pivot limit exceeded")


def solve_exact(g: StorageGraph) -> LpSolution:
    """Optimal fractional cover of g, minimizing total storage.

    Deterministic: identical input graphs give bit-identical solutions.
    """
    n = g.n
    if n > MAX_ORACLE_NODES:
        raise OracleBudgetError(f"n={n} exceeds oracle budget {MAX_ORACLE_NODES}")

    # Standard form. Columns: x (n) | surplus s (n) | box slack t (n) |
    # artificial a (n). Rows: covering sums then box rows.
    a_cl = _closed_adjacency(g)
    rows, cols = 2 * n, 4 * n
    t = np.zeros((rows, cols))
    t[:n, :n] = a_cl
    t[:n, n : 2 * n] = -np.eye(n)
    t[:n, 3 * n :] = np.eye(n)
    t[n:, :n] = np.eye(n)
    t[n:, 2 * n : 3 * n] = np.eye(n)
    rhs = np.ones(rows)
    basis = list(range(3 * n, 4 * n)) + list(range(2 * n, 3 * n))

    max_pivots = 1000 * n + 10_000

    # Phase 1: drive the artificials to zero.
    c1 = np.zeros(cols)
    c1[3 * n :] = 1.0
    z_row = c1 - c1[basis] @ t
    z_val = -float(c1[basis] @ rhs)
    allowed = np.ones(cols, dtype=bool)
    z_val = _bland_loop(t, rhs, z_row, z_val, basis, allowed, max_pivots)
    if -z_val > 1e-7:
        # Cannot happen: x = 1 is always feasible.
        raise SimplexStallError(f"phase 1 ended infeasible (residual {-z_val:.3e})")

    # Remove leftover zero-level artificials from the basis; drop rows that
    # turn out redundant (duplicate closed neighborhoods make them common).
    drop = []
    for r in range(rows):
        if basis[r] >= 3 * n:
            piv_col = -1
            for j in range(3 * n):
                if abs(t[r, j]) > _TOL:
                    piv_col = j
                    break
            if piv_col >= 0:
                _pivot(t, rhs, z_row, 0.0, basis, r, piv_col)
            else:
                drop.append(r)
    if drop:
        keep = [r for r in range(rows) if r not in set(drop)]
        t = t[keep]
        rhs = rhs[keep]
        basis = [basis[r] for r in keep]

    # Phase 2: true objective, artificial columns barred.
    c2 = np.zeros(cols)
    c2[:n] = 1.0
    z_row = c2 - c2[basis] @ t
    z_val = -float(c2[basis] @ rhs)
    allowed[3 * n :] = False
    z_val = _bland_loop(t, rhs, z_row, z_val, basis, allowed, max_pivots)

    x = np.zeros(n)
    for r, b in enumerate(basis):
        if b < n:
            x[b] = rhs[r]
    np.clip(x, 0.0, 1.0, out=x)
    return LpSolution(x=x, objective=float(x.sum()), status="optimal")


def solve_regularized(
    g: StorageGraph,
    delta: float,
    tol: float = 1e-12,
    max_iters: int = 2_000_000,
) -> np.ndarray:
    """Unique minimizer of  sum(x) + delta/2 ||x||^2  over the feasible set.

    Runs accelerated projected gradient on the concave dual with adaptive
    restart; both projections are coordinate clamps ([0,1] for the inner
    minimizer, [0,inf) for the multipliers), which keeps the iteration exact
    at clamp boundaries. Stops when the KKT fixed-point residual drops below
    ``tol`` on the constraint-violation scale.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    n = g.n
    if n > MAX_ORACLE_NODES:
        raise OracleBudgetError(f"n={n} exceeds oracle budget {MAX_ORACLE_NODES}")

    lip = (g.d_max + 1) ** 2 / delta
    step = 1.0 / lip

    def grad(lam):
        # gradient of the dual: per-node constraint violation at the inner
        # minimizer x_hat(lam)
        x_hat = np.clip((neighborhood_sums(lam, g) - 1.0) / delta, 0.0, 1.0)
        return 1.0 - neighborhood_sums(x_hat, g), x_hat

    lam = np.zeros(n)
    y = lam.copy()
    t_mom = 1.0
    for _ in range(max_iters):
        gy, _ = grad(y)
        lam_next = np.maximum(y + step * gy, 0.0)
        # restart when momentum points against the ascent direction
        if np.dot(gy, lam_next - lam) < 0.0:
            t_mom = 1.0
            y = lam.copy()
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = lam_next + ((t_mom - 1.0) / t_next) * (lam_next - lam)
        lam, t_mom = lam_next, t_next

        g_lam, x_hat = grad(lam)
        resid = np.abs(lam - np.maximum(lam + step * g_lam, 0.0)).max() / step
        if resid <= tol:
            return x_hat
    raise SimplexStallError("regularized oracle did not converge")
