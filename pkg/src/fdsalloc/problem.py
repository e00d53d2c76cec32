"""Allocation problem instances and feasibility/objective queries.

An allocation is a plain float64 vector ``x`` of per-node storage fractions.
Feasibility means every closed neighborhood stores at least one full object:
``sum(x[j] for j in omega(i)) >= 1`` for all ``i``, up to ``TOL_FEAS``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import StorageGraph

# Feasibility slack tolerance. Exact arithmetic gives slack >= 0; float
# accumulation across a neighborhood sum needs room far below any epsilon of
# interest (>= 1e-3).
TOL_FEAS = 1e-9


@dataclass(frozen=True)
class FdsInstance:
    """A coverage allocation problem: graph, access probabilities, regularizer.

    ``access_probs`` must be strictly positive and sum to one; they only enter
    recovery-probability reporting, not the optimization itself. ``delta`` is
    the quadratic regularization weight that smooths the dual.
    """

    graph: StorageGraph
    delta: float
    access_probs: np.ndarray = None

    def __post_init__(self):
        n = self.graph.n
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        p = self.access_probs
        if p is None:
            p = np.full(n, 1.0 / n)
        else:
            p = np.asarray(p, dtype=float)
            if p.shape != (n,):
                raise ValueError(f"access_probs must have length {n}")
            if np.any(p <= 0):
                raise ValueError("all access probabilities must be > 0")
            if abs(p.sum() - 1.0) > 1e-12:
                raise ValueError("access probabilities must sum to 1")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "access_probs", p)


def _as_allocation(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"allocation must have length {n}, got shape {x.shape}")
    return x


def neighborhood_sums(x, g: StorageGraph) -> np.ndarray:
    """Per-node sums of x over closed neighborhoods."""
    x = _as_allocation(x, g.n)
    flat, start = g.omega_arrays()
    return np.add.reduceat(x[flat], start[:-1])


def objective(x, n: int = None) -> float:
    """Total storage used, sum of x."""
    x = np.asarray(x, dtype=float)
    if n is not None and x.shape != (n,):
        raise ValueError(f"allocation must have length {n}")
    return float(x.sum())


def regularized_objective(x, delta: float) -> float:
    """Total storage plus the quadratic smoothing term, sum(x) + delta/2 * ||x||^2."""
    x = np.asarray(x, dtype=float)
    return float(x.sum() + 0.5 * delta * np.dot(x, x))


def min_slack(x, g: StorageGraph) -> float:
    """Smallest neighborhood surplus, min_i sum_{j in omega(i)} x_j - 1.

    x is feasible iff this is >= -TOL_FEAS.
    """
    return float(neighborhood_sums(x, g).min() - 1.0)


def feasible(x, g: StorageGraph) -> bool:
    return min_slack(x, g) >= -TOL_FEAS


def recovery_probability(x, inst: FdsInstance) -> float:
    """Probability a random access succeeds: total p_i over covered nodes.

    Node i is covered when its closed neighborhood stores >= 1 - TOL_FEAS.
    """
    sums = neighborhood_sums(x, inst.graph)
    return float(inst.access_probs[sums >= 1.0 - TOL_FEAS].sum())


def optimum_bounds(g: StorageGraph) -> tuple:
    """Bracket for the exact optimum total storage.

    Returns (N / (d_max + 1), N / (d_min + 1)); the optimum always lies in
    between, so when the graph is regular the bounds pin it exactly.
    """
    return g.n / (g.d_max + 1), g.n / (g.d_min + 1)
