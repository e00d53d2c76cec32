"""Distributed proximal-center solver for the coverage allocation LP.

The LP is regularized with a quadratic term (weight ``delta``), its covering
constraints are dualized, and accelerated projected gradient ascent runs on
the smooth concave dual. Every dual coordinate lives on one storage node, so
the whole iteration decomposes into per-node state machines that exchange two
scalar broadcasts per round with their closed neighborhood: the multiplier
``lam`` (skipped in round 0, where all multipliers are zero by
initialization) and the inner minimizer ``x_hat``. Each node keeps a running
average ``x_bar`` of its inner minimizers and repairs it into a feasible
allocation ``x`` by covering any local deficit itself.

Round ``k`` updates, per node i with closed neighborhood W = omega(i):

    x_hat_i = clamp((sum_{j in W} lam_j - 1) / delta, 0, 1)
    g_i     = 1 - sum_{j in W} x_hat_j
    z_i    += (k+1)/2 * g_i
    mu_i    = max(0, lam_i + alpha * g_i)
    lam_i'  = (k+1)/(k+3) * mu_i + 2/(k+3) * alpha * max(0, z_i)
    x_bar_j = k/(k+2) * x_bar_j + 2/(k+2) * x_hat_j     for j in W
    x_i     = x_bar_i + max(0, 1 - sum_{j in W} x_bar_j)

Two engines compute the same thing: a per-node reference
(:func:`advance_round`) with explicit message inboxes and a locality audit,
and a compiled fast path used by :func:`solve`. Both accumulate neighborhood
sums left to right over sorted indices, so their outputs are bit-identical
(covered by tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from .graph import StorageGraph
from .problem import FdsInstance


class NumericFailure(RuntimeError):
    """NaN or Inf appeared in solver state."""


def inner_minimizer(lam_sum: float, delta: float) -> float:
    """Box-constrained minimizer of the per-node Lagrangian term.

    Returns clamp((lam_sum - 1) / delta, 0, 1); monotone nondecreasing in
    lam_sum.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    t = (lam_sum - 1.0) / delta
    if t < 0.0:
        return 0.0
    if t > 1.0:
        return 1.0
    return t


def iterations_for_epsilon(d_max: int, epsilon: float) -> int:
    """Round budget K guaranteeing a (1+epsilon)-approximate allocation.

    Smallest integer K with 32 (d_max+1)^3 (1 + 1/epsilon) / (K+1)^2 <=
    epsilon / 2, i.e. both error terms at most epsilon/2 when delta = epsilon.
    Grows as O(d_max^{3/2} / epsilon).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    target = 64.0 * (d_max + 1) ** 3 * (1.0 + 1.0 / epsilon) / epsilon
    return max(0, math.ceil(math.sqrt(target)) - 1)


class ResolvedParams(NamedTuple):
    delta: float
    alpha: float
    last_round: int
    k_epsilon: int


@dataclass
class SolverParams:
    """Run parameters.

    ``delta`` defaults to ``epsilon`` and ``alpha`` to
    ``delta / (2 (d_max+1)^2)``; ``alpha_mode="n-substitute"`` replaces
    d_max + 1 by N for networks where only the size is known beforehand,
    which shrinks the step to ``delta / (2 N^2)``. ``max_rounds`` is the last
    executed round index and defaults to the epsilon budget
    :func:`iterations_for_epsilon` (with the same substitution).
    """

    epsilon: float
    delta: Optional[float] = None
    alpha: Optional[float] = None
    alpha_mode: str = "dmax"
    max_rounds: Optional[int] = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.alpha_mode not in ("dmax", "n-substitute"):
            raise ValueError(f"unknown alpha_mode {self.alpha_mode!r}")
        if self.max_rounds is not None and self.max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")

    def resolve(self, g: StorageGraph) -> ResolvedParams:
        delta = self.epsilon if self.delta is None else self.delta
        dp1 = g.n if self.alpha_mode == "n-substitute" else g.d_max + 1
        alpha = delta / (2.0 * dp1 * dp1) if self.alpha is None else self.alpha
        if self.alpha_mode == "dmax":
            cap = delta / (2.0 * (g.d_max + 1) ** 2)
            if alpha > cap + 1e-15:
                raise ValueError(
                    f"alpha {alpha} exceeds the stable step {cap} for this graph"
                )
        k_eps = iterations_for_epsilon(dp1 - 1, self.epsilon)
        last = k_eps if self.max_rounds is None else self.max_rounds
        return ResolvedParams(delta, alpha, last, k_eps)


@dataclass
class NodeState:
    """Scalar state one node carries between rounds.

    ``lam`` holds the multiplier the node will broadcast next round;
    ``x_bar_local`` maps every j in its closed neighborhood to the node's
    replica of j's running average. Replicas at different nodes stay
    bit-identical because every holder applies the same update to the same
    received scalars.
    """

    lam: float = 0.0
    mu: float = 0.0
    z: float = 0.0
    x_hat: float = 0.0
    x_bar_local: dict = None
    x: float = 0.0


@dataclass(frozen=True)
class RoundTrace:
    round: int
    objective: float
    min_slack: float
    msgs_sent: int
    msgs_cum: int
    repair_norm: float
    rel_error: Optional[float] = None


def init_states(g: StorageGraph) -> list:
    """Fresh per-node state: multipliers and accumulators at zero."""
    return [NodeState(x_bar_local={j: 0.0 for j in g.omega(i)}) for i in range(g.n)]


def advance_round(states, g: StorageGraph, params: SolverParams, k: int):
    """One synchronous round of the per-node reference engine.

    Returns (new_states, trace). Each node reads only its own state and the
    scalars received from its closed neighborhood; the inbox audit enforces
    that no other state is reachable.
    """
    delta, alpha, _, _ = params.resolve(g)
    n = g.n
    msgs = 0

    lam_inbox = [{} for _ in range(n)]
    if k >= 1:
        for i in range(n):
            for j in g.neighbors[i]:
                lam_inbox[j][i] = states[i].lam
        msgs += 1

    x_hat = [0.0] * n
    for i in range(n):
        inbox = lam_inbox[i]
        if k >= 1:
            assert set(inbox) == set(g.neighbors[i]), "locality audit failed"
        s = 0.0
        for j in g.omega(i):
            # unexchanged multipliers are the zero-initialized round-0 values
            s += states[i].lam if j == i else inbox.get(j, 0.0)
        x_hat[i] = inner_minimizer(s, delta)

    xh_inbox = [{} for _ in range(n)]
    for i in range(n):
        for j in g.neighbors[i]:
            xh_inbox[j][i] = x_hat[i]
    msgs += 1

    ck = (k + 1.0) / 2.0
    c1 = (k + 1.0) / (k + 3.0)
    ca = (2.0 / (k + 3.0)) * alpha
    a_co = k / (k + 2.0)
    b_co = 2.0 / (k + 2.0)

    new_states = []
    repairs = []
    for i in range(n):
        st = states[i]
        inbox = xh_inbox[i]
        assert set(inbox) == set(g.neighbors[i]), "locality audit failed"
        s = 0.0
        for j in g.omega(i):
            s += x_hat[i] if j == i else inbox[j]
        gval = 1.0 - s
        z = st.z + ck * gval
        mu = st.lam + alpha * gval
        if mu < 0.0:
            mu = 0.0
        lam_next = c1 * mu + ca * (z if z > 0.0 else 0.0)
        x_bar = {}
        for j in g.omega(i):
            xh_j = x_hat[i] if j == i else inbox[j]
            x_bar[j] = a_co * st.x_bar_local[j] + b_co * xh_j
        s2 = 0.0
        for j in g.omega(i):
            s2 += x_bar[j]
        e = 1.0 - s2
        if e < 0.0:
            e = 0.0
        xi = x_bar[i] + e
        if not (math.isfinite(lam_next) and math.isfinite(z) and math.isfinite(xi)):
            raise NumericFailure(f"non-finite state at node {i}, round {k}")
        repairs.append(e)
        new_states.append(
            NodeState(lam=lam_next, mu=mu, z=z, x_hat=x_hat[i], x_bar_local=x_bar, x=xi)
        )

    # engine-side trace (global view; nodes never read it)
    x = [st.x for st in new_states]
    obj = 0.0
    for v in x:
        obj += v
    slack = math.inf
    for i in range(n):
        s = 0.0
        for j in g.omega(i):
            s += x[j]
        slack = min(slack, s - 1.0)
    en = 0.0
    for e in repairs:
        en += e * e
    trace = RoundTrace(
        round=k,
        objective=obj,
        min_slack=slack,
        msgs_sent=msgs,
        msgs_cum=2 * k + 1,
        repair_norm=math.sqrt(en),
    )
    return new_states, trace


@njit(cache=True)
def _run_rounds(flat, start, delta, alpha, k_last):
    n = start.shape[0] - 1
    lam = np.zeros(n)
    lam_next = np.zeros(n)
    z = np.zeros(n)
    xbar = np.zeros(n)
    xhat = np.zeros(n)
    x = np.zeros(n)
    obj = np.zeros(k_last + 1)
    slack = np.zeros(k_last + 1)
    enorm = np.zeros(k_last + 1)
    for k in range(k_last + 1):
        for i in range(n):
            s = 0.0
            for idx in range(start[i], start[i + 1]):
                s += lam[flat[idx]]
            t = (s - 1.0) / delta
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            xhat[i] = t
        ck = (k + 1.0) / 2.0
        c1 = (k + 1.0) / (k + 3.0)
        ca = (2.0 / (k + 3.0)) * alpha
        a_co = k / (k + 2.0)
        b_co = 2.0 / (k + 2.0)
        for i in range(n):
            s = 0.0
            for idx in range(start[i], start[i + 1]):
                s += xhat[flat[idx]]
            gval = 1.0 - s
            z[i] = z[i] + ck * gval
            mu = lam[i] + alpha * gval
            if mu < 0.0:
                mu = 0.0
            zp = z[i] if z[i] > 0.0 else 0.0
            lam_next[i] = c1 * mu + ca * zp
        for j in range(n):
            xbar[j] = a_co * xbar[j] + b_co * xhat[j]
        en = 0.0
        for i in range(n):
            s = 0.0
            for idx in range(start[i], start[i + 1]):
                s += xbar[flat[idx]]
            e = 1.0 - s
            if e < 0.0:
                e = 0.0
            x[i] = xbar[i] + e
            en += e * e
        enorm[k] = math.sqrt(en)
        o = 0.0
        for i in range(n):
            o += x[i]
        obj[k] = o
        ms = math.inf
        for i in range(n):
            s = 0.0
            for idx in range(start[i], start[i + 1]):
                s += x[flat[idx]]
            if s - 1.0 < ms:
                ms = s - 1.0
        slack[k] = ms
        tmp = lam
        lam = lam_next
        lam_next = tmp
    return x, obj, slack, enorm


def solve(inst: FdsInstance, params: SolverParams, oracle_objective: float = None):
    """Run the distributed solver for its full round budget.

    Returns (x, traces): the feasible allocation after the last round and one
    :class:`RoundTrace` per executed round. Deterministic given its inputs.
    ``oracle_objective`` (when known) fills the per-round relative error.
    """
    g = inst.graph
    delta, alpha, last, _ = params.resolve(g)
    if inst.delta != delta:
        raise ValueError(
            f"instance delta {inst.delta} disagrees with solver delta {delta}"
        )
    flat, start = g.omega_arrays()
    x, obj, slack, enorm = _run_rounds(flat, start, delta, alpha, last)
    if not (np.isfinite(x).all() and np.isfinite(obj).all()):
        bad = int(np.flatnonzero(~np.isfinite(obj))[0]) if not np.isfinite(obj).all() else last
        raise NumericFailure(f"non-finite solver state at round {bad}")
    traces = []
    for k in range(last + 1):
        rel = None
        if oracle_objective is not None:
            rel = (obj[k] - oracle_objective) / oracle_objective
        traces.append(
            RoundTrace(
                round=k,
                objective=float(obj[k]),
                min_slack=float(slack[k]),
                msgs_sent=1 if k == 0 else 2,
                msgs_cum=2 * k + 1,
                repair_norm=float(enorm[k]),
                rel_error=rel,
            )
        )
    return x, traces


# -- dual function, for gradient checks and the regularized oracle's cross-checks


def _check_multipliers(lam, n: int) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (n,):
        raise ValueError(f"multiplier vector must have length {n}")
    if np.any(lam < 0):
        raise ValueError("multipliers must be nonnegative")
    return lam


def dual_value(lam, inst: FdsInstance) -> float:
    """Concave dual of the regularized problem, evaluated in closed form."""
    g = inst.graph
    lam = _check_multipliers(lam, g.n)
    x_hat = _inner_profile(lam, inst)
    viol = 1.0 - _omega_sums(x_hat, g)
    return float(
        x_hat.sum() + 0.5 * inst.delta * np.dot(x_hat, x_hat) + np.dot(lam, viol)
    )


def dual_gradient(lam, inst: FdsInstance) -> np.ndarray:
    """Gradient of the dual: per-node constraint violation at the inner minimizer."""
    g = inst.graph
    lam = _check_multipliers(lam, g.n)
    return 1.0 - _omega_sums(_inner_profile(lam, inst), g)


def _omega_sums(v, g: StorageGraph) -> np.ndarray:
    flat, start = g.omega_arrays()
    return np.add.reduceat(v[flat], start[:-1])


def _inner_profile(lam, inst: FdsInstance) -> np.ndarray:
    sums = _omega_sums(lam, inst.graph)
    return np.array([inner_minimizer(s, inst.delta) for s in sums])
