"""Random-linear-coding check of neighborhood recovery.

The data object is split into ``m`` parts; node i stores ``ceil(x_i * m)``
random coefficient vectors over GF(256) (payloads are irrelevant: recovery
succeeds exactly when the coefficient vectors collected from a closed
neighborhood span all ``m`` parts). An ideal erasure code would make recovery
certain whenever the neighborhood stores a full object; random combinations
achieve that only with high probability, which is what the verifier measures.

Field: GF(256) with reduction polynomial x^8 + x^4 + x^3 + x + 1 (0x11b), the
AES representation, so coefficient streams are bit-exact everywhere.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .graph import StorageGraph

_POLY = 0x11B


def _build_tables():
    exp = np.zeros(510, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    v = 1
    for i in range(255):
        exp[i] = v
        exp[i + 255] = v
        log[v] = i
        # multiply by the generator 0x03
        v2 = (v << 1) ^ (_POLY if v & 0x80 else 0)
        v = (v2 ^ v) & 0xFF
    mul = exp[(log[:, None] + log[None, :])].copy()
    mul[0, :] = 0
    mul[:, 0] = 0
    return exp, log, mul


_EXP, _LOG, _MUL = _build_tables()


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(_EXP[int(_LOG[a]) + int(_LOG[b])])


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return int(_EXP[255 - int(_LOG[a])])


def gf_rank(mat: np.ndarray) -> int:
    """Rank of a uint8 matrix over GF(256), by Gaussian elimination."""
    if mat.size == 0:
        return 0
    m = np.array(mat, dtype=np.uint8, copy=True)
    nrows, ncols = m.shape
    rank = 0
    for col in range(ncols):
        piv = -1
        for r in range(rank, nrows):
            if m[r, col]:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            m[[rank, piv]] = m[[piv, rank]]
        m[rank] = _MUL[gf_inv(int(m[rank, col]))][m[rank]]
        below = m[rank + 1 :, col]
        nz = np.flatnonzero(below)
        if nz.size:
            m[rank + 1 + nz] ^= _MUL[below[nz][:, None], m[rank][None, :]]
        rank += 1
        if rank == nrows:
            break
    return rank


# -- dissemination ---------------------------------------------------------


class FloodSchedule(NamedTuple):
    order: list  # visit order, one entry per node
    tree_edges: list  # (parent, child) discovery edges, all in E
    sources: list  # one seeded-uniform source per connected component


def flood_schedule(g: StorageGraph, seed) -> FloodSchedule:
    """BFS flooding order covering every component exactly once.

    One source is drawn uniformly per component (components in order of their
    smallest node); queues expand neighbors in ascending index order. Accepts
    a seed or an existing numpy Generator.
    """
    rng = np.random.default_rng(seed)
    seen = [False] * g.n
    order, tree, sources = [], [], []
    for first in range(g.n):
        if seen[first]:
            continue
        comp = []
        stack = [first]
        seen[first] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in g.neighbors[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        comp.sort()
        src = comp[int(rng.integers(len(comp)))]
        sources.append(src)
        visited = {src}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            order.append(u)
            for v in g.neighbors[u]:
                if v not in visited:
                    visited.add(v)
                    tree.append((u, v))
                    queue.append(v)
    return FloodSchedule(order=order, tree_edges=tree, sources=sources)


@dataclass(frozen=True)
class CodedStore:
    """Coefficient vectors held per node; payloads intentionally omitted."""

    m: int
    per_node_combos: list  # node -> uint8 array of shape (count_i, m)


def disseminate(g: StorageGraph, x, m: int, seed) -> CodedStore:
    """Flood the object and let each visited node draw its combinations.

    Node i stores ``min(m, ceil(x_i * m))`` uniform coefficient vectors
    (solver iterates may exceed 1, never 2). Deterministic for a fixed seed:
    sources are drawn per component, then rows in visit order.
    """
    if m < 1:
        raise ValueError("part count m must be >= 1")
    x = np.asarray(x, dtype=float)
    if x.shape != (g.n,):
        raise ValueError(f"allocation must have length {g.n}")
    if np.any(x < -1e-12) or np.any(x > 2.0 + 1e-12):
        raise ValueError("allocation entries must lie in [0, 2]")
    rng = np.random.default_rng(seed)
    sched = flood_schedule(g, rng)
    combos = [None] * g.n
    for node in sched.order:
        count = min(m, max(0, math.ceil(x[node] * m - 1e-9)))
        combos[node] = rng.integers(0, 256, size=(count, m), dtype=np.uint8)
    return CodedStore(m=m, per_node_combos=combos)


class RecoveryResult(NamedTuple):
    success: bool
    rank: int


def try_recover(store: CodedStore, g: StorageGraph, access_node: int) -> RecoveryResult:
    """Collect all combinations in the closed neighborhood and test the span."""
    if not (0 <= access_node < g.n):
        raise ValueError(f"access node {access_node} out of range")
    rows = [store.per_node_combos[j] for j in g.omega(access_node)]
    rows = [r for r in rows if r.shape[0] > 0]
    if not rows:
        return RecoveryResult(False, 0)
    rank = gf_rank(np.vstack(rows))
    return RecoveryResult(rank == store.m, rank)
