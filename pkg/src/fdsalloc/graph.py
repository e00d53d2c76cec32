"""Storage-node network: construction, topologies, graph powers, edge-list I/O.

A :class:`StorageGraph` stores the open adjacency (no self-loops). The closed
neighborhood of node ``i`` is ``neighbors[i]`` plus ``i`` itself; all covering
sums in the rest of the package run over closed neighborhoods. Degree
conventions: ``d_max`` / ``d_min`` are the largest / smallest *open* degrees,
so that ``d_max + 1`` is the size of the largest closed neighborhood.
"""

from __future__ import annotations

import math

import numpy as np


class EdgeListParseError(ValueError):
    """Malformed edge-list text; carries the 1-based offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class StorageGraph:
    """Immutable undirected graph on nodes ``0..n-1``.

    Neighbor lists are sorted and exclude the node itself. Instances are safe
    to share across threads.
    """

    __slots__ = ("n", "neighbors", "_omega_arrays")

    def __init__(self, n: int, edges=()):
        if n < 1:
            raise ValueError("graph needs at least one node")
        adj = [set() for _ in range(n)]
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range for n={n}")
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            adj[i].add(j)
            adj[j].add(i)
        self.n = n
        self.neighbors = tuple(tuple(sorted(s)) for s in adj)
        self._omega_arrays = None

    # -- degree conventions ------------------------------------------------

    @property
    def d_max(self) -> int:
        """Largest open degree; d_max + 1 = largest closed neighborhood."""
        return max(len(nb) for nb in self.neighbors)

    @property
    def d_min(self) -> int:
        """Smallest open degree."""
        return min(len(nb) for nb in self.neighbors)

    def omega(self, i: int) -> tuple:
        """Sorted closed neighborhood of node i (neighbors plus i)."""
        return tuple(sorted(self.neighbors[i] + (i,)))

    def closed_degree(self, i: int) -> int:
        return len(self.neighbors[i]) + 1

    # -- bulk views ----------------------------------------------------------

    def edges(self):
        """Sorted list of edges (i, j) with i < j."""
        return [(i, j) for i in range(self.n) for j in self.neighbors[i] if i < j]

    def num_edges(self) -> int:
        return sum(len(nb) for nb in self.neighbors) // 2

    def omega_arrays(self):
        """Closed neighborhoods flattened for vector kernels.

        Returns (flat, start): ``flat[start[i]:start[i+1]]`` is the sorted
        closed neighborhood of node i. Cached; arrays are read-only.
        """
        if self._omega_arrays is None:
            flat = np.fromiter(
                (j for i in range(self.n) for j in self.omega(i)),
                dtype=np.int64,
            )
            start = np.zeros(self.n + 1, dtype=np.int64)
            for i in range(self.n):
                start[i + 1] = start[i] + self.closed_degree(i)
            flat.setflags(write=False)
            start.setflags(write=False)
            self._omega_arrays = (flat, start)
        return self._omega_arrays

    def __setattr__(self, name, value):
        if name in ("n", "neighbors") and hasattr(self, "neighbors"):
            raise AttributeError("StorageGraph is immutable")
        object.__setattr__(self, name, value)

    def __eq__(self, other):
        return (
            isinstance(other, StorageGraph)
            and self.n == other.n
            and self.neighbors == other.neighbors
        )

    def __hash__(self):
        return hash((self.n, self.neighbors))

    def __repr__(self):
        return f"StorageGraph(n={self.n}, edges={self.num_edges()})"


# -- generators ---------------------------------------------------------------


def geometric_random_graph(n: int, radius: float, seed: int) -> StorageGraph:
    """Random geometric graph on the unit square.

    Nodes are placed i.i.d. uniform on [0,1]^2 using the PCG64 stream of
    ``numpy.random.default_rng(seed)`` (one row of two doubles per node, in
    node order); an edge joins i and j iff the squared Euclidean distance
    satisfies ``dx*dx + dy*dy <= radius*radius`` in float64. The placement and
    the comparison rule together make the graph reproducible bit-for-bit.

    Args:
        n: node count, >= 1.
        radius: connection radius, in (0, sqrt(2)].
        seed: PRNG seed for the placement.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 < radius <= math.sqrt(2.0)):
        raise ValueError("radius must lie in (0, sqrt(2)]")
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    dx = pts[:, 0][:, None] - pts[:, 0][None, :]
    dy = pts[:, 1][:, None] - pts[:, 1][None, :]
    within = dx * dx + dy * dy <= radius * radius
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if within[i, j]]
    return StorageGraph(n, edges)


def erdos_renyi_graph(n: int, p: float, seed: int) -> StorageGraph:
    """G(n, p) graph; each pair (i, j), i < j, drawn once in row order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((i, j))
    return StorageGraph(n, edges)


def cycle_graph(n: int) -> StorageGraph:
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    return StorageGraph(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> StorageGraph:
    return StorageGraph(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n: int) -> StorageGraph:
    return StorageGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(n: int) -> StorageGraph:
    """Star on n nodes with center 0."""
    return StorageGraph(n, [(0, i) for i in range(1, n)])


# -- graph powers --------------------------------------------------------------


def graph_power(g: StorageGraph, ell: int) -> StorageGraph:
    """Graph with an edge {i, j} iff the hop distance in g is <= ell.

    ell = 1 returns a graph equal to g. Models data access through ell-hop
    neighborhoods.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if ell == 1:
        return StorageGraph(g.n, g.edges())
    edges = []
    for src in range(g.n):
        # BFS truncated at depth ell
        dist = {src: 0}
        frontier = [src]
        for d in range(1, ell + 1):
            nxt = []
            for u in frontier:
                for v in g.neighbors[u]:
                    if v not in dist:
                        dist[v] = d
                        nxt.append(v)
            frontier = nxt
        for v in dist:
            if src < v:
                edges.append((src, v))
    return StorageGraph(g.n, edges)


# -- edge-list text format -----------------------------------------------------


def read_edge_list(text: str) -> StorageGraph:
    """Parse the plain edge-list format: first line N, then one ``i j`` per line.

    Indices are 0-based; duplicate edges collapse; trailing whitespace and
    blank lines are tolerated. Raises :class:`EdgeListParseError` naming the
    offending 1-based line.
    """
    n = None
    edges = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if n is None:
            if len(tokens) != 1:
                raise EdgeListParseError(line_no, "expected a single node count")
            try:
                n = int(tokens[0])
            except ValueError:
                raise EdgeListParseError(line_no, f"bad node count {tokens[0]!r}") from None
            if n < 1:
                raise EdgeListParseError(line_no, "node count must be >= 1")
            continue
        if len(tokens) != 2:
            raise EdgeListParseError(line_no, f"expected 'i j', got {line!r}")
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise EdgeListParseError(line_no, f"bad edge tokens {line!r}") from None
        if not (0 <= i < n and 0 <= j < n):
            raise EdgeListParseError(line_no, f"edge ({i},{j}) out of range for n={n}")
        if i == j:
            raise EdgeListParseError(line_no, f"self-loop at node {i}")
        edges.append((i, j))
    if n is None:
        raise EdgeListParseError(1, "empty input")
    return StorageGraph(n, edges)


def write_edge_list(g: StorageGraph) -> str:
    """Inverse of read_edge_list; edges sorted with i < j, LF line endings."""
    lines = [str(g.n)]
    lines.extend(f"{i} {j}" for i, j in g.edges())
    return "\n".join(lines) + "\n"
