"""Graph families for the averaging-process laboratory.

Three families are supported: the d-dimensional hypercube, the complete
bipartite graph K_{m,k}, and the complete graph K_n.  Vertices are dense
integer indices 0..n-1; for the hypercube, vertex i is read as the bit
string of i.  Edge lists are materialized lazily, frozen after
construction, and shared safely across concurrent workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

HYPERCUBE = "hypercube"
COMPLETE_BIPARTITE = "complete_bipartite"
COMPLETE = "complete"

# Edge materialization cap; beyond this the exact/simulator paths that need
# an explicit edge list refuse instead of exhausting memory.
_MAX_EDGES = 1 << 25


@dataclass(frozen=True)
class Graph:
    """Immutable graph with a family tag.

    n: vertex count.
    family: one of HYPERCUBE, COMPLETE_BIPARTITE, COMPLETE.
    d: hypercube dimension (hypercube only).
    m: size of the first part C1 (bipartite only); C1 = {0..m-1},
       C2 = {m..n-1}.
    """

    n: int
    family: str
    d: int | None = None
    m: int | None = None
    _edge_cache: list = field(default_factory=list, repr=False, compare=False)

    @property
    def n_edges(self) -> int:
        if self.family == HYPERCUBE:
            return self.d * (1 << (self.d - 1))
        if self.family == COMPLETE_BIPARTITE:
            return self.m * (self.n - self.m)
        return self.n * (self.n - 1) // 2

    @property
    def edges(self) -> np.ndarray:
        """(|E|, 2) int32 array of unordered edges, first index < second."""
        if not self._edge_cache:
            if self.n_edges > _MAX_EDGES:
                raise NotImplementedError(
                    f"edge list with {self.n_edges} entries exceeds the "
                    f"materialization cap {_MAX_EDGES}"
                )
            self._edge_cache.append(_build_edges(self))
        return self._edge_cache[0]

    def part_of(self, x: int) -> int:
        """Bipartite part of vertex x: 0 for C1, 1 for C2."""
        if self.family != COMPLETE_BIPARTITE:
            raise NotImplementedError("part_of is defined for bipartite graphs only")
        if not 0 <= x < self.n:
            raise ValueError(f"vertex {x} out of range")
        return 0 if x < self.m else 1


def _build_edges(g: Graph) -> np.ndarray:
    if g.family == HYPERCUBE:
        d = g.d
        verts = np.arange(g.n, dtype=np.int32)
        cols = []
        for i in range(d):
            lo = verts[(verts >> i) & 1 == 0]
            cols.append(np.stack([lo, lo | (1 << i)], axis=1))
        edges = np.concatenate(cols, axis=0)
    elif g.family == COMPLETE_BIPARTITE:
        m, k = g.m, g.n - g.m
        left = np.repeat(np.arange(m, dtype=np.int32), k)
        right = np.tile(np.arange(m, m + k, dtype=np.int32), m)
        edges = np.stack([left, right], axis=1)
    elif g.family == COMPLETE:
        iu = np.triu_indices(g.n, k=1)
        edges = np.stack([iu[0].astype(np.int32), iu[1].astype(np.int32)], axis=1)
    else:
        raise NotImplementedError(f"unknown family {g.family!r}")
    edges.setflags(write=False)
    return edges


def hypercube(d: int) -> Graph:
    """Hypercube {0,1}^d: vertices 0..2^d-1, edges at Hamming distance 1."""
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool):
        raise ValueError("d must be an integer")
    if not 1 <= d <= 30:
        raise ValueError(f"hypercube dimension d={d} outside [1, 30]")
    return Graph(n=1 << d, family=HYPERCUBE, d=int(d))


def complete_bipartite(m: int, k: int) -> Graph:
    """Complete bipartite graph: C1 = first m vertices, C2 = remaining k.

    Requires m <= k (the smaller part first); callers must order the parts.
    """
    for v in (m, k):
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
            raise ValueError("part sizes must be integers")
    if m < 1 or k < 1:
        raise ValueError("part sizes must be positive")
    if m > k:
        raise ValueError(f"m={m} > k={k}; the smaller part must come first")
    if m + k > (1 << 30):
        raise ValueError("vertex count exceeds 2^30")
    return Graph(n=int(m + k), family=COMPLETE_BIPARTITE, m=int(m))


def complete(n: int) -> Graph:
    """Complete graph on n vertices."""
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise ValueError("n must be an integer")
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    if n > (1 << 15):
        raise ValueError("complete graph capped at n = 2^15 (edge count)")
    return Graph(n=int(n), family=COMPLETE)


def degrees(g: Graph) -> np.ndarray:
    """Per-vertex degree array, by family formula (no edge list needed)."""
    if g.family == HYPERCUBE:
        return np.full(g.n, g.d, dtype=np.int64)
    if g.family == COMPLETE_BIPARTITE:
        deg = np.empty(g.n, dtype=np.int64)
        deg[: g.m] = g.n - g.m
        deg[g.m :] = g.m
        return deg
    return np.full(g.n, g.n - 1, dtype=np.int64)


def degree_stats(g: Graph) -> tuple[np.ndarray, float]:
    """(per-vertex degrees, mean degree).  Mean is 2|E|/n exactly."""
    deg = degrees(g)
    mean = float(Fraction(2 * g.n_edges, g.n))
    return deg, mean


def relaxation_time(g: Graph) -> float:
    """Inverse spectral gap of the jump-rate-1/2 walk on g.

    Hypercube: 1.  K_{m,k}: 2/m.  K_n: 2/n.
    """
    if g.family == HYPERCUBE:
        return 1.0
    if g.family == COMPLETE_BIPARTITE:
        return 2.0 / g.m
    if g.family == COMPLETE:
        return 2.0 / g.n
    raise NotImplementedError(f"unsupported family {g.family!r}")


def walk_generator_dense(g: Graph) -> np.ndarray:
    """Dense rate matrix of the jump-rate-1/2 random walk (n <= 64).

    L[x, y] = 1/2 for each edge xy, L[x, x] = -deg(x)/2.  Symmetric, so it
    doubles as both the row (distribution) and column (function) generator.
    """
    if g.n > 64:
        raise NotImplementedError("dense walk generator capped at n <= 64")
    L = np.zeros((g.n, g.n))
    e = g.edges
    L[e[:, 0], e[:, 1]] = 0.5
    L[e[:, 1], e[:, 0]] = 0.5
    np.fill_diagonal(L, -degrees(g) / 2.0)
    return L
