"""Event-driven simulation of the averaging process and its chunk discretization.

The averaging process carries a unit of mass on the vertices of a graph;
each edge rings at rate 1 and replaces both endpoint masses by their
average.  The chunk process tracks a dyadic under-approximation of the
same mass: 2^H chunks of mass 2^-H that split in halves toward empty
vertices and are killed when both endpoints of a ringing edge are
occupied (beta event) or when a lone chunk cannot split further (alpha
event).  Coupled on one event stream the chunk mass never exceeds the
averaging mass, which is what makes it useful as a lower-bound device.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._mc import mean_stderr, run_replicas
from .graph_core import COMPLETE_BIPARTITE, Graph

CEMETERY = _kernels.CEMETERY

# Tolerance on Σ mass = 1 for float configurations.
MASS_TOL = 1e-9


def validate_mass(eta, n: int | None = None) -> np.ndarray:
    """Check a mass configuration and return it as a float array.

    Violations are assertion failures: configurations are never silently
    renormalized.
    """
    arr = np.asarray(eta, dtype=np.float64)
    assert arr.ndim == 1, "mass configuration must be one-dimensional"
    if n is not None:
        assert arr.shape[0] == n, "mass configuration has wrong length"
    assert np.all(arr >= 0.0), "mass configuration has negative entries"
    assert abs(math.fsum(arr.tolist()) - 1.0) < MASS_TOL, "mass does not sum to 1"
    return arr


def dirac(n: int, x: int) -> np.ndarray:
    """Unit mass at vertex x."""
    if not 0 <= x < n:
        raise ValueError(f"vertex {x} out of range for n={n}")
    eta = np.zeros(n)
    eta[x] = 1.0
    return eta


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def pair_update(eta, x: int, y: int) -> np.ndarray:
    """One averaging move on the pair (x, y); returns a new configuration."""
    if x == y:
        raise ValueError("pair update requires two distinct vertices")
    eta = validate_mass(eta).copy()
    avg = 0.5 * (eta[x] + eta[y])
    eta[x] = avg
    eta[y] = avg
    return eta


def lp_distance(eta, p: int) -> tuple[float, float]:
    """Distance to the flat configuration: ((1/n) Σ |n eta(x) - 1|^p, its p-th root)."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    eta = validate_mass(eta)
    n = eta.shape[0]
    dev = np.abs(n * eta - 1.0)
    if p == 2:
        dev = dev * dev
    power = math.fsum(dev.tolist()) / n
    return power, power ** (1.0 / p)


def _edge_columns(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    edges = g.edges
    return np.ascontiguousarray(edges[:, 0]), np.ascontiguousarray(edges[:, 1])


def simulate(g: Graph, xi, t: float, rng: np.random.Generator) -> np.ndarray:
    """Run the averaging process on g from xi up to time t.

    Inter-event gaps are Exp(|E|) and the ringing edge is uniform, which
    realizes independent rate-1 clocks on all edges.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    eta = validate_mass(xi, g.n).copy()
    if t > 0:
        eu, ev = _edge_columns(g)
        _kernels.avg_events(eta, eu, ev, float(t), rng)
        assert abs(math.fsum(eta.tolist()) - 1.0) < MASS_TOL, "mass drifted"
    return eta


def mean_lp(
    g: Graph,
    xi,
    t: float,
    p: int,
    replicas: int,
    seed: int,
    threads: int = 1,
) -> tuple[float, float]:
    """Monte Carlo estimate of the mean p-th power distance at time t.

    Returns (sample mean, standard error of the mean).  Replica r draws
    from a stream derived from (seed, r), and the reduction order is
    fixed, so the result is reproducible for a fixed seed regardless of
    threads.
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if t < 0:
        raise ValueError("time must be nonnegative")
    xi = validate_mass(xi, g.n)
    eu, ev = _edge_columns(g)
    t = float(t)

    def one(_r: int, rng: np.random.Generator) -> float:
        eta = xi.copy()
        if t > 0:
            _kernels.avg_events(eta, eu, ev, t, rng)
        n = eta.shape[0]
        dev = np.abs(n * eta - 1.0)
        if p == 2:
            dev = dev * dev
        return float(np.sum(dev) / n)

    values = run_replicas(one, replicas, seed, threads=threads)[:, 0]
    return mean_stderr(values)


# ---------------------------------------------------------------------------
# chunk process


def chunk_exponent(n: int) -> int:
    """Chunk-count exponent H = floor(log2 n - (log n)^(1/3))."""
    if n < 2:
        raise ValueError("need at least two vertices")
    return int(math.floor(math.log2(n) - math.log(n) ** (1.0 / 3.0)))


@dataclass(frozen=True)
class ChunkState:
    """Snapshot of the chunk process.

    position maps each of the 2^H chunks to a vertex or CEMETERY; alpha
    counts splits (alpha = H+1 marks a lone-chunk death); beta flags a
    collision death.  Masses are dyadic: a vertex holding c chunks has
    mass c * 2^-H exactly.
    """

    position: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    H: int
    t: float
    n: int

    @property
    def n_chunks(self) -> int:
        return 1 << self.H

    def alive(self) -> np.ndarray:
        return self.position != CEMETERY

    def vertex_counts(self) -> np.ndarray:
        pos = self.position[self.alive()]
        return np.bincount(pos, minlength=self.n).astype(np.int64)

    def vertex_mass(self) -> np.ndarray:
        return self.vertex_counts() * 2.0 ** (-self.H)

    def dead_count(self) -> int:
        return int(np.count_nonzero(~self.alive()))

    def conservation_exact(self) -> bool:
        """Alive plus dead chunk counts equal 2^H as integers."""
        return int(self.vertex_counts().sum()) + self.dead_count() == self.n_chunks


_CHUNK_STATUS_MESSAGES = {
    _kernels.CHUNK_LONE_ALPHA_VIOLATION: (
        "lone chunk with alpha != H: unreachable under the vertex-mass invariant"
    ),
    _kernels.CHUNK_COUNT_VIOLATION: "chunk count bookkeeping violated",
    _kernels.CHUNK_MASS_VIOLATION: "per-vertex dyadic mass invariant violated",
}


def _require_bipartite(g: Graph) -> None:
    if g.family != COMPLETE_BIPARTITE:
        raise NotImplementedError("chunk process is defined on complete bipartite graphs")


def _check_chunk_status(status: int) -> None:
    if status != _kernels.CHUNK_OK:
        raise AssertionError(_CHUNK_STATUS_MESSAGES.get(status, f"status {status}"))


def chunk_simulate(g: Graph, x0: int, t: float, rng: np.random.Generator) -> ChunkState:
    """Run the chunk process from a point mass at x0 up to time t."""
    _require_bipartite(g)
    if not 0 <= x0 < g.n:
        raise ValueError(f"vertex {x0} out of range")
    if t < 0:
        raise ValueError("time must be nonnegative")
    H = chunk_exponent(g.n)
    eu, ev = _edge_columns(g)
    pos, alpha, beta, status = _kernels.chunk_events(
        g.n, int(x0), eu, ev, float(t), H, rng
    )
    _check_chunk_status(status)
    return ChunkState(position=pos, alpha=alpha, beta=beta, H=H, t=float(t), n=g.n)


def chunk_alive_stats(
    g: Graph,
    x0: int,
    t: float,
    replicas: int,
    seed: int,
    b: float = 1.0,
    threads: int = 1,
) -> tuple[float, float]:
    """Estimate the two chunk survival probabilities at time t.

    Returns (mean fraction of chunks alive with alpha <= H, mean fraction
    alive with alpha in [log2 n - b sqrt(log n), H]).  The second is the
    joint event (alive and heavy) that stays likely before the mixing
    window.
    """
    _require_bipartite(g)
    if t < 0:
        raise ValueError("time must be nonnegative")
    H = chunk_exponent(g.n)
    eu, ev = _edge_columns(g)
    threshold = math.log2(g.n) - b * math.sqrt(math.log(g.n))
    n = g.n
    t = float(t)

    def one(_r: int, rng: np.random.Generator) -> tuple[float, float]:
        pos, alpha, beta, status = _kernels.chunk_events(n, int(x0), eu, ev, t, H, rng)
        _check_chunk_status(status)
        alive = pos != CEMETERY
        n_chunks = alive.shape[0]
        alive_frac = np.count_nonzero(alive) / n_chunks
        tail = alive & (alpha >= threshold)
        return alive_frac, np.count_nonzero(tail) / n_chunks

    values = run_replicas(one, replicas, seed, n_outputs=2, threads=threads)
    alive_mean, _ = mean_stderr(values[:, 0])
    tail_mean, _ = mean_stderr(values[:, 1])
    return alive_mean, tail_mean


def coupled_run(
    g: Graph, x0: int, t: float, rng: np.random.Generator
) -> tuple[np.ndarray, ChunkState, float]:
    """Averaging and chunk processes driven by the same event stream.

    Returns (eta_t, chunk state, min over events and touched vertices of
    eta(x) - w(x)).  The slack stays nonnegative up to float rounding
    because chunk splits move at most half the mass an averaging move
    equalizes.
    """
    _require_bipartite(g)
    if not 0 <= x0 < g.n:
        raise ValueError(f"vertex {x0} out of range")
    if t < 0:
        raise ValueError("time must be nonnegative")
    H = chunk_exponent(g.n)
    eu, ev = _edge_columns(g)
    mass, pos, alpha, beta, status, min_slack = _kernels.coupled_avg_chunk_events(
        g.n, int(x0), eu, ev, float(t), H, rng
    )
    _check_chunk_status(status)
    state = ChunkState(position=pos, alpha=alpha, beta=beta, H=H, t=float(t), n=g.n)
    if not math.isfinite(min_slack):
        min_slack = float(mass.min())
    return mass, state, float(min_slack)


def chunk_mixing_time(g: Graph, lam: float = 0.0) -> float:
    """Center of the L1 cutoff window used by the chunk analysis.

    t_mix = log2(n) / (2 gamma) with gamma = m(n-m)/n, shifted by
    lam sqrt(log n) / gamma.
    """
    _require_bipartite(g)
    n = g.n
    m = g.m
    gamma = m * (n - m) / n
    return math.log2(n) / (2.0 * gamma) + lam * math.sqrt(math.log(n)) / gamma
