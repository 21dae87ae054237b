"""Relative-entropy functionals and entropy-based mixing bounds.

Relative entropy against the flat measure contracts under the averaging
process at a graph-dependent rate kappa: each averaging move on an edge
removes exactly (2/n) times the local edge entropy, so kappa is the best
constant comparing the global entropy to the summed local ones.  All
entropies are kept in nats internally; the few log2-based formulas
convert explicitly at the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._mc import mean_stderr, run_replicas
from .avg_sim import validate_mass
from .graph_core import COMPLETE, HYPERCUBE, Graph, degree_stats

# entries are floored at this value inside logs during optimization
LOG_FLOOR = 1e-12


def relative_entropy(eta) -> float:
    """D(eta || pi) in nats against the flat measure; 0 log 0 = 0."""
    eta = validate_mass(eta)
    n = eta.shape[0]
    pos = eta > 0
    terms = eta[pos] * np.log(n * eta[pos])
    return math.fsum(terms.tolist())


def local_entropy(eta, x: int, y: int, n: int | None = None) -> float:
    """Edge entropy ent_xy: (n/2) [eta(x) log(eta(x)/avg) + eta(y) log(eta(y)/avg)]
    with avg the pair average; zero iff eta(x) = eta(y)."""
    if x == y:
        raise ValueError("local entropy requires two distinct vertices")
    eta = np.asarray(eta, dtype=np.float64)
    if n is None:
        n = eta.shape[0]
    elif n != eta.shape[0]:
        raise ValueError("n does not match the configuration length")
    a = float(eta[x])
    b = float(eta[y])
    avg = 0.5 * (a + b)
    if avg == 0.0:
        return 0.0
    total = 0.0
    if a > 0:
        total += a * math.log(a / avg)
    if b > 0:
        total += b * math.log(b / avg)
    return 0.5 * n * total


def entropy_production(g: Graph, eta) -> float:
    """(2/n) sum over edges of the local entropies; the exact drop rate."""
    eta = validate_mass(eta, g.n)
    edges = g.edges
    ex = eta[edges[:, 0]]
    ey = eta[edges[:, 1]]
    avg = 0.5 * (ex + ey)
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(ex > 0, ex * np.log(np.where(ex > 0, ex, 1.0) / avg), 0.0)
        ty = np.where(ey > 0, ey * np.log(np.where(ey > 0, ey, 1.0) / avg), 0.0)
    # (2/n) * (n/2) cancels: the edge sum of the bracketed terms
    return math.fsum((tx + ty).tolist())


@dataclass(frozen=True)
class EntropyReport:
    relative_entropy: float
    production: float
    ratio: float


def entropy_report(g: Graph, eta) -> EntropyReport:
    """Entropy, production, and their ratio (nan when the entropy is 0)."""
    d = relative_entropy(eta)
    prod = entropy_production(g, eta)
    ratio = prod / d if d > 1e-12 else math.nan
    return EntropyReport(relative_entropy=d, production=prod, ratio=ratio)


def kappa_known(g: Graph) -> float:
    """Exact entropy constant for families where it is known."""
    if g.family == HYPERCUBE:
        return 1.0
    if g.family == COMPLETE:
        return (g.n - 1) / math.log2(g.n)
    raise NotImplementedError(f"entropy constant unknown for family {g.family!r}")


def kappa_upper(g: Graph) -> float:
    """Universal upper bound mean-degree / log2(n)."""
    _, mean_deg = degree_stats(g)
    return mean_deg / math.log2(g.n)


def _floored_ratio(g: Graph, eta: np.ndarray) -> float:
    """Production / entropy with entries floored inside logs.

    The infimum can sit on the simplex boundary; flooring keeps the
    objective finite there without moving the minimum beyond 1e-6.
    """
    n = eta.shape[0]
    safe = np.maximum(eta, LOG_FLOOR)
    d = float(np.sum(eta * np.log(n * safe)))
    if d <= 1e-12:
        return math.inf
    edges = g.edges
    ex = eta[edges[:, 0]]
    ey = eta[edges[:, 1]]
    sx = safe[edges[:, 0]]
    sy = safe[edges[:, 1]]
    avg = np.maximum(0.5 * (ex + ey), LOG_FLOOR)
    prod = float(np.sum(ex * np.log(sx / avg) + ey * np.log(sy / avg)))
    return prod / d


def _barycentric_grid(n: int, resolution: int):
    """All compositions of `resolution` into n parts, as mass configs."""
    grid = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            grid.append(prefix + [remaining])
            return
        for v in range(remaining + 1):
            rec(prefix + [v], remaining - v, slots - 1)

    rec([], resolution, n)
    return np.asarray(grid, dtype=np.float64) / resolution


def kappa_estimate(
    g: Graph, resolution: int | None = None, step_floor: float = 1e-8
) -> tuple[float, np.ndarray]:
    """Numerical infimum of production/entropy over the simplex.

    Seeds from a barycentric grid (50 points per dimension for n <= 4,
    15 for n in {5, 6}) and refines by projected coordinate descent with
    step halving.  Returns (estimate, minimizing configuration).
    """
    if g.n > 6:
        raise NotImplementedError("kappa estimation is limited to n <= 6")
    if resolution is None:
        resolution = 50 if g.n <= 4 else 15
    pts = _barycentric_grid(g.n, resolution)
    best_val = math.inf
    best_eta = None
    for eta in pts:
        val = _floored_ratio(g, eta)
        if val < best_val:
            best_val = val
            best_eta = eta.copy()
    assert best_eta is not None

    step = 1.0 / resolution
    while step > step_floor:
        improved = False
        for i in range(g.n):
            if best_eta[i] == 0.0:
                continue
            for j in range(g.n):
                if i == j:
                    continue
                move = min(step, best_eta[i])
                cand = best_eta.copy()
                cand[i] -= move
                cand[j] += move
                val = _floored_ratio(g, cand)
                if val < best_val:
                    best_val = val
                    best_eta = cand
                    improved = True
        if not improved:
            step /= 2.0
    return best_val, best_eta


def entropy_decay_check(
    g: Graph,
    xi,
    t: float,
    replicas: int,
    seed: int,
    kappa: float,
    threads: int = 1,
) -> tuple[float, float, float]:
    """MC mean of D(eta_t || pi) against the bound e^{-kappa t} D(xi || pi).

    Returns (mean, stderr, bound)."""
    xi = validate_mass(xi, g.n)
    edges = g.edges
    eu = np.ascontiguousarray(edges[:, 0])
    ev = np.ascontiguousarray(edges[:, 1])
    t = float(t)

    def one(_r: int, rng: np.random.Generator) -> float:
        eta = xi.copy()
        if t > 0:
            _kernels.avg_events(eta, eu, ev, t, rng)
        return relative_entropy(eta)

    values = run_replicas(one, replicas, seed, threads=threads)[:, 0]
    mean, se = mean_stderr(values)
    bound = math.exp(-kappa * t) * relative_entropy(xi)
    return mean, se, bound


def l1_decay_check(
    g: Graph,
    xi,
    t: float,
    replicas: int,
    seed: int,
    kappa: float,
    threads: int = 1,
) -> tuple[float, float, float]:
    """MC mean of the L1 distance against e^{-kappa t / 2} sqrt(2 log n).

    Returns (mean, stderr, bound)."""
    xi = validate_mass(xi, g.n)
    edges = g.edges
    eu = np.ascontiguousarray(edges[:, 0])
    ev = np.ascontiguousarray(edges[:, 1])
    n = g.n
    t = float(t)

    def one(_r: int, rng: np.random.Generator) -> float:
        eta = xi.copy()
        if t > 0:
            _kernels.avg_events(eta, eu, ev, t, rng)
        return float(np.sum(np.abs(n * eta - 1.0)) / n)

    values = run_replicas(one, replicas, seed, threads=threads)[:, 0]
    mean, se = mean_stderr(values)
    bound = math.exp(-kappa * t / 2.0) * math.sqrt(2.0 * math.log(n))
    return mean, se, bound


def entropic_lb_time(g: Graph, eps: float) -> float:
    """Entropy lower-bound time (1 - eps) log2(n) / mean degree."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    _, mean_deg = degree_stats(g)
    return (1.0 - eps) * math.log2(g.n) / mean_deg


def pinsker_l1_bound(d_value: float) -> float:
    """Pinsker: the L1 distance is at most sqrt(2 D)."""
    if d_value < 0:
        raise ValueError("relative entropy must be nonnegative")
    return math.sqrt(2.0 * d_value)


def fannes_audenaert_lb(d_value: float, n: int) -> float:
    """Fannes-Audenaert: the L1 distance is at least D/log n - 1/(e log n)."""
    if d_value < 0:
        raise ValueError("relative entropy must be nonnegative")
    if n < 2:
        raise ValueError("need at least two vertices")
    ln = math.log(n)
    return d_value / ln - 1.0 / (math.e * ln)
