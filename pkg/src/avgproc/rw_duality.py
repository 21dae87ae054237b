"""Random-walk kernels, coupled-walk computations, and duality identities.

The averaging process is dual to random walks: the expected mass at a
vertex equals the one-walk kernel started from the initial condition,
and second moments are governed by a coupled pair of walks (CRW) whose
particles, when an edge holding them rings, land independently on either
endpoint.  These exact kernels act as oracles for the simulator, and the
decomposition of the expected squared distance into a one-walk term plus
a noise integral is reproduced here to quadrature accuracy.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln
from scipy.stats import poisson

from . import _kernels
from ._mc import mean_stderr, run_replicas
from .avg_sim import validate_mass
from .graph_core import COMPLETE_BIPARTITE, HYPERCUBE, Graph, degrees

GENERIC_SIZE_CAP = 4096
PAIR_SIZE_CAP = 64

_POISSON_TAIL = 1e-12
KERNEL_SUM_TOL = 1e-10


def expm_action(L, v: np.ndarray, t: float, tail: float = _POISSON_TAIL) -> np.ndarray:
    """Apply exp(t L) to v by uniformization.

    L must be a generator (rows sum to 0, nonnegative off-diagonal),
    sparse or dense.  The Poisson series over powers of I + L/Lambda is
    truncated once the remaining tail is below `tail`; every term is
    nonnegative, so nonnegative inputs stay nonnegative.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if sp.issparse(L):
        diag = L.diagonal()
    else:
        diag = np.diagonal(L)
    lam = float(-diag.min())
    mu = lam * t
    if mu == 0.0:
        return np.array(v, dtype=np.float64, copy=True)
    n_terms = int(poisson.ppf(1.0 - tail, mu)) + 3
    k = np.arange(n_terms + 1)
    log_w = k * math.log(mu) - mu - gammaln(k + 1)
    weights = np.exp(log_w)
    P = L / lam
    if sp.issparse(P):
        P = P + sp.identity(L.shape[0], format=P.format)
    else:
        P = P + np.eye(L.shape[0])
    term = np.array(v, dtype=np.float64, copy=True)
    out = weights[0] * term
    for i in range(1, n_terms + 1):
        term = P @ term
        out += weights[i] * term
    return out


def walk_generator_sparse(g: Graph) -> sp.csr_matrix:
    """Generator of the lazy walk (rate 1/2 per incident edge) as CSR."""
    if g.n > GENERIC_SIZE_CAP:
        raise NotImplementedError(
            f"generic walk generator capped at n={GENERIC_SIZE_CAP}"
        )
    edges = g.edges
    eu = edges[:, 0].astype(np.int64)
    ev = edges[:, 1].astype(np.int64)
    rows = np.concatenate([eu, ev, np.arange(g.n)])
    cols = np.concatenate([ev, eu, np.arange(g.n)])
    data = np.concatenate(
        [np.full(eu.size, 0.5), np.full(eu.size, 0.5), -0.5 * degrees(g)]
    )
    return sp.csr_matrix((data, (rows, cols)), shape=(g.n, g.n))


@dataclass(frozen=True)
class RwKernel:
    """One-walk distribution at time t."""

    probs: np.ndarray
    t: float
    source: str

    def __post_init__(self):
        p = self.probs
        assert np.all(p >= -1e-12), "kernel has negative entries"
        assert abs(math.fsum(p.tolist()) - 1.0) < KERNEL_SUM_TOL, "kernel sum off"


@dataclass(frozen=True)
class PairKernel:
    """Ordered-pair distribution of the coupled walks at time t."""

    probs: np.ndarray
    t: float

    def __post_init__(self):
        p = self.probs
        assert p.ndim == 2 and p.shape[0] == p.shape[1]
        assert np.all(p >= -1e-12), "pair kernel has negative entries"
        assert abs(math.fsum(p.ravel().tolist()) - 1.0) < KERNEL_SUM_TOL


def _hypercube_row(d: int, x0: int, t: float) -> np.ndarray:
    """Walk kernel row from x0: coordinates decouple, each agrees with the
    start with probability (1 + e^-t)/2."""
    n = 1 << d
    e = math.exp(-t)
    same = (1.0 + e) / 2.0
    diff = (1.0 - e) / 2.0
    h = np.bitwise_count(np.arange(n, dtype=np.uint64) ^ np.uint64(x0))
    h = h.astype(np.int64)
    return same ** (d - h) * diff**h


def _bipartite_class_masses(own: int, other: int, t: float) -> tuple[float, float, float]:
    """Masses (at source, on rest of source side, on other side) at time t.

    Lumps the walk from a single vertex into three classes of sizes
    (1, own-1, other); the lumped generator is reversible for the class
    sizes, so it is symmetrized and exponentiated exactly.
    """
    sizes = np.array([1.0, own - 1.0, other])
    active = sizes > 0
    G = np.array(
        [
            [-other / 2.0, 0.0, 0.5],
            [0.0, -other / 2.0, (own - 1) / 2.0],
            [other / 2.0, other / 2.0, -own / 2.0],
        ]
    )
    G = G[np.ix_(active, active)]
    s = np.sqrt(sizes[active])
    S = G / s[:, None] * s[None, :]
    vals, vecs = np.linalg.eigh((S + S.T) / 2.0)
    v0 = np.zeros(int(active.sum()))
    v0[0] = 1.0
    coeffs = vecs.T @ (v0 / s)
    masses_active = s * (vecs @ (np.exp(t * vals) * coeffs))
    out = np.zeros(3)
    out[active] = masses_active
    return float(out[0]), float(out[1]), float(out[2])


def _bipartite_kernel(g: Graph, xi: np.ndarray, t: float) -> np.ndarray:
    m = g.m
    k = g.n - m
    w1 = math.fsum(xi[:m].tolist())
    w2 = math.fsum(xi[m:].tolist())
    out = np.zeros(g.n)
    if w1 > 0:
        a, b, c = _bipartite_class_masses(m, k, t)
        b_share = b / (m - 1) if m > 1 else 0.0
        out[:m] += xi[:m] * a + (w1 - xi[:m]) * b_share
        out[m:] += w1 * c / k
    if w2 > 0:
        a, b, c = _bipartite_class_masses(k, m, t)
        b_share = b / (k - 1) if k > 1 else 0.0
        out[m:] += xi[m:] * a + (w2 - xi[m:]) * b_share
        out[:m] += w2 * c / m
    return out


def rw_kernel(g: Graph, xi, t: float) -> RwKernel:
    """Distribution of the lazy walk at time t started from xi.

    Hypercube and complete bipartite graphs use closed forms valid at any
    size; other graphs go through uniformization of the sparse generator
    (n <= 4096).
    """
    xi = validate_mass(xi, g.n)
    t = float(t)
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0:
        return RwKernel(probs=xi.copy(), t=0.0, source="initial")
    if g.family == HYPERCUBE:
        sources = np.flatnonzero(xi)
        probs = np.zeros(g.n)
        for x0 in sources:
            probs += xi[x0] * _hypercube_row(g.d, int(x0), t)
        return RwKernel(probs=probs, t=t, source="hypercube product form")
    if g.family == COMPLETE_BIPARTITE:
        return RwKernel(
            probs=_bipartite_kernel(g, xi, t), t=t, source="bipartite class form"
        )
    if g.n > GENERIC_SIZE_CAP:
        raise NotImplementedError(
            f"no closed form for family {g.family!r} and n > {GENERIC_SIZE_CAP}"
        )
    L = walk_generator_sparse(g)
    probs = expm_action(L, xi, t)
    return RwKernel(probs=probs, t=t, source="uniformization")


def rw_l2_distance(g: Graph, xi, t: float) -> float:
    """Squared L2 distance of the walk kernel from flat: n sum pi_t^2 - 1.

    This is the exact lower bound for the averaging process distance.
    """
    xi = validate_mass(xi, g.n)
    if g.family == HYPERCUBE and np.count_nonzero(xi) == 1:
        # chi-square of the product kernel factorizes per coordinate
        return math.expm1(g.d * math.log1p(math.exp(-2.0 * float(t))))
    if g.family == COMPLETE_BIPARTITE and np.count_nonzero(xi) == 1:
        x0 = int(np.flatnonzero(xi)[0])
        m = g.m
        k = g.n - m
        own, other = (m, k) if x0 < m else (k, m)
        a, b, c = _bipartite_class_masses(own, other, float(t))
        total = a * a
        if own > 1:
            total += b * b / (own - 1)
        total += c * c / other
        return g.n * total - 1.0
    probs = rw_kernel(g, xi, t).probs
    return g.n * math.fsum((probs * probs).tolist()) - 1.0


# ---------------------------------------------------------------------------
# coupled random walk


def _pair_index(x: int, y: int, n: int) -> int:
    return x * n + y


def crw_generator(g: Graph) -> sp.csr_matrix:
    """Generator of the coupled pair of walks over ordered pairs (x, y).

    When edge xy rings, each particle sitting on {x, y} lands on x or y
    independently with probability 1/2: four outcomes at rate 1/4 when
    both particles are on the edge, two at rate 1/2 when exactly one is.
    """
    n = g.n
    if n > PAIR_SIZE_CAP:
        raise NotImplementedError(f"pair generator capped at n={PAIR_SIZE_CAP}")
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for x, y in g.edges:
        x, y = int(x), int(y)
        # both particles on the edge: post-ring law is flat over 4 states
        states = [_pair_index(a, b, n) for a in (x, y) for b in (x, y)]
        for s in states:
            for s2 in states:
                rows.append(s)
                cols.append(s2)
                vals.append(0.25)
            rows.append(s)
            cols.append(s)
            vals.append(-1.0)
        for v in range(n):
            if v == x or v == y:
                continue
            for a, b in ((x, y), (y, x)):
                # first particle on the edge, second elsewhere
                rows += [_pair_index(a, v, n), _pair_index(a, v, n)]
                cols += [_pair_index(b, v, n), _pair_index(a, v, n)]
                vals += [0.5, -0.5]
                # second particle on the edge, first elsewhere
                rows += [_pair_index(v, a, n), _pair_index(v, a, n)]
                cols += [_pair_index(v, b, n), _pair_index(v, a, n)]
                vals += [0.5, -0.5]
    L = sp.csr_matrix(
        (np.asarray(vals), (np.asarray(rows), np.asarray(cols))),
        shape=(n * n, n * n),
    )
    L.sum_duplicates()
    return L


def crw_pair_kernel(g: Graph, xi, t: float) -> PairKernel:
    """Ordered-pair law at time t of the coupled walks started from xi x xi."""
    xi = validate_mass(xi, g.n)
    L = crw_generator(g)
    p0 = np.outer(xi, xi).ravel()
    pt = expm_action(L, p0, float(t))
    return PairKernel(probs=pt.reshape(g.n, g.n), t=float(t))


def meeting_probability(g: Graph, xi, t: float) -> float:
    """Exact probability that the coupled walks from xi x xi share a vertex at t."""
    kernel = crw_pair_kernel(g, xi, t)
    return float(np.trace(kernel.probs))


def meeting_probability_mc(
    g: Graph, xi, t: float, replicas: int, seed: int, threads: int = 1
) -> tuple[float, float]:
    """Monte Carlo version of meeting_probability for graphs of any size."""
    xi = validate_mass(xi, g.n)
    edges = g.edges
    eu = np.ascontiguousarray(edges[:, 0])
    ev = np.ascontiguousarray(edges[:, 1])
    n = g.n
    t = float(t)

    def one(_r: int, rng: np.random.Generator) -> float:
        x0 = int(rng.choice(n, p=xi))
        y0 = int(rng.choice(n, p=xi))
        X, Y = _kernels.crw_events(x0, y0, eu, ev, t, rng)
        return 1.0 if X == Y else 0.0

    values = run_replicas(one, replicas, seed, threads=threads)[:, 0]
    return mean_stderr(values)


# all-pairs meeting probabilities, cached per graph and time
_meeting_cache: dict[tuple, np.ndarray] = {}
_meeting_lock = threading.Lock()


def _graph_key(g: Graph) -> tuple:
    return (g.family, g.n, g.d, g.m)


def meeting_matrix(g: Graph, t: float) -> np.ndarray:
    """Matrix of meeting probabilities from every ordered starting pair.

    One uniformization run of the expectation semigroup applied to the
    diagonal indicator gives all starts at once.
    """
    key = _graph_key(g) + (float(t),)
    with _meeting_lock:
        cached = _meeting_cache.get(key)
    if cached is not None:
        return cached
    n = g.n
    L = crw_generator(g)
    f = np.eye(n).ravel()
    M = expm_action(L, f, float(t)).reshape(n, n)
    with _meeting_lock:
        _meeting_cache[key] = M
    return M


def phi(g: Graph, x: int, y: int, t: float) -> float:
    """Meeting-probability defect (P_xx + P_yy - 2 P_xy) / 2, in [0, 1]."""
    if x == y:
        return 0.0
    M = meeting_matrix(g, t)
    val = 0.5 * (M[x, x] + M[y, y] - 2.0 * M[x, y])
    assert -1e-10 <= val <= 1.0 + 1e-10, f"phi out of range: {val}"
    return min(max(val, 0.0), 1.0)


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 20) -> float:
    fa = f(a)
    fb = f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, fa, b, fb, m, fm, whole, tol, depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        half = tol / 2.0
        return recurse(a, fa, m, fm, lm, flm, left, half, depth + 1) + recurse(
            m, fm, b, fb, rm, frm, right, half, depth + 1
        )

    return recurse(a, fa, b, fb, m, fm, whole, tol, 0)


def noise_term(g: Graph, xi, t: float, tol: float = 1e-8) -> float:
    """Accumulated fluctuation term in the second-moment decomposition.

    (n/2) times the integral over s of the edge sum of squared walk-kernel
    differences at s weighted by phi at t - s.
    """
    if g.n > PAIR_SIZE_CAP:
        raise NotImplementedError(f"noise term capped at n={PAIR_SIZE_CAP}")
    xi = validate_mass(xi, g.n)
    t = float(t)
    if t == 0:
        return 0.0
    edges = g.edges
    eu = edges[:, 0]
    ev = edges[:, 1]
    cache: dict[float, float] = {}

    def integrand(s: float) -> float:
        val = cache.get(s)
        if val is not None:
            return val
        probs = rw_kernel(g, xi, s).probs
        diff = probs[eu] - probs[ev]
        M = meeting_matrix(g, t - s)
        phis = 0.5 * (M[eu, eu] + M[ev, ev] - 2.0 * M[eu, ev])
        phis = np.clip(phis, 0.0, 1.0)
        val = float(np.sum(diff * diff * phis))
        cache[s] = val
        return val

    return 0.5 * g.n * _adaptive_simpson(integrand, 0.0, t, tol)
