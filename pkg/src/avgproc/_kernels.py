"""Jitted event loops for the simulators.

All loops draw the global exponential race directly: the next event gap is
Exp(|E|) and the ringing edge is a uniform index into the edge list, valid
because every edge carries an independent rate-1 clock.  Each kernel owns
the generator it is handed, consumes draws in a fixed order, and never
touches shared state, so replica results are reproducible for a fixed
stream regardless of scheduling.  fastmath stays off to keep results
bit-stable across runs.
"""
from __future__ import annotations

import numpy as np
from numba import njit

CEMETERY = -1

# Status codes for the chunk kernels.
CHUNK_OK = 0
CHUNK_LONE_ALPHA_VIOLATION = 1
CHUNK_COUNT_VIOLATION = 2
CHUNK_MASS_VIOLATION = 3


@njit(cache=True, nogil=True)
def avg_events(mass, eu, ev, t, rng):
    """Run the averaging process in place on mass up to time t."""
    n_edges = eu.shape[0]
    scale = 1.0 / n_edges
    now = rng.exponential(scale)
    while now <= t:
        e = rng.integers(0, n_edges)
        x = eu[e]
        y = ev[e]
        avg = 0.5 * (mass[x] + mass[y])
        mass[x] = avg
        mass[y] = avg
        now += rng.exponential(scale)


@njit(cache=True, nogil=True)
def crw_events(x0, y0, eu, ev, t, rng):
    """Coupled pair of walks: each particle on a ringing edge re-lands on
    either endpoint with probability 1/2, independently.  Returns (X_t, Y_t)."""
    n_edges = eu.shape[0]
    scale = 1.0 / n_edges
    X = x0
    Y = y0
    now = rng.exponential(scale)
    while now <= t:
        e = rng.integers(0, n_edges)
        x = eu[e]
        y = ev[e]
        if X == x or X == y:
            X = x if rng.random() < 0.5 else y
        if Y == x or Y == y:
            Y = x if rng.random() < 0.5 else y
        now += rng.exponential(scale)
    return X, Y


@njit(cache=True, nogil=True)
def _chunk_event(x, y, pos, alpha, beta, count, at, H, rng):
    """Apply one edge ring to the chunk state.  Returns (status, alive_delta)."""
    cx = count[x]
    cy = count[y]
    if cx == 0 and cy == 0:
        return CHUNK_OK, 0
    if cx > 0 and cy > 0:
        # both endpoints occupied: every chunk on them dies
        for i in range(cx):
            u = at[x, i]
            beta[u] = 1
            pos[u] = CEMETERY
        for i in range(cy):
            u = at[y, i]
            beta[u] = 1
            pos[u] = CEMETERY
        count[x] = 0
        count[y] = 0
        return CHUNK_OK, -(cx + cy)
    if cx == 0:
        x, y = y, x
        cx, cy = cy, cx
    # x occupied, y empty
    if cx == 1:
        u = at[x, 0]
        if alpha[u] != H:
            # unreachable: a lone chunk always carries alpha = H
            return CHUNK_LONE_ALPHA_VIOLATION, 0
        alpha[u] = H + 1
        pos[u] = CEMETERY
        count[x] = 0
        return CHUNK_OK, -1
    if cx & (cx - 1) != 0:
        return CHUNK_COUNT_VIOLATION, 0
    half = cx // 2
    # choose the moving half uniformly: partial Fisher-Yates selection
    for j in range(half):
        i = rng.integers(j, cx)
        tmp = at[x, j]
        at[x, j] = at[x, i]
        at[x, i] = tmp
    for j in range(half):
        u = at[x, j]
        at[y, j] = u
        pos[u] = y
    for j in range(half, cx):
        at[x, j - half] = at[x, j]
    count[x] = cx - half
    count[y] = half
    for j in range(count[x]):
        alpha[at[x, j]] += 1
    for j in range(half):
        alpha[at[y, j]] += 1
    return CHUNK_OK, 0


@njit(cache=True, nogil=True)
def _chunk_invariants(x, y, alpha, count, at, H, n_alive, n_chunks):
    """Exact conservation and mass bookkeeping checks after an event."""
    dead = n_chunks - n_alive
    if dead < 0 or n_alive < 0:
        return CHUNK_COUNT_VIOLATION
    # every occupied touched vertex holds 2^(H - alpha) chunks of equal alpha
    for v in (x, y):
        c = count[v]
        if c == 0:
            continue
        a = alpha[at[v, 0]]
        if a > H or c != (1 << (H - a)):
            return CHUNK_MASS_VIOLATION
        for i in range(c):
            if alpha[at[v, i]] != a:
                return CHUNK_MASS_VIOLATION
    return CHUNK_OK


@njit(cache=True, nogil=True)
def chunk_events(n, x0, eu, ev, t, H, rng):
    """Chunk-discretized mass process from a point mass at x0.

    Returns (pos, alpha, beta, status).  All 2^H chunks start at x0 with
    alpha = beta = 0.  Total chunk count (alive + cemetery) is conserved
    exactly at every event; mass is count * 2^-H by construction.
    """
    n_chunks = 1 << H
    pos = np.full(n_chunks, x0, dtype=np.int32)
    alpha = np.zeros(n_chunks, dtype=np.int32)
    beta = np.zeros(n_chunks, dtype=np.int8)
    count = np.zeros(n, dtype=np.int32)
    count[x0] = n_chunks
    at = np.zeros((n, n_chunks), dtype=np.int32)
    for u in range(n_chunks):
        at[x0, u] = u

    n_edges = eu.shape[0]
    scale = 1.0 / n_edges
    n_alive = n_chunks
    now = rng.exponential(scale)
    while now <= t:
        e = rng.integers(0, n_edges)
        x = eu[e]
        y = ev[e]
        status, delta = _chunk_event(x, y, pos, alpha, beta, count, at, H, rng)
        if status != CHUNK_OK:
            return pos, alpha, beta, status
        n_alive += delta
        status = _chunk_invariants(x, y, alpha, count, at, H, n_alive, n_chunks)
        if status != CHUNK_OK:
            return pos, alpha, beta, status
        now += rng.exponential(scale)
    return pos, alpha, beta, CHUNK_OK


@njit(cache=True, nogil=True)
def coupled_avg_chunk_events(n, x0, eu, ev, t, H, rng):
    """Averaging process and chunk process driven by one event stream.

    Returns (mass, pos, alpha, beta, status, min_slack) where min_slack is
    the smallest observed eta(x) - w(x) over touched vertices at event
    times; the chunk mass never exceeds the averaging mass, so a negative
    slack beyond float rounding is a violation.
    """
    n_chunks = 1 << H
    chunk_mass = 1.0 / n_chunks
    mass = np.zeros(n)
    mass[x0] = 1.0
    pos = np.full(n_chunks, x0, dtype=np.int32)
    alpha = np.zeros(n_chunks, dtype=np.int32)
    beta = np.zeros(n_chunks, dtype=np.int8)
    count = np.zeros(n, dtype=np.int32)
    count[x0] = n_chunks
    at = np.zeros((n, n_chunks), dtype=np.int32)
    for u in range(n_chunks):
        at[x0, u] = u

    n_edges = eu.shape[0]
    scale = 1.0 / n_edges
    n_alive = n_chunks
    min_slack = np.inf
    now = rng.exponential(scale)
    while now <= t:
        e = rng.integers(0, n_edges)
        x = eu[e]
        y = ev[e]
        avg = 0.5 * (mass[x] + mass[y])
        mass[x] = avg
        mass[y] = avg
        status, delta = _chunk_event(x, y, pos, alpha, beta, count, at, H, rng)
        if status != CHUNK_OK:
            return mass, pos, alpha, beta, status, min_slack
        n_alive += delta
        status = _chunk_invariants(x, y, alpha, count, at, H, n_alive, n_chunks)
        if status != CHUNK_OK:
            return mass, pos, alpha, beta, status, min_slack
        for v in (x, y):
            slack = mass[v] - count[v] * chunk_mass
            if slack < min_slack:
                min_slack = slack
        now += rng.exponential(scale)
    return mass, pos, alpha, beta, CHUNK_OK, min_slack


@njit(cache=True, nogil=True)
def bd_hitting_time(p, q, M, rng):
    """First hitting time of state M for a birth-death chain started at 0."""
    k = 0
    t = 0.0
    while k < M:
        tot = p[k] + q[k]
        t += rng.exponential(1.0 / tot)
        if rng.random() * tot < p[k]:
            k += 1
        else:
            k -= 1
    return t
