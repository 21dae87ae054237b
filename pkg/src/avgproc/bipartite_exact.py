"""Exact L2 distance for the averaging process on complete bipartite graphs.

The coupled pair of walks on K_{m,n-m} started from two copies of the same
vertex lumps to a 5-state chain over the classes

    0_1: meeting on side C1      0_2: meeting on side C2
    1:   particles on opposite sides
    2_1: distinct vertices, both C1
    2_2: distinct vertices, both C2

and the expected squared L2 distance of the averaging process from a
Dirac start is a 4-term spectral sum of this chain.  The module also
carries the cutoff constants theta, B, C, D, the characteristic cubic
whose smallest root is the leading rate rho_1, and the limiting
block-diagonal form of the symmetrized chain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .rw_duality import expm_action

STATE_NAMES = ("0_1", "0_2", "1", "2_1", "2_2")
START_SIDES = ("C1", "C2")

RESIDUAL_TOL = 1e-9


def _check_parts(m: int, n: int) -> None:
    if not (isinstance(m, int) and isinstance(n, int)) or isinstance(m, bool):
        raise ValueError("part sizes must be integers")
    if n < 2 or m < 1 or 2 * m > n:
        raise ValueError(f"need 1 <= m <= n/2, got m={m}, n={n}")


@dataclass(frozen=True)
class LumpedBipartiteChain:
    m: int
    n: int
    Q: np.ndarray
    mu: np.ndarray
    active: np.ndarray


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigenvalues rho_j of -Q (ascending, rho_0 = 0) and eigenfunctions
    phi_j over active states, orthonormal in L2(mu)."""

    rho: np.ndarray
    phi: np.ndarray
    active: np.ndarray


def build(m: int, n: int) -> LumpedBipartiteChain:
    """Rate matrix and reversible measure of the lumped pair chain."""
    _check_parts(m, n)
    k = n - m
    Q = np.array(
        [
            [-3.0 * k / 4, k / 4.0, k / 2.0, 0.0, 0.0],
            [m / 4.0, -3.0 * m / 4, m / 2.0, 0.0, 0.0],
            [0.25, 0.25, -(n - 1) / 2.0, (m - 1) / 2.0, (k - 1) / 2.0],
            [0.0, 0.0, float(k), -float(k), 0.0],
            [0.0, 0.0, float(m), 0.0, -float(m)],
        ]
    )
    mu = np.array(
        [m, k, 2.0 * m * k, m * (m - 1.0), k * (k - 1.0)]
    ) / float(n) ** 2
    return LumpedBipartiteChain(m=m, n=n, Q=Q, mu=mu, active=mu > 0)


def spectral_decomposition(chain: LumpedBipartiteChain) -> SpectralDecomp:
    """Eigenpairs of -Q on active states via the mu-symmetrization.

    States with mu = 0 are deleted first (L2(mu) does not see them);
    the symmetrized matrix diag(sqrt mu) (-Q) diag(sqrt mu)^-1 is
    symmetric by detailed balance.
    """
    act = chain.active
    Q = chain.Q[np.ix_(act, act)]
    mu = chain.mu[act]
    s = np.sqrt(mu)
    A = (-Q) * (s[:, None] / s[None, :])
    A = (A + A.T) / 2.0
    vals, vecs = np.linalg.eigh(A)
    assert abs(vals[0]) < RESIDUAL_TOL, "zero mode missing"
    vals = vals.copy()
    vals[0] = 0.0
    phi = vecs / s[:, None]
    # fix phi_0 to the constant function +1
    if phi[0, 0] < 0:
        phi[:, 0] = -phi[:, 0]
    return SpectralDecomp(rho=vals, phi=phi, active=act)


def explicit_eigenpair_check(chain: LumpedBipartiteChain) -> float:
    """Residual of the explicit eigenpair (n/2, phi_2) over active states.

    phi_2 solves (Q + (n/2) I) phi = 0 exactly; the sqrt(2m/k) factor
    normalizes it in L2(mu).
    """
    m, n = chain.m, chain.n
    k = n - m
    phi2 = np.array(
        [-k / m, 1.0, (2.0 * m - n) / (2.0 * m), -k / m, 1.0]
    ) * math.sqrt(2.0 * m / k)
    resid = -chain.Q @ phi2 - (n / 2.0) * phi2
    return float(np.max(np.abs(resid[chain.active])))


def _start_index(start_side: str) -> int:
    if start_side not in START_SIDES:
        raise ValueError(f"start_side must be one of {START_SIDES}")
    return 0 if start_side == "C1" else 1


def exact_l2(m: int, n: int, start_side: str, t: float) -> float:
    """Expected squared L2 distance from flat at time t, Dirac start.

    Spectral sum over the four nonzero modes; equals n - 1 at t = 0.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    chain = build(m, n)
    dec = spectral_decomposition(chain)
    idx = _start_index(start_side)
    act_pos = {s: i for i, s in enumerate(np.flatnonzero(chain.active))}
    i0 = act_pos[0]
    i1 = act_pos[1]
    start = act_pos[idx]
    weights = (m / n) * dec.phi[i0] + ((n - m) / n) * dec.phi[i1]
    terms = np.exp(-dec.rho[1:] * float(t)) * dec.phi[start, 1:] * weights[1:]
    return float(math.fsum(terms.tolist()))


def exact_l2_uniformized(m: int, n: int, start_side: str, t: float) -> float:
    """Independent route to exact_l2: uniformize Q and read the two
    meeting-state masses; used as an internal oracle."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    chain = build(m, n)
    idx = _start_index(start_side)
    delta = np.zeros(5)
    delta[idx] = 1.0
    row = expm_action(chain.Q.T, delta, float(t))
    return n * (row[0] + row[1]) - 1.0


def psi_values(m: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagnostic pairs (rho_j, Psi_j), j = 1..4, for a C2 start."""
    chain = build(m, n)
    dec = spectral_decomposition(chain)
    act_pos = {s: i for i, s in enumerate(np.flatnonzero(chain.active))}
    i0, i1 = act_pos[0], act_pos[1]
    weights = (m / n) * dec.phi[i0] + ((n - m) / n) * dec.phi[i1]
    psi = dec.phi[i1] * weights
    return dec.rho[1:], psi[1:]


# ---------------------------------------------------------------------------
# cutoff constants


def _check_b(b: float, lo_open: bool = False) -> float:
    b = float(b)
    if not (0.0 <= b <= 0.5) or (lo_open and b == 0.0):
        lo = "(0" if lo_open else "[0"
        raise ValueError(f"b must lie in {lo}, 1/2], got {b}")
    return b


def big_b(b: float) -> float:
    """B(b) = sqrt(9 - 32 b + 32 b^2), decreasing from 3 to 1 on [0, 1/2]."""
    b = _check_b(b)
    return math.sqrt(9.0 - 32.0 * b + 32.0 * b * b)


def theta(m: int, n: int) -> float:
    """Leading-rate constant: rho_1 ~ theta * m.  Lies in [1/2, 2/3]."""
    _check_parts(m, n)
    b = m / n
    x = (32.0 / 9.0) * b * (1.0 - b)
    if x < 1e-4:
        # printed form 1 - sqrt(1 - x) cancels badly for small x
        val = (3.0 / (8.0 * b)) * x / (1.0 + math.sqrt(1.0 - x))
    else:
        val = (3.0 / (8.0 * b)) * (1.0 - math.sqrt(1.0 - x))
    assert 0.5 - 1e-12 <= val <= 2.0 / 3.0 + 1e-12
    return val


def big_c(b: float) -> float:
    """C(b) = (3 + B)/(8 (1 - b)) with the continuous limit C(0) = 3/4."""
    b = _check_b(b)
    return (3.0 + big_b(b)) / (8.0 * (1.0 - b))


def big_d(b: float) -> float:
    """Profile constant D(b) = (3 - 4b - B)/(2B); vanishes at b = 0, 1/2."""
    b = _check_b(b)
    B = big_b(b)
    return (3.0 - 4.0 * b - B) / (2.0 * B)


def cutoff_time_l2(m: int, n: int, a: float) -> float:
    """L2 cutoff time (log n + a)/(theta m); natural log."""
    _check_parts(m, n)
    T = (math.log(n) + a) / (theta(m, n) * m)
    if T <= 0:
        raise ValueError(f"cutoff time must be positive, got {T}")
    return T


def cutoff_time_l1(m: int, n: int, a: float) -> float:
    """L1 cutoff time n/(2(n-m)) * log2(n)/m + a sqrt(log n)/m."""
    _check_parts(m, n)
    T = (n / (2.0 * (n - m))) * math.log2(n) / m + a * math.sqrt(math.log(n)) / m
    if T <= 0:
        raise ValueError(f"cutoff time must be positive, got {T}")
    return T


def char_poly_q(m: int, n: int, lam: float) -> float:
    """Characteristic cubic of -Q with the 0 and n/2 modes factored out."""
    _check_parts(m, n)
    lam = float(lam)
    return (
        -(lam**3)
        + (7.0 * n - 2.0) / 4.0 * lam**2
        + (2.0 * m * m + (1.0 - 2.0 * m) * n - 3.0 * n * n) / 4.0 * lam
        + m * n * (n - m) / 2.0
    )


def rho1(m: int, n: int) -> float:
    """Smallest nonzero eigenvalue of -Q, via bisection on the cubic.

    The root lies within O(m/n) of theta*m, so the initial bracket is
    theta*m*(1 -+ 10/sqrt(n)); it is doubled at most 6 times (capped
    below the next eigenvalue at 2n/5) before giving up.
    """
    _check_parts(m, n)
    center = theta(m, n) * m
    half = 10.0 / math.sqrt(n)
    cap = 0.4 * n * (1.0 - 1e-9)
    lo = center * (1.0 - half)
    hi = center * (1.0 + half)
    for _ in range(7):
        lo = max(lo, 1e-300)
        hi = min(hi, cap)
        if char_poly_q(m, n, lo) > 0.0 > char_poly_q(m, n, hi):
            break
        lo = center - 2.0 * (center - lo)
        hi = center + 2.0 * (hi - center)
    else:
        raise NumericalError(
            f"no sign change bracketing rho_1 for m={m}, n={n}"
        )
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if char_poly_q(m, n, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    assert root < 0.4 * n, "rho_1 escaped its separation bound"
    return root


def profile(m: int, n: int, a: float) -> tuple[float, float, float]:
    """Exact L2 distance at the cutoff time T(a) against the limit profile.

    Returns (measured, predicted, ratio) with predicted = (1 + D(b)) e^-a
    and the worst-case start on the larger side.
    """
    t = cutoff_time_l2(m, n, a)
    measured = exact_l2(m, n, "C2", t)
    predicted = (1.0 + big_d(m / n)) * math.exp(-a)
    return measured, predicted, measured / predicted


def symmetrized_blocks(b: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Limiting blocks S0 (2x2), S1 (3x3) of the scaled symmetrized chain.

    Returns (S0, S1, spec(S0), spec(S1)) and asserts the computed spectra
    match the closed forms {(3-B)/8, (3+B)/8} and {-1, 1/2, 1}.
    """
    b = _check_b(b, lo_open=True)
    r = math.sqrt(b * (1.0 - b))
    s0 = np.array(
        [
            [0.75 * (1.0 - b), -0.25 * r],
            [-0.25 * r, 0.75 * b],
        ]
    )
    s1 = np.array(
        [
            [
                (1.0 - 2.0 * b) ** 2 / 2.0,
                -r * (1.0 + 2.0 * b) / math.sqrt(2.0),
                -r * (3.0 - 2.0 * b) / math.sqrt(2.0),
            ],
            [-r * (1.0 + 2.0 * b) / math.sqrt(2.0), 1.0 - b * (1.0 + b), -b * (1.0 - b)],
            [-r * (3.0 - 2.0 * b) / math.sqrt(2.0), -b * (1.0 - b), b * (3.0 - b) - 1.0],
        ]
    )
    spec0 = np.linalg.eigvalsh(s0)
    spec1 = np.linalg.eigvalsh(s1)
    B = big_b(b)
    assert np.max(np.abs(spec0 - np.array([(3.0 - B) / 8.0, (3.0 + B) / 8.0]))) < 1e-10
    assert np.max(np.abs(spec1 - np.array([-1.0, 0.5, 1.0]))) < 1e-10
    return s0, s1, spec0, spec1


def big_a(b: float) -> float:
    """Entry ratio A(b) of the limiting second eigenvector (A, 1, 0, 0, 0)/Z."""
    b = _check_b(b, lo_open=True)
    return (6.0 * b - 3.0 + big_b(b)) / (2.0 * math.sqrt(b * (1.0 - b)))


def w_eigenvalues(m: int, n: int) -> np.ndarray:
    """Eigenvalues (ascending) of W = (1/n) U(-Q)U^-1 - (U phi_0)(U phi_0)^T.

    W's spectrum is {-1} joined with rho_j/n; for large n it approaches
    spec(S0) united with spec(S1).
    """
    chain = build(m, n)
    act = chain.active
    Q = chain.Q[np.ix_(act, act)]
    mu = chain.mu[act]
    s = np.sqrt(mu)
    A = (-Q) * (s[:, None] / s[None, :])
    A = (A + A.T) / 2.0
    W = A / chain.n - np.outer(s, s)
    return np.linalg.eigvalsh(W)
