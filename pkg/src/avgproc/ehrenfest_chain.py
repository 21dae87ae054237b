"""Ehrenfest-type birth-death chains and the exact hypercube L2 distance.

The coupled pair of walks on the hypercube, viewed through the Hamming
distance of the two particles, lumps to birth-death chains on {0..d}:
the plain Ehrenfest urn (P-chain, rates p_k = d-k, q_k = k) and a
perturbation of it (S-chain) whose rates at states 0 and 1 are halved by
the coupling.  The expected squared L2 distance of the averaging process
from a Dirac start is 2^d S_t(0,0) - 1.  The module also exposes killed
spectra, hitting-time laws in Brown-Shao form, and the discrete Hardy
constants that pin the smallest killed eigenvalue within a factor 4.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln, logsumexp

from . import _kernels

MAX_D = 2000
# eigen-residual allowance, scaled by d in checks
RESIDUAL_UNIT = 1e-8

P_KIND = "P"
S_KIND = "S"


@dataclass(frozen=True)
class BirthDeathChain:
    """Birth-death generator on {0..d} with binomial stationary law."""

    kind: str
    birth: np.ndarray
    death: np.ndarray
    log_stationary: np.ndarray

    @property
    def d(self) -> int:
        return self.birth.shape[0] - 1

    @property
    def size(self) -> int:
        return self.birth.shape[0]

    @property
    def stationary(self) -> np.ndarray:
        return np.exp(self.log_stationary)


def _log_binomial_law(d: int) -> np.ndarray:
    k = np.arange(d + 1)
    return gammaln(d + 1) - gammaln(k + 1) - gammaln(d - k + 1) - d * math.log(2.0)


def _check_d(d: int) -> None:
    if not isinstance(d, int) or isinstance(d, bool) or not 1 <= d <= MAX_D:
        raise ValueError(f"d must be an integer in [1, {MAX_D}], got {d!r}")


def build_p(d: int) -> BirthDeathChain:
    """Ehrenfest urn: p_k = d - k, q_k = k."""
    _check_d(d)
    k = np.arange(d + 1, dtype=np.float64)
    return BirthDeathChain(
        kind=P_KIND, birth=d - k, death=k.copy(), log_stationary=_log_binomial_law(d)
    )


def build_s(d: int) -> BirthDeathChain:
    """Perturbed urn: as P except p_0 = d/2 and q_1 = 1/2."""
    _check_d(d)
    k = np.arange(d + 1, dtype=np.float64)
    birth = d - k
    death = k.copy()
    birth[0] = d / 2.0
    death[1] = 0.5
    return BirthDeathChain(
        kind=S_KIND, birth=birth, death=death, log_stationary=_log_binomial_law(d)
    )


def _symmetrized_tridiagonal(chain: BirthDeathChain) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and offdiagonal of the nu-symmetrized -L.

    Detailed balance turns the conjugated offdiagonal into
    -sqrt(p_k q_{k+1}), so no stationary weights are needed.
    """
    diag = chain.birth + chain.death
    off = -np.sqrt(chain.birth[:-1] * chain.death[1:])
    return diag, off


_spectrum_cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}
_killed_cache: dict[tuple, np.ndarray] = {}
_cache_lock = threading.Lock()


def _tridiagonal_residual(
    diag: np.ndarray, off: np.ndarray, vals: np.ndarray, vecs: np.ndarray
) -> float:
    Hv = diag[:, None] * vecs
    Hv[:-1] += off[:, None] * vecs[1:]
    Hv[1:] += off[:, None] * vecs[:-1]
    return float(np.max(np.abs(Hv - vecs * vals[None, :])))


def _spectrum(chain: BirthDeathChain) -> tuple[np.ndarray, np.ndarray]:
    key = (chain.kind, chain.d)
    with _cache_lock:
        hit = _spectrum_cache.get(key)
    if hit is not None:
        return hit
    diag, off = _symmetrized_tridiagonal(chain)
    vals, vecs = eigh_tridiagonal(diag, off)
    assert _tridiagonal_residual(diag, off, vals, vecs) < RESIDUAL_UNIT * max(
        chain.d, 1
    ), "eigen residual too large"
    with _cache_lock:
        _spectrum_cache[key] = (vals, vecs)
    return vals, vecs


def kernel_row(chain: BirthDeathChain, from_state: int, t: float) -> np.ndarray:
    """Row of e^{tL} from a state, via the symmetrized eigendecomposition.

    Undoing the symmetrization amplifies eigenvector roundoff by
    sqrt(nu_max / nu_from), so entries below that noise floor are clipped
    to zero and the row renormalized; the result is always a distribution.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if not 0 <= from_state <= chain.d:
        raise ValueError("state out of range")
    vals, vecs = _spectrum(chain)
    weights = np.exp(-vals * float(t)) * vecs[from_state]
    row = vecs @ weights
    # undo the symmetrization: scale by sqrt(nu_l / nu_a) in log space
    log_nu = chain.log_stationary
    row *= np.exp((log_nu - log_nu[from_state]) / 2.0)
    amp = math.exp((float(np.max(log_nu)) - log_nu[from_state]) / 2.0)
    noise = 100.0 * chain.size * np.finfo(np.float64).eps * amp
    assert np.all(row > -noise), "kernel row negative beyond the noise floor"
    assert abs(math.fsum(row.tolist()) - 1.0) < max(1e-10, noise), "kernel row sum off"
    row = np.maximum(row, 0.0)
    row /= math.fsum(row.tolist())
    return row


def log_s00(d: int, t: float) -> float:
    """log S_t(0,0) for the S-chain, stable at any d up to the cap."""
    vals, vecs = _spectrum(build_s(d))
    v0 = vecs[0]
    with np.errstate(divide="ignore"):
        terms = 2.0 * np.log(np.abs(v0)) - vals * float(t)
    return float(logsumexp(terms))


def hypercube_avg_l2_exact(d: int, t: float) -> tuple[float, float]:
    """Mean squared L2 distance of Avg on the hypercube, Dirac start.

    Returns (value, log1p_value) with value = 2^d S_t(0,0) - 1 and
    log1p_value = log(1 + value) = d log 2 + log S_t(0,0); the log form
    stays finite when the value overflows to inf.
    """
    _check_d(d)
    if t < 0:
        raise ValueError("time must be nonnegative")
    rep = d * math.log(2.0) + log_s00(d, float(t))
    value = math.inf if rep > 700.0 else math.expm1(rep)
    return value, rep


def l2_crossing_time(d: int, value: float = 1.0, tol: float = 1e-10) -> float:
    """Time where the exact hypercube L2 distance crosses `value`."""
    if value <= 0:
        raise ValueError("crossing level must be positive")
    target = math.log1p(value)
    if d * math.log(2.0) <= target:
        raise ValueError("distance starts below the requested level")

    def rep(t: float) -> float:
        return d * math.log(2.0) + log_s00(d, t)

    hi = 0.5 * math.log(max(d, 2)) + 4.0
    for _ in range(60):
        if rep(hi) < target:
            break
        hi *= 2.0
    else:
        raise ValueError("no crossing found in the search window")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rep(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def killed_eigenvalues(chain: BirthDeathChain, M: int) -> np.ndarray:
    """Eigenvalues of -L killed outside {0..M-1}: leading M x M principal
    submatrix of the symmetrization, ascending."""
    if not 1 <= M <= chain.d:
        raise ValueError(f"M must be in [1, d], got {M}")
    key = (chain.kind, chain.d, M)
    with _cache_lock:
        hit = _killed_cache.get(key)
    if hit is not None:
        return hit
    diag, off = _symmetrized_tridiagonal(chain)
    if M == 1:
        vals = diag[:1].copy()
    else:
        vals = eigh_tridiagonal(diag[:M], off[: M - 1], eigvals_only=True)
    assert np.all(vals > 0), "killed spectrum must be positive"
    with _cache_lock:
        _killed_cache[key] = vals
    return vals


def hitting_time_law(chain: BirthDeathChain, M: int) -> np.ndarray:
    """Rates of the M independent exponentials whose sum is the hitting
    time of M from 0 (Brown-Shao representation)."""
    return killed_eigenvalues(chain, M)


def sample_hitting(chain: BirthDeathChain, M: int, rng: np.random.Generator) -> float:
    """Draw one Brown-Shao hitting time: sum of Exp(lambda_i) draws."""
    rates = hitting_time_law(chain, M)
    return float(np.sum(rng.exponential(1.0 / rates)))


def sample_hitting_direct(
    chain: BirthDeathChain, M: int, rng: np.random.Generator
) -> float:
    """Draw one hitting time of M from 0 by simulating the chain itself."""
    if not 1 <= M <= chain.d:
        raise ValueError(f"M must be in [1, d], got {M}")
    return float(_kernels.bd_hitting_time(chain.birth, chain.death, M, rng))


# ---------------------------------------------------------------------------
# discrete Hardy machinery


def hardy_constant(d: int, M: int) -> float:
    """Weighted Hardy maximum C_M; 1/(4 C_M) <= lambda^P_{M,0} <= 1/C_M.

    All sums run in log space: 1/nu(j) alone overflows binary64 once
    d is in the thousands.
    """
    _check_d(d)
    if not 1 <= M <= d // 2:
        raise ValueError(f"M must be in [1, d/2], got {M}")
    log_nu = _log_binomial_law(d)
    log_prefix = np.logaddexp.accumulate(log_nu)  # log nu([0, k]), inclusive
    j = np.arange(M)
    log_terms = -log_nu[:M] - np.log(d - j)
    log_suffix = np.logaddexp.accumulate(log_terms[::-1])[::-1]
    log_c = log_prefix[:M] + log_suffix
    return float(np.exp(np.max(log_c)))


def gamma_k(d: int, k: int) -> float:
    """Entropy-weighted Hardy summand Gamma(k) used in the tail criterion:
    (1/d) nu([0,k]) log(1/nu([0,k])) sum_{j=k}^{d/2-1} 1/nu(j)."""
    _check_d(d)
    half = d // 2
    if not 0 <= k < half:
        raise ValueError(f"k must be in [0, d/2), got {k}")
    log_nu = _log_binomial_law(d)
    log_prefix = float(logsumexp(log_nu[: k + 1]))
    log_tail_sum = float(logsumexp(-log_nu[k:half]))
    # log(1/nu([0,k])) = -log_prefix > 0 since the prefix mass is < 1
    log_gamma = -math.log(d) + log_prefix + math.log(-log_prefix) + log_tail_sum
    return math.exp(log_gamma)
