"""Branching process with immigration in a random environment.

The reversed left-step counts of the walk, (L_n, L_{n-1}, ..., L_0), have the same
annealed law as the chain Z_0 = 0, Z_{k+1} = sum of Z_k + 1 geometric variables
with success probability omega_{k+1}.  This module simulates that chain, evaluates
its transition kernel Q(u, v) = C(u+v, v) exp(phi(u, v)), and approximates its
invariant law pi(u) = E[S (1 - S)^u] by Monte Carlo over the series
S^-1 = 1 + rho_1 + rho_1 rho_2 + ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import stats
from scipy.special import gammaln

from .env_models import EnvModel, NotTransientRight, _TwoAtom

S_MAX_DEPTH = 10**6
S_STRAGGLERS = 50
S_BLOCK = 256


class TruncationFailure(RuntimeError):
    """The S-series did not settle within the depth limit."""


@dataclass(frozen=True)
class QKernelEval:
    u: int
    v: int
    log_q: float


@dataclass(frozen=True)
class SSample:
    s_value: float
    truncation_depth: int
    tail_bound: float


def log_q(model: EnvModel, u, v):
    """log Q(u, v); vectorised over u and v."""
    u = np.asarray(u)
    v = np.asarray(v)
    log_binom = gammaln(u + v + 1.0) - gammaln(u + 1.0) - gammaln(v + 1.0)
    return log_binom + model.log_phi(u, v)


def kernel_row(model: EnvModel, u: int, tol: float = 1e-12, v_cap: int = 10**6):
    """Row Q(u, .) truncated where the remaining mass is certified below ``tol``.

    For atomic families the row is a mixture of negative binomials NB(u+1, x_i), so
    its tail is the weighted sum of the atom tails.  Beta rows are beta-negative-
    binomial, whose polynomial tail usually cannot reach ``tol`` below ``v_cap``;
    the returned bound is then the honest (large) remainder.

    Returns ``(probs, tail)`` with ``probs[v] = Q(u, v)`` for v = 0..V.
    """
    if isinstance(model, _TwoAtom):
        w1, x1, w2, x2 = model.atoms()
        atoms = [(w, x) for w, x in ((w1, x1), (w2, x2)) if w > 0]
        v_max = 0
        for _, x in atoms:
            v_max = max(v_max, int(stats.nbinom.isf(tol / 4, u + 1, x)) + 1)
        v_max = min(v_max, v_cap)
        tail = sum(w * stats.nbinom.sf(v_max, u + 1, x) for w, x in atoms)
    else:
        dist = stats.betanbinom(u + 1, model.alpha, model.beta)
        v_max = int(min(dist.isf(tol), v_cap)) if np.isfinite(dist.isf(tol)) else v_cap
        tail = float(dist.sf(v_max))
    v = np.arange(v_max + 1)
    return np.exp(log_q(model, u, v)), float(tail)


def step_z(model: EnvModel, z: int, rng: np.random.Generator, omega: float | None = None) -> int:
    """One generation: draw omega, then add z + 1 geometric(omega) offspring counts.

    ``omega`` overrides the environment draw (test hook).
    """
    if z < 0:
        raise ValueError("population must be non-negative")
    w = float(model.sample(rng)) if omega is None else float(omega)
    # numpy's geometric counts trials, so subtract one per variable
    return int(rng.geometric(w, size=z + 1).sum()) - (z + 1)


@numba.njit(nogil=True, cache=True)
def _chain(log1m_omega, seed):
    np.random.seed(seed)
    length = log1m_omega.shape[0]
    z = np.zeros(length + 1, dtype=np.int64)
    for k in range(length):
        lq = log1m_omega[k]
        total = 0
        for _ in range(z[k] + 1):
            # inversion sampling of P(xi = m) = (1 - w)^m w
            if lq == -np.inf:
                continue
            total += int(math.floor(math.log(1.0 - np.random.random()) / lq))
        z[k + 1] = total
    return z


def simulate_chain(model: EnvModel, length: int, rng: np.random.Generator) -> np.ndarray:
    """Z_0, ..., Z_length started from Z_0 = 0."""
    if length < 1:
        raise ValueError("length must be positive")
    omega = np.asarray(model.sample(rng, length), dtype=np.float64)
    seed = int(rng.integers(2**31 - 1))
    with np.errstate(divide="ignore"):
        return _chain(np.log1p(-omega), seed)


@numba.njit(nogil=True, cache=True)
def _s_scan(log_rho, log_prod, total, run, run_mass, depth, done, thresh):
    """Extend the S^-1 partial sums of every unfinished row by one block.

    A row finishes once ``S_STRAGGLERS`` consecutive terms each fall below
    ``thresh * total``; ``run_mass`` keeps the summed mass of that trailing run.
    """
    rows, cols = log_rho.shape
    for r in range(rows):
        if done[r]:
            continue
        lp = log_prod[r]
        tot = total[r]
        rn = run[r]
        rm = run_mass[r]
        for c in range(cols):
            lp += log_rho[r, c]
            term = math.exp(lp)
            tot += term
            depth[r] += 1
            if term < thresh * tot:
                rn += 1
                rm += term
            else:
                rn = 0
                rm = 0.0
            if rn >= S_STRAGGLERS:
                done[r] = True
                break
        log_prod[r] = lp
        total[r] = tot
        run[r] = rn
        run_mass[r] = rm


def _s_batch(model: EnvModel, rng: np.random.Generator, size: int, tol: float, rho: float | None = None):
    if rho is None and model.e_log_rho() >= 0:
        raise NotTransientRight("S-series diverges unless E log rho < 0")
    if rho is not None and not 0 <= rho < 1:
        raise NotTransientRight("constant ratio must lie in [0, 1)")
    thresh = tol / S_STRAGGLERS
    log_prod = np.zeros(size)
    total = np.ones(size)
    run = np.zeros(size, dtype=np.int64)
    run_mass = np.zeros(size)
    depth = np.zeros(size, dtype=np.int64)
    done = np.zeros(size, dtype=np.bool_)
    while not done.all():
        active = np.flatnonzero(~done)
        if depth[active].max() > S_MAX_DEPTH:
            raise TruncationFailure(f"S-series exceeded depth {S_MAX_DEPTH}")
        if rho is None:
            block = model.sample_log_rho(rng, (active.size, S_BLOCK))
        else:
            with np.errstate(divide="ignore"):
                block = np.full((active.size, S_BLOCK), np.log(rho))
        cols = [a[active] for a in (log_prod, total, run, run_mass, depth, done)]
        _s_scan(np.ascontiguousarray(block), *cols, thresh)
        for a, c in zip((log_prod, total, run, run_mass, depth, done), cols):
            a[active] = c
    # each trailing term was below thresh * total, so run_mass / total < tol
    return 1.0 / total, depth, run_mass / total


def sample_S(model: EnvModel, rng: np.random.Generator, tol: float = 1e-12, rho: float | None = None) -> SSample:
    """One draw of S = (1 + rho_1 + rho_1 rho_2 + ...)^-1.

    ``rho`` replaces the random ratios by a constant (test hook).
    """
    s, depth, tail = _s_batch(model, rng, 1, tol, rho)
    return SSample(float(s[0]), int(depth[0]), float(tail[0]))


def sample_S_many(model: EnvModel, rng: np.random.Generator, size: int, tol: float = 1e-12) -> np.ndarray:
    """Vectorised draws of S; same stopping rule as :func:`sample_S`."""
    s, _, _ = _s_batch(model, rng, size, tol)
    return s


def invariant_pmf_mc(
    model: EnvModel,
    u_max: int,
    n_env: int,
    tol: float,
    rng: np.random.Generator,
    return_se: bool = False,
    s_values: np.ndarray | None = None,
):
    """Monte Carlo estimate of pi(u) = E[S (1 - S)^u] for u = 0..u_max."""
    s = sample_S_many(model, rng, n_env, tol) if s_values is None else np.asarray(s_values)
    u = np.arange(u_max + 1)
    vals = np.exp(np.log(s)[:, None] + u[None, :] * np.log1p(-s)[:, None])
    pmf = vals.mean(axis=0)
    if return_se:
        return pmf, vals.std(axis=0, ddof=1) / math.sqrt(len(s))
    return pmf


@numba.njit(nogil=True, cache=True)
def _weighted_geometric_sums(s, weights):
    # sum_k weights[k] * S (1 - S)^k for each S
    out = np.empty(s.shape[0])
    for i in range(s.shape[0]):
        q = 1.0 - s[i]
        acc = 0.0
        qk = 1.0
        for k in range(weights.shape[0]):
            acc += weights[k] * qk
            qk *= q
            if qk < 1e-300:
                break
        out[i] = s[i] * acc
    return out


def truncated_moment(
    model: EnvModel,
    alpha: float,
    K: int,
    n_env: int,
    rng: np.random.Generator,
    tol: float = 1e-12,
    s_values: np.ndarray | None = None,
) -> float:
    """sum_{k <= K} k^alpha pi(k), with pi estimated from ``n_env`` S-draws."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    s = sample_S_many(model, rng, n_env, tol) if s_values is None else np.asarray(s_values, dtype=float)
    k = np.arange(K + 1, dtype=float)
    weights = k**alpha
    return float(_weighted_geometric_sums(s, weights).mean())
