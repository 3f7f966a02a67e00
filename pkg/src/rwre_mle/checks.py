"""Distributional cross-checks between the walk, the branching chain and its kernel.

Each check returns a :class:`CheckResult`; ``run_battery`` runs them all.  The
default sizes are the ones used by the acceptance suite; ``quick=True`` shrinks
them for interactive use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import bpire
from .env_models import EnvModel, temkin_benchmark, two_point_benchmark
from .walk_sim import Walker, gen_environment


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def pooled_chisquare(observed: np.ndarray, expected_p: np.ndarray, min_expected: float = 5.0):
    """Chi-square goodness of fit after pooling the upper tail into one bin.

    ``expected_p`` covers values 0..K; mass beyond K goes to the pooled bin.
    Returns (statistic, p-value, number of bins).
    """
    total = observed.sum()
    k = len(expected_p)
    obs = np.zeros(k + 1)
    m = min(len(observed), k)
    obs[:m] = observed[:m]
    obs[k] = observed[k:].sum() if len(observed) > k else 0.0
    exp = np.append(expected_p, max(1.0 - expected_p.sum(), 0.0)) * total
    # merge bins from the right until each has enough expected mass
    bins_o, bins_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs[::-1], exp[::-1]):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            bins_o.append(acc_o)
            bins_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        bins_o[-1] += acc_o
        bins_e[-1] += acc_e
    bins_o, bins_e = np.array(bins_o), np.array(bins_e)
    bins_e *= bins_o.sum() / bins_e.sum()
    stat, p = stats.chisquare(bins_o, bins_e)
    return float(stat), float(p), len(bins_o)


def check_kernel_rows(model: EnvModel, u_max: int = 30, tol: float = 1e-8) -> CheckResult:
    worst = 0.0
    for u in range(u_max + 1):
        probs, tail = bpire.kernel_row(model, u, tol=1e-12)
        worst = max(worst, abs(probs.sum() + tail - 1.0))
    return CheckResult(
        f"kernel rows sum to 1 ({model.family}, u<={u_max})", worst < tol, f"max |sum - 1| = {worst:.2e}"
    )


def check_sampler_vs_kernel(model: EnvModel, u: int, draws: int, rng, alpha: float = 0.01) -> CheckResult:
    sample = np.array([bpire.step_z(model, u, rng) for _ in range(draws)])
    probs, _ = bpire.kernel_row(model, u, tol=1e-12)
    stat, p, bins = pooled_chisquare(np.bincount(sample), probs)
    return CheckResult(
        f"step_z vs Q({u}, .) ({model.family})", p > alpha, f"chi2={stat:.1f}, bins={bins}, p={p:.3f}"
    )


def check_invariance(model: EnvModel, n_env: int, rng, v_max: int = 20, u_max: int = 400) -> CheckResult:
    """Each S-draw gives a weight vector w(u) = S (1-S)^u; averaging w Q - w must
    vanish, so compare the mean against its Monte Carlo standard error."""
    s = bpire.sample_S_many(model, rng, n_env)
    u = np.arange(u_max + 1)
    v = np.arange(v_max + 1)
    Q = np.exp(bpire.log_q(model, u[:, None], v[None, :]))
    diffs = np.zeros((n_env, v_max + 1))
    for lo in range(0, n_env, 20000):
        ss = s[lo:lo + 20000]
        w = np.exp(np.log(ss)[:, None] + u[None, :] * np.log1p(-ss)[:, None])
        diffs[lo:lo + 20000] = w @ Q - w[:, : v_max + 1]
    mean = diffs.mean(axis=0)
    se = diffs.std(axis=0, ddof=1) / math.sqrt(n_env)
    ratio = np.max(np.abs(mean) / se)
    return CheckResult(
        f"pi Q = pi ({model.family}, v<={v_max})", ratio < 3.0, f"max |piQ - pi| / se = {ratio:.2f}"
    )


def annealed_left_counts(model: EnvModel, n: int, site: int, samples: int, rng, t_max: int = 10**8):
    """L_site at T_n for ``samples`` independent (environment, walk) pairs.

    Walks reaching ``t_max`` are dropped; their number is returned alongside.
    """
    out = np.empty(samples, dtype=np.int64)
    dropped = 0
    seeds = rng.integers(0, 2**63 - 1, size=(samples, 2))
    for i, (es, ws) in enumerate(seeds):
        o = Walker(gen_environment(model, int(es)), np.random.default_rng(int(ws)), t_max).advance_to(n)
        if not o.hit:
            dropped += 1
            out[i] = -1
            continue
        out[i] = o.left_counts[site]
    return out[out >= 0], dropped


def check_walk_vs_chain(model: EnvModel, n: int, samples: int, rng, alpha: float = 0.01) -> CheckResult:
    """L_{n-1} at T_n has the law of Z_1, i.e. the row Q(0, .)."""
    counts, dropped = annealed_left_counts(model, n, n - 1, samples, rng)
    probs, _ = bpire.kernel_row(model, 0, tol=1e-12)
    stat, p, bins = pooled_chisquare(np.bincount(counts), probs)
    return CheckResult(
        f"L_(n-1) at T_n vs Z_1 ({model.family}, n={n}, {len(counts)} walks)",
        p > alpha,
        f"chi2={stat:.1f}, bins={bins}, p={p:.3f}, capped walks dropped={dropped}",
    )


def check_moment_dichotomy(model: EnvModel, n_env: int, rng, kappa: float) -> list[CheckResult]:
    s = bpire.sample_S_many(model, rng, n_env)
    res = []
    for alpha, converge in ((kappa / 2.0, True), (1.0, False)):
        m3 = bpire.truncated_moment(model, alpha, 10**3, 0, rng, s_values=s)
        m4 = bpire.truncated_moment(model, alpha, 10**4, 0, rng, s_values=s)
        ratio = m4 / m3
        if converge:
            ok = abs(ratio - 1.0) <= 0.1
            what = f"alpha={alpha:.2f} < kappa: ratio within 1 +- 0.1"
        else:
            ok = ratio > 1.3
            what = f"alpha={alpha:.2f} >= kappa: ratio > 1.3"
        res.append(CheckResult(f"truncated moment ({model.family}) {what}", ok, f"M(1e4)/M(1e3) = {ratio:.3f}"))
    return res


def run_battery(seed: int = 0, quick: bool = False) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    tp, tk = two_point_benchmark(), temkin_benchmark()
    draws = 10**4 if quick else 10**5
    results = [check_kernel_rows(tp), check_kernel_rows(tk)]
    for u in (0, 1, 5, 20):
        results.append(check_sampler_vs_kernel(tp, u, draws, rng))
    results.append(check_invariance(tp, draws, rng))
    results.append(check_walk_vs_chain(tp, 50, draws, rng))
    results.extend(check_moment_dichotomy(tk, 4 * draws, rng, kappa=0.9))
    return results
