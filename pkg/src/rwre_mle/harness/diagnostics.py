"""Post-hoc checks on a batch of replicates: normality, coverage, Fisher growth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .config import ExperimentSpec
from .experiment import ReplicateRecord

MIN_REPLICATES = 100


class InsufficientData(ValueError):
    """Too few non-censored replicates for the requested diagnostic."""


@dataclass
class DiagnosticsReport:
    n: int
    n_used: int
    ks_statistic: float
    ks_pvalue: float
    coverage: float
    coverage_level: float
    median_fisher: dict[int, float] = field(default_factory=dict)
    fisher_increasing: bool | None = None

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "n_used": self.n_used,
            "ks_statistic": self.ks_statistic,
            "ks_pvalue": self.ks_pvalue,
            "coverage": self.coverage,
            "coverage_level": self.coverage_level,
            "median_fisher": {str(k): v for k, v in self.median_fisher.items()},
            "fisher_increasing": self.fisher_increasing,
        }


def standardized_errors(records: list[ReplicateRecord], theta_star) -> np.ndarray:
    """sqrt(n) (theta_hat - theta_star) / sqrt((Sigma_hat^-1)_ii), per coordinate.

    In one dimension this is sqrt(n) (theta_hat - theta_star) Sigma_hat^(1/2).
    """
    theta_star = np.atleast_1d(theta_star)
    rows = []
    for rec in records:
        if rec.censored or rec.theta_mle is None or rec.sigma_hat is None:
            continue
        try:
            var = np.diag(np.linalg.inv(rec.sigma_hat))
        except np.linalg.LinAlgError:
            continue
        if np.any(var <= 0) or not np.all(np.isfinite(var)):
            continue
        rows.append(np.sqrt(rec.n) * (np.atleast_1d(rec.theta_mle) - theta_star) / np.sqrt(var))
    return np.array(rows).reshape(-1, theta_star.size)


def ks_normal(z) -> tuple[float, float]:
    res = stats.kstest(np.ravel(z), "norm")
    return float(res.statistic), float(res.pvalue)


def coverage(records: list[ReplicateRecord], theta_star) -> float:
    theta_star = np.atleast_1d(theta_star)
    hits = [
        all(lo <= t <= hi for (lo, hi), t in zip(rec.ci, theta_star))
        for rec in records
        if not rec.censored and rec.ci is not None
    ]
    if not hits:
        return float("nan")
    return float(np.mean(hits))


def median_fisher_by_n(records: list[ReplicateRecord]) -> dict[int, float]:
    by_n: dict[int, list[float]] = {}
    for rec in records:
        if rec.censored or rec.sigma_hat is None:
            continue
        by_n.setdefault(rec.n, []).append(float(np.trace(np.atleast_2d(rec.sigma_hat))))
    return {n: float(np.median(v)) for n, v in sorted(by_n.items())}


def strictly_increasing(values) -> bool:
    values = list(values)
    return all(b > a for a, b in zip(values, values[1:]))


def diagnostics(records: list[ReplicateRecord], spec: ExperimentSpec, fisher_ns=(100, 400, 1000)) -> DiagnosticsReport:
    n = spec.n_list[-1]
    at_n = [r for r in records if r.n == n and not r.censored and r.theta_mle is not None]
    if len(at_n) < MIN_REPLICATES:
        raise InsufficientData(f"{len(at_n)} non-censored replicates at n={n}; need {MIN_REPLICATES}")
    z = standardized_errors(at_n, spec.theta_star)
    ks_stat, ks_p = ks_normal(z)
    report = DiagnosticsReport(
        n=n, n_used=len(z), ks_statistic=ks_stat, ks_pvalue=ks_p,
        coverage=coverage(at_n, spec.theta_star), coverage_level=spec.level,
    )
    if spec.model.family == "temkin":
        med = median_fisher_by_n(records)
        report.median_fisher = med
        picked = [med[k] for k in fisher_ns if k in med]
        report.fisher_increasing = strictly_increasing(picked) if len(picked) >= 2 else None
    return report
