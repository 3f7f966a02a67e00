"""Per-(n, estimator) quartile summaries.

Quantiles use linear interpolation between order statistics (numpy's default,
"type 7").  A value is an outlier when it lies more than 1.5 IQR beyond the
quartiles; whiskers reach the most extreme non-outlying values.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby

import numpy as np

from .experiment import ReplicateRecord


class EmptyCell(ValueError):
    """Every replicate of a cell was censored."""


@dataclass(frozen=True)
class SummaryRow:
    example: str
    n: int
    estimator: str
    count: int
    censored: int
    censored_frac: float
    q1: float
    median: float
    q3: float
    iqr: float
    outliers: int
    whisker_lo: float
    whisker_hi: float


def quartile_stats(values) -> dict:
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise EmptyCell("no values to summarise")
    q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = vals[(vals >= lo_fence) & (vals <= hi_fence)]
    return dict(
        q1=float(q1), median=float(med), q3=float(q3), iqr=float(iqr),
        outliers=int(vals.size - inside.size),
        whisker_lo=float(inside.min()), whisker_hi=float(inside.max()),
    )


def estimator_values(records: list[ReplicateRecord]) -> dict[str, list[float]]:
    """Estimates per estimator label over the non-censored records given."""
    out: dict[str, list[float]] = {}
    for rec in records:
        if rec.censored or rec.theta_mle is None:
            continue
        theta = np.atleast_1d(rec.theta_mle)
        if theta.size == 1:
            out.setdefault("mle", []).append(float(theta[0]))
        else:
            for i, t in enumerate(theta):
                out.setdefault(f"mle[{i}]", []).append(float(t))
        if rec.theta_mom is not None:
            out.setdefault("mom", []).append(float(rec.theta_mom))
    return out


def summarize(records: list[ReplicateRecord]) -> list[SummaryRow]:
    rows = []
    key = lambda r: (r.example, r.n)  # noqa: E731
    for (example, n), group in groupby(sorted(records, key=key), key=key):
        group = list(group)
        censored = sum(r.censored for r in group)
        values = estimator_values(group)
        if not values:
            raise EmptyCell(f"{example}, n={n}: all {len(group)} replicates censored")
        for est in sorted(values):
            stats = quartile_stats(values[est])
            rows.append(SummaryRow(
                example=example, n=n, estimator=est, count=len(values[est]),
                censored=censored, censored_frac=censored / len(group), **stats,
            ))
    return rows
