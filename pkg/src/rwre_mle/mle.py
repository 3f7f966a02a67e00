"""The sub-ballistic maximum likelihood estimator.

Given the left-step counts L_0, ..., L_n of a walk stopped at T_n, the criterion

    crit(theta) = sum_x [phi_theta(L_{x+1}, L_x) - phi_theta0(L_{x+1}, L_x)]

is maximised over the parameter box.  The reference point theta0 only shifts the
criterion by a constant, so it does not move the maximiser; subtracting it keeps
the criterion finite in the limit where E[phi_theta] itself diverges.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .env_models import EnvModel
from .optimize import bounded_simplex_max, golden_parabolic_max
from .walk_sim import WalkOutcome

log = logging.getLogger(__name__)

GRID_POINTS = 33
SINGULAR_EIG = 1e-12


class SingularFisher(ValueError):
    """The estimated Fisher information is not positive definite."""


@dataclass(frozen=True)
class LeftStepData:
    """The n pairs (L_{x+1}, L_x), x = 0..n-1, stored as unique pairs with weights."""

    n: int
    u: np.ndarray
    v: np.ndarray
    weight: np.ndarray

    @classmethod
    def from_counts(cls, left_counts) -> "LeftStepData":
        L = np.asarray(left_counts, dtype=np.int64)
        if L.ndim != 1 or L.size < 2:
            raise ValueError("need left-step counts for sites 0..n with n >= 1")
        if np.any(L < 0):
            raise ValueError("left-step counts must be non-negative")
        pairs = np.stack([L[1:], L[:-1]], axis=1)
        uniq, counts = np.unique(pairs, axis=0, return_counts=True)
        return cls(n=L.size - 1, u=uniq[:, 0], v=uniq[:, 1], weight=counts.astype(float))

    @classmethod
    def from_outcome(cls, outcome: WalkOutcome) -> "LeftStepData":
        if not outcome.hit:
            raise ValueError("censored walk: no estimate is computed before T_n")
        return cls.from_counts(outcome.left_counts)


@dataclass
class EstimateResult:
    theta_hat: np.ndarray
    criterion_at_hat: float
    fisher_hat: np.ndarray
    fisher_hessian: np.ndarray
    n: int
    optimizer_evals: int
    converged: bool
    ci: list[tuple[float, float]] | None = None
    level: float | None = None
    notes: list[str] = field(default_factory=list)


def criterion(data: LeftStepData, model: EnvModel, theta, theta0=None) -> float:
    """Log-likelihood difference between ``theta`` and the reference ``theta0``.

    ``model`` fixes the family and its known constants; its own parameter is ignored.
    """
    if theta0 is None:
        theta0 = model.box_center()
    at = model.with_theta(theta).log_phi(data.u, data.v)
    ref = model.with_theta(theta0).log_phi(data.u, data.v)
    return float(np.dot(data.weight, at - ref))


def _box(model: EnvModel, box):
    box = model.box if box is None else box
    if box is None:
        raise ValueError(f"{model.family} model has no parameter box; pass one explicitly")
    return tuple((float(lo), float(hi)) for lo, hi in box)


def _prefer(cand, best):
    # larger criterion wins; ties go to the smaller parameter
    if best is None:
        return True
    if cand[1] != best[1]:
        return cand[1] > best[1]
    return cand[0] < best[0]


def maximize_1d(
    data: LeftStepData,
    model: EnvModel,
    theta0=None,
    box=None,
    tol: float = 1e-8,
    objective=None,
    max_evals: int = 500,
) -> EstimateResult:
    """Argmax over an interval: coarse grid, then golden/parabolic refinement.

    ``objective`` replaces the criterion (test hook).
    """
    (lo, hi), = _box(model, box)
    if objective is None:
        theta0 = model.box_center() if theta0 is None else theta0

        def objective(t):
            return criterion(data, model, [t], theta0)

    grid = np.linspace(lo, hi, GRID_POINTS)
    vals = [objective(t) for t in grid]
    best = None
    for t, fv in zip(grid, vals):
        if _prefer((t, fv), best):
            best = (t, fv)
    i = int(np.flatnonzero(grid == best[0])[0])
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]
    res = golden_parabolic_max(objective, a, b, xtol=tol, max_evals=max_evals - GRID_POINTS)
    if _prefer((float(res.x[0]), res.fun), best):
        best = (float(res.x[0]), res.fun)
    evals = GRID_POINTS + res.evals
    if not res.converged:
        log.warning("golden/parabolic search stopped after %d evaluations", evals)
    return _finish(data, model, np.array([best[0]]), best[1], evals, res.converged)


def maximize_nd(
    data: LeftStepData,
    model: EnvModel,
    theta0=None,
    box=None,
    tol: float = 1e-8,
    objective=None,
    max_evals: int = 4000,
) -> EstimateResult:
    """Argmax over a box by bounded simplex search with one restart."""
    box = _box(model, box)
    if objective is None:
        theta0 = model.box_center() if theta0 is None else theta0

        def objective(t):
            return criterion(data, model, t, theta0)

    res = bounded_simplex_max(objective, box, xtol=tol, max_evals=max_evals)
    if not res.converged:
        log.warning("simplex search did not converge in %d evaluations", res.evals)
    return _finish(data, model, res.x, res.fun, res.evals, res.converged)


def _finish(data, model, theta_hat, crit, evals, converged):
    if data is None:
        empty = np.full((len(theta_hat), len(theta_hat)), np.nan)
        return EstimateResult(theta_hat, crit, empty, empty, 0, evals, converged)
    outer, hess = fisher_estimate(data, model, theta_hat)
    return EstimateResult(theta_hat, crit, outer, hess, data.n, evals, converged)


def fisher_estimate(data: LeftStepData, model: EnvModel, theta_hat) -> tuple[np.ndarray, np.ndarray]:
    """Empirical Fisher information at ``theta_hat``.

    Returns the outer-product form (1/n) sum grad grad^T and the curvature form
    -(1/n) sum hess; the first is the one used for intervals.
    """
    m = model.with_theta(theta_hat)
    g = m.grad_phi(data.u, data.v)
    h = m.hess_phi(data.u, data.v)
    w = data.weight
    outer = np.einsum("k,ki,kj->ij", w, g, g) / data.n
    curv = -np.einsum("k,kij->ij", w, h) / data.n
    return 0.5 * (outer + outer.T), 0.5 * (curv + curv.T)


def check_fisher(fisher: np.ndarray) -> None:
    if not np.all(np.isfinite(fisher)) or np.linalg.eigvalsh(fisher).min() < SINGULAR_EIG:
        raise SingularFisher("estimated Fisher information is singular")


def confidence_region(result: EstimateResult, level: float) -> list[tuple[float, float]]:
    """Per-coordinate Wald intervals theta_i +- z sqrt((Sigma^-1)_ii / n)."""
    if not 0.0 <= level < 1.0:
        raise ValueError("level must lie in [0, 1)")
    check_fisher(result.fisher_hat)
    z = stats.norm.ppf(0.5 + level / 2.0)
    cov = np.linalg.inv(result.fisher_hat)
    half = z * np.sqrt(np.diag(cov) / result.n)
    return [(float(t - h), float(t + h)) for t, h in zip(result.theta_hat, half)]


def estimate(
    data: LeftStepData | WalkOutcome,
    model: EnvModel,
    theta0=None,
    box=None,
    level: float | None = 0.95,
    tol: float = 1e-8,
) -> EstimateResult:
    """Full pipeline: maximise, estimate Fisher information, attach intervals."""
    if isinstance(data, WalkOutcome):
        data = LeftStepData.from_outcome(data)
    if model.dim == 1:
        res = maximize_1d(data, model, theta0, box, tol)
    else:
        res = maximize_nd(data, model, theta0, box, tol)
    if level is not None:
        try:
            res.ci = confidence_region(res, level)
            res.level = level
            if model.family == "temkin":
                res.notes.append("nominal interval: the Fisher information of this family is infinite")
        except SingularFisher:
            res.notes.append("singular Fisher information; interval suppressed")
    return res
