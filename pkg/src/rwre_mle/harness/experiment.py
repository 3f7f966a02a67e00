"""Seeded Monte Carlo over (replicate, n)."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..mle import LeftStepData, confidence_region, maximize_1d, maximize_nd, SingularFisher
from ..moment_est import moment_estimate
from ..walk_sim import Walker, gen_environment
from .config import ExperimentSpec

log = logging.getLogger(__name__)


@dataclass
class ReplicateRecord:
    example: str
    n: int
    replicate: int
    env_seed: int
    walk_seed: int
    censored: bool
    total_steps: int
    theta_mle: np.ndarray | None = None
    sigma_hat: np.ndarray | None = None
    ci: list[tuple[float, float]] | None = None
    theta_mom: float | None = None
    clipped_mom: bool | None = None
    wall_time: float = field(default=0.0, compare=False)
    error: str | None = field(default=None, compare=False)


def replicate_seeds(master: int, replicate: int, n: int | None = None) -> tuple[int, int]:
    """(environment seed, walk seed), a pure function of its arguments."""
    key = (replicate,) if n is None else (replicate, n)
    state = np.random.SeedSequence(master, spawn_key=key).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def _estimate_at(spec: ExperimentSpec, rec: ReplicateRecord, outcome) -> None:
    model = spec.model
    data = LeftStepData.from_outcome(outcome)
    if model.dim == 1:
        res = maximize_1d(data, model, spec.reference())
    else:
        res = maximize_nd(data, model, spec.reference())
    rec.theta_mle = res.theta_hat
    rec.sigma_hat = res.fisher_hat
    try:
        rec.ci = confidence_region(res, spec.level)
    except SingularFisher:
        rec.ci = None
    if model.family in ("two_point", "temkin"):
        mom = moment_estimate(outcome, model)
        rec.theta_mom, rec.clipped_mom = mom.theta_hat, mom.clipped


def run_replicate(spec: ExperimentSpec, replicate: int, kappa: float | None = None) -> list[ReplicateRecord]:
    """All records of one replicate, one per n in the spec's list."""
    kappa = spec.kappa if kappa is None else kappa
    n_max = spec.n_list[-1]
    records = []
    walker = None
    if not spec.fresh_walk_per_n:
        env_seed, walk_seed = replicate_seeds(spec.seed, replicate)
        walker = Walker(gen_environment(spec.model, env_seed), np.random.default_rng(walk_seed), 0)
    for n in spec.n_list:
        t0 = time.perf_counter()
        cap = spec.t_max.cap(n, n_max, kappa)
        if spec.fresh_walk_per_n:
            env_seed, walk_seed = replicate_seeds(spec.seed, replicate, n)
            walker = Walker(gen_environment(spec.model, env_seed), np.random.default_rng(walk_seed), cap)
        else:
            walker.t_max = cap
        outcome = walker.advance_to(n)
        rec = ReplicateRecord(
            example=spec.name, n=n, replicate=replicate, env_seed=env_seed, walk_seed=walk_seed,
            censored=not outcome.hit, total_steps=outcome.total_steps,
        )
        if outcome.hit:
            try:
                _estimate_at(spec, rec, outcome)
            except Exception as exc:  # recorded, never aborts the batch
                log.exception("replicate %d, n=%d failed", replicate, n)
                rec.error = f"{type(exc).__name__}: {exc}"
        rec.wall_time = time.perf_counter() - t0
        records.append(rec)
    return records


def run_experiment(spec: ExperimentSpec, threads: int = 1, progress=None) -> list[ReplicateRecord]:
    """Run every replicate; the result is ordered by (n, replicate)."""
    kappa = spec.kappa

    def job(r):
        out = run_replicate(spec, r, kappa)
        if progress is not None:
            progress(r)
        return out

    if threads <= 1:
        chunks = [job(r) for r in range(spec.replicates)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(job, range(spec.replicates)))
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda rec: (rec.n, rec.replicate))
    return records
