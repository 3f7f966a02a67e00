"""Baseline moment estimator.

The proportion of visited sites whose first departure is a right step estimates
E[omega_0]; for the two one-parameter families this mean is affine in the
parameter and is inverted directly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .env_models import EnvModel, Temkin, TwoPoint
from .walk_sim import WalkOutcome


class EmptyPath(ValueError):
    """The walk left no site, so no first move was observed."""


@dataclass(frozen=True)
class MomentEstimate:
    v_hat: float
    theta_hat: float
    n_sites: int
    clipped: bool


def v_hat(outcome: WalkOutcome) -> float:
    """Fraction of departed sites (negative sites included) whose first move is right."""
    n_sites = outcome.n_departed
    if n_sites == 0:
        raise EmptyPath("no site was departed")
    return outcome.n_right_first / n_sites


def _clip(value: float, box) -> tuple[float, bool]:
    if box is None:
        return value, False
    (lo, hi), = box
    clipped = min(max(value, lo), hi)
    return clipped, clipped != value


def invert_two_point(v: float, a1: float, a2: float, box=None) -> tuple[float, bool]:
    """p with p a1 + (1 - p) a2 = v, optionally clipped into ``box``."""
    if not a1 < a2:
        raise ValueError("inversion needs a1 < a2")
    return _clip((a2 - v) / (a2 - a1), box)


def invert_temkin(v: float, p: float, box=None) -> tuple[float, bool]:
    """a with p a + (1 - p)(1 - a) = v, optionally clipped into ``box``."""
    if p == 0.5:
        raise ValueError("the mean does not depend on a when p = 1/2")
    return _clip((v - (1.0 - p)) / (2.0 * p - 1.0), box)


def moment_estimate(outcome: WalkOutcome, model: EnvModel) -> MomentEstimate:
    v = v_hat(outcome)
    if isinstance(model, TwoPoint):
        theta, clipped = invert_two_point(v, model.a1, model.a2, model.box)
    elif isinstance(model, Temkin):
        theta, clipped = invert_temkin(v, model.p, model.box)
    else:
        raise NotImplementedError(f"no moment estimator for family {model.family!r}")
    return MomentEstimate(v, theta, outcome.n_departed, clipped)
