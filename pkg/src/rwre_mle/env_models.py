"""Parametric i.i.d. environment families for the nearest-neighbour walk.

Three families are supported:

* ``TwoPoint``: omega equals ``a1`` with probability ``p`` and ``a2`` otherwise;
  the unknown parameter is ``p``.
* ``Temkin``: omega equals ``a`` with probability ``p`` and ``1 - a`` otherwise;
  ``p`` is known and the support point ``a`` is estimated.
* ``Beta``: omega ~ Beta(alpha, beta), both parameters estimated.

Every quantity that involves powers of omega is evaluated in log space, since
left-step counts in the sub-ballistic regime run into the thousands.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import ClassVar

import numpy as np
from scipy.special import betaln, digamma, gammaln, polygamma

Box = tuple[tuple[float, float], ...]

KAPPA_SCAN_STEP = 0.25
KAPPA_S_MAX = 64.0
KAPPA_BRACKET_WIDTH = 1e-13


class NotTransientRight(ValueError):
    """Raised when E log rho >= 0, so no right-transience exponent exists."""


class Regime(str, enum.Enum):
    RECURRENT = "Recurrent"
    TRANSIENT_BALLISTIC = "TransientBallistic"
    TRANSIENT_SUB_BALLISTIC = "TransientSubBallistic"
    TRANSIENT_LEFT = "TransientLeft"


@dataclass(frozen=True)
class RegimeReport:
    e_log_rho: float
    e_rho: float
    kappa: float | None
    regime: Regime


def _check_open_unit(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")


def _check_box(box: Box, dim: int) -> Box:
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) != dim:
        raise ValueError(f"box must have {dim} coordinate(s), got {len(box)}")
    for lo, hi in box:
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ValueError(f"invalid box interval [{lo}, {hi}]")
    return box


def _as_counts(u, v):
    u = np.asarray(u)
    v = np.asarray(v)
    if np.any(u < 0) or np.any(v < 0):
        raise ValueError("left-step counts must be non-negative")
    return u.astype(np.float64), v.astype(np.float64)


@dataclass(frozen=True)
class EnvModel:
    """Base class; concrete families are the frozen dataclasses below."""

    family: ClassVar[str] = ""
    param_names: ClassVar[tuple[str, ...]] = ()

    # -- parameter handling -------------------------------------------------
    @property
    def theta(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in self.param_names], dtype=float)

    @property
    def dim(self) -> int:
        return len(self.param_names)

    def with_theta(self, theta) -> "EnvModel":
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.dim,):
            raise ValueError(f"{self.family} expects {self.dim} parameter(s)")
        return replace(self, **{k: float(t) for k, t in zip(self.param_names, theta)})

    def box_center(self) -> np.ndarray:
        if self.box is None:
            raise ValueError(f"{self.family} model has no parameter box")
        return np.array([(lo + hi) / 2 for lo, hi in self.box])

    def in_box(self, theta, interior: bool = False) -> bool:
        if self.box is None:
            return False
        theta = np.atleast_1d(theta)
        for t, (lo, hi) in zip(theta, self.box):
            if interior and not lo < t < hi:
                return False
            if not lo <= t <= hi:
                return False
        return True

    # -- family-specific pieces, overridden ------------------------------------
    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def log_phi(self, u, v):
        raise NotImplementedError

    def grad_phi(self, u, v) -> np.ndarray:
        raise NotImplementedError

    def hess_phi(self, u, v) -> np.ndarray:
        raise NotImplementedError

    def moment_rho(self, s: float) -> float:
        raise NotImplementedError

    def e_log_rho(self) -> float:
        raise NotImplementedError

    def mean_omega(self) -> float:
        raise NotImplementedError

    def sample_log_rho(self, rng: np.random.Generator, size=None):
        w = self.sample(rng, size)
        return np.log1p(-w) - np.log(w)

    # -- shared ----------------------------------------------------------------
    def solve_kappa(self) -> float:
        return solve_kappa(self)

    def classify(self) -> RegimeReport:
        return classify_regime(self)


class _TwoAtom(EnvModel):
    """Shared log-space algebra for mixtures of two point masses."""

    def atoms(self) -> tuple[float, float, float, float]:
        """Return (w1, x1, w2, x2): weights and locations of the atoms."""
        raise NotImplementedError

    def sample(self, rng, size=None):
        w1, x1, _, x2 = self.atoms()
        return np.where(rng.random(size) < w1, x1, x2)

    def _log_terms(self, u, v):
        # log of a^(u+1) (1-a)^v at each atom, without the weights
        _, x1, _, x2 = self.atoms()
        t1 = (u + 1.0) * math.log(x1) + v * math.log1p(-x1)
        t2 = (u + 1.0) * math.log(x2) + v * math.log1p(-x2)
        return t1, t2

    def _log_weights(self):
        w1, _, w2, _ = self.atoms()
        with np.errstate(divide="ignore"):
            return np.log(w1), np.log(w2)

    def log_phi(self, u, v):
        u, v = _as_counts(u, v)
        t1, t2 = self._log_terms(u, v)
        lw1, lw2 = self._log_weights()
        return np.logaddexp(lw1 + t1, lw2 + t2)

    def moment_rho(self, s: float) -> float:
        if s < 0:
            raise ValueError("moment order must be non-negative")
        w1, x1, w2, x2 = self.atoms()
        lw1, lw2 = self._log_weights()
        r1 = math.log1p(-x1) - math.log(x1)
        r2 = math.log1p(-x2) - math.log(x2)
        return float(np.exp(np.logaddexp(lw1 + s * r1, lw2 + s * r2)))

    def e_log_rho(self) -> float:
        w1, x1, w2, x2 = self.atoms()
        return w1 * (math.log1p(-x1) - math.log(x1)) + w2 * (math.log1p(-x2) - math.log(x2))

    def mean_omega(self) -> float:
        w1, x1, w2, x2 = self.atoms()
        return w1 * x1 + w2 * x2


@dataclass(frozen=True)
class TwoPoint(_TwoAtom):
    """omega = a1 with probability p, else a2; the parameter is p."""

    p: float
    a1: float = 0.4
    a2: float = 0.7
    box: Box | None = ((0.01, 0.99),)

    family: ClassVar[str] = "two_point"
    param_names: ClassVar[tuple[str, ...]] = ("p",)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        _check_open_unit("a1", self.a1)
        _check_open_unit("a2", self.a2)
        if self.a1 > self.a2:
            raise ValueError("two-point support requires a1 <= a2")
        if self.box is not None:
            box = _check_box(self.box, 1)
            (lo, hi), = box
            if lo < 0.0 or hi > 1.0:
                raise ValueError("two-point box must lie inside [0, 1]")
            object.__setattr__(self, "box", box)

    def atoms(self):
        return self.p, self.a1, 1.0 - self.p, self.a2

    def _ratios(self, u, v):
        # A_i / mixture for each atom; the p-derivative is their difference
        u, v = _as_counts(u, v)
        t1, t2 = self._log_terms(u, v)
        lw1, lw2 = self._log_weights()
        lmix = np.logaddexp(lw1 + t1, lw2 + t2)
        return np.exp(t1 - lmix), np.exp(t2 - lmix)

    def grad_phi(self, u, v):
        r1, r2 = self._ratios(u, v)
        return (r1 - r2)[..., None]

    def hess_phi(self, u, v):
        r1, r2 = self._ratios(u, v)
        return (-(r1 - r2) ** 2)[..., None, None]


@dataclass(frozen=True)
class Temkin(_TwoAtom):
    """omega = a with probability p, else 1 - a; p known, a estimated.

    The default box is ``[0.01, p - 0.001]`` which stays inside ``(0, p)``.
    """

    a: float
    p: float
    box: Box | None = field(default=None)

    family: ClassVar[str] = "temkin"
    param_names: ClassVar[tuple[str, ...]] = ("a",)

    def __post_init__(self):
        _check_open_unit("a", self.a)
        _check_open_unit("p", self.p)
        box = self.box
        if box is None and 0.011 < self.p < 0.5:
            box = ((0.01, self.p - 0.001),)
        if box is not None:
            box = _check_box(box, 1)
            (lo, hi), = box
            if not (0.0 < lo and hi < self.p):
                raise ValueError("Temkin box must lie inside (0, p)")
        object.__setattr__(self, "box", box)

    def atoms(self):
        return self.p, self.a, 1.0 - self.p, 1.0 - self.a

    def _pieces(self, u, v):
        u, v = _as_counts(u, v)
        a = self.a
        t1, t2 = self._log_terms(u, v)
        lw1, lw2 = self._log_weights()
        l1, l2 = lw1 + t1, lw2 + t2
        lmix = np.logaddexp(l1, l2)
        w1, w2 = np.exp(l1 - lmix), np.exp(l2 - lmix)
        # d/da of the log of each weighted term
        g1 = (u + 1.0) / a - v / (1.0 - a)
        g2 = v / a - (u + 1.0) / (1.0 - a)
        # d/da of g1, g2
        h1 = -(u + 1.0) / a**2 - v / (1.0 - a) ** 2
        h2 = -v / a**2 - (u + 1.0) / (1.0 - a) ** 2
        return w1, w2, g1, g2, h1, h2

    def grad_phi(self, u, v):
        w1, w2, g1, g2, _, _ = self._pieces(u, v)
        return (w1 * g1 + w2 * g2)[..., None]

    def hess_phi(self, u, v):
        w1, w2, g1, g2, h1, h2 = self._pieces(u, v)
        grad = w1 * g1 + w2 * g2
        second = w1 * (g1**2 + h1) + w2 * (g2**2 + h2)
        return (second - grad**2)[..., None, None]


def default_beta_box(alpha: float, beta: float) -> Box | None:
    """Box centred on (alpha, beta) inside {beta < alpha <= beta + 1}, if any."""
    d = alpha - beta
    if not 0.0 < d < 1.0:
        return None
    w = 0.4 * min(d, 1.0 - d, beta)
    return ((alpha - w, alpha + w), (beta - w, beta + w))


@dataclass(frozen=True)
class Beta(EnvModel):
    """omega ~ Beta(alpha, beta)."""

    alpha: float
    beta: float
    box: Box | None = field(default=None)

    family: ClassVar[str] = "beta"
    param_names: ClassVar[tuple[str, ...]] = ("alpha", "beta")

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("Beta parameters must be positive")
        box = self.box if self.box is not None else default_beta_box(self.alpha, self.beta)
        if box is not None:
            box = _check_box(box, 2)
            (alo, ahi), (blo, bhi) = box
            if not (blo > 0 and bhi < alo and ahi <= blo + 1.0):
                raise ValueError("Beta box must lie inside {0 < beta < alpha <= beta + 1}")
        object.__setattr__(self, "box", box)

    def sample(self, rng, size=None):
        w = rng.beta(self.alpha, self.beta, size)
        return np.clip(w, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)

    def log_phi(self, u, v):
        u, v = _as_counts(u, v)
        return betaln(u + 1.0 + self.alpha, v + self.beta) - betaln(self.alpha, self.beta)

    def grad_phi(self, u, v):
        u, v = _as_counts(u, v)
        al, be = self.alpha, self.beta
        common = -digamma(u + v + 1.0 + al + be) + digamma(al + be)
        d_alpha = digamma(u + 1.0 + al) - digamma(al) + common
        d_beta = digamma(v + be) - digamma(be) + common
        return np.stack([d_alpha, d_beta], axis=-1)

    def hess_phi(self, u, v):
        u, v = _as_counts(u, v)
        al, be = self.alpha, self.beta
        cross = polygamma(1, al + be) - polygamma(1, u + v + 1.0 + al + be)
        d_aa = polygamma(1, u + 1.0 + al) - polygamma(1, al) + cross
        d_bb = polygamma(1, v + be) - polygamma(1, be) + cross
        row0 = np.stack([d_aa, cross], axis=-1)
        row1 = np.stack([cross, d_bb], axis=-1)
        return np.stack([row0, row1], axis=-2)

    def moment_rho(self, s: float) -> float:
        if s < 0:
            raise ValueError("moment order must be non-negative")
        if s >= self.alpha:
            return math.inf
        return math.exp(
            gammaln(self.alpha - s) + gammaln(self.beta + s) - gammaln(self.alpha) - gammaln(self.beta)
        )

    def e_log_rho(self) -> float:
        return float(digamma(self.beta) - digamma(self.alpha))

    def mean_omega(self) -> float:
        return self.alpha / (self.alpha + self.beta)


def beta_hessian_sums(alpha: float, beta: float, x: int, y: int) -> np.ndarray:
    """Second derivatives of the Beta log-phi written as finite sums.

    Independent of the trigamma route used by ``Beta.hess_phi``.
    """
    k_ab = np.arange(x + y + 1)
    shared = np.sum(1.0 / (k_ab + alpha + beta) ** 2)
    d_aa = -np.sum(1.0 / (np.arange(x + 1) + alpha) ** 2) + shared
    d_bb = -np.sum(1.0 / (np.arange(y) + beta) ** 2) + shared
    return np.array([[d_aa, shared], [shared, d_bb]])


# -- module-level operations ------------------------------------------------------


def sample_omega(model: EnvModel, rng: np.random.Generator) -> float:
    return float(model.sample(rng))


def log_phi(model: EnvModel, u, v):
    return model.log_phi(u, v)


def grad_phi(model: EnvModel, u, v):
    return model.grad_phi(u, v)


def hess_phi(model: EnvModel, u, v):
    return model.hess_phi(u, v)


def moment_rho(model: EnvModel, s: float) -> float:
    return model.moment_rho(s)


def solve_kappa(model: EnvModel, s_max: float = KAPPA_S_MAX) -> float:
    """Positive root of E[rho^s] = 1, or ``inf`` when none exists below ``s_max``.

    s -> E[rho^s] is convex, equals 1 at 0 and starts downwards when E log rho < 0,
    so scanning upwards until the moment reaches 1 brackets the unique root.
    """
    if model.e_log_rho() >= 0:
        raise NotTransientRight(f"E log rho = {model.e_log_rho():.6g} >= 0")
    lo, hi = 0.0, None
    s = KAPPA_SCAN_STEP
    while s <= s_max:
        if model.moment_rho(s) >= 1.0:
            hi = s
            break
        lo = s
        s += KAPPA_SCAN_STEP
    if hi is None:
        return math.inf
    while hi - lo > KAPPA_BRACKET_WIDTH:
        mid = 0.5 * (lo + hi)
        if model.moment_rho(mid) >= 1.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def classify_regime(model: EnvModel, zero_tol: float = 1e-12) -> RegimeReport:
    e_log = model.e_log_rho()
    e_rho = model.moment_rho(1.0)
    if abs(e_log) <= zero_tol:
        return RegimeReport(e_log, e_rho, None, Regime.RECURRENT)
    if e_log > 0:
        return RegimeReport(e_log, e_rho, None, Regime.TRANSIENT_LEFT)
    kappa = solve_kappa(model)
    regime = Regime.TRANSIENT_BALLISTIC if e_rho < 1.0 else Regime.TRANSIENT_SUB_BALLISTIC
    return RegimeReport(e_log, e_rho, kappa, regime)


# -- benchmark configurations ------------------------------------------------------


def _root_in_weight(rho_hi: float, rho_lo: float, kappa: float) -> float:
    # weight w on rho_hi such that w rho_hi^k + (1 - w) rho_lo^k = 1
    hi, lo = rho_hi**kappa, rho_lo**kappa
    return (1.0 - lo) / (hi - lo)


def two_point_benchmark(kappa: float = 0.9, a1: float = 0.4, a2: float = 0.7) -> TwoPoint:
    """Two-point environment with p chosen so that the walk has exponent ``kappa``.

    With the defaults p = 0.54781...
    """
    p = _root_in_weight((1 - a1) / a1, (1 - a2) / a2, kappa)
    return TwoPoint(p=p, a1=a1, a2=a2)


def temkin_benchmark(kappa: float = 0.9, a: float = 0.4) -> Temkin:
    """Temkin environment with p chosen so that the walk has exponent ``kappa``.

    With the defaults p = 0.40977... (commonly rounded to 0.41).
    """
    p = _root_in_weight((1 - a) / a, a / (1 - a), kappa)
    return Temkin(a=a, p=p)


FAMILIES: dict[str, type[EnvModel]] = {cls.family: cls for cls in (TwoPoint, Temkin, Beta)}


def make_model(family: str, **params) -> EnvModel:
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; expected one of {sorted(FAMILIES)}") from None
    return cls(**params)
