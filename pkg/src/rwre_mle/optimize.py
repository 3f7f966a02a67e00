"""Derivative-free optimisers used by the estimator.

``golden_parabolic_max`` is Brent's combination of golden-section search and
successive parabolic interpolation on an interval.  ``bounded_simplex_max`` is a
Nelder-Mead search whose trial points are projected onto a box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GOLDEN = (3.0 - math.sqrt(5.0)) / 2.0
SQRT_EPS = math.sqrt(np.finfo(float).eps)


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    evals: int
    converged: bool


def golden_parabolic_max(f, lo: float, hi: float, xtol: float = 1e-8, max_evals: int = 500) -> OptimResult:
    """Maximise ``f`` on [lo, hi].

    A parabolic step is taken only when it lands strictly inside the current
    bracket and moves less than half the step before last; otherwise a golden
    step is taken.
    """
    if hi < lo:
        raise ValueError("empty interval")
    if hi == lo:
        return OptimResult(np.array([lo]), float(f(lo)), 1, True)

    def g(t):
        return -f(t)

    a, b = lo, hi
    x = w = v = a + GOLDEN * (b - a)
    fx = fw = fv = g(x)
    evals = 1
    d = e = 0.0
    converged = False
    while evals < max_evals:
        m = 0.5 * (a + b)
        tol1 = SQRT_EPS * abs(x) + xtol / 3.0
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            converged = True
            break
        golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            e_prev = e
            e = d
            if abs(p) < abs(0.5 * q * e_prev) and q * (a - x) < p < q * (b - x):
                d = p / q
                golden = False
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if x < m else -tol1
        if golden:
            e = (b - x) if x < m else (a - x)
            d = GOLDEN * e
        u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d))
        fu = g(u)
        evals += 1
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return OptimResult(np.array([x]), -fx, evals, converged)


def bounded_simplex_max(
    f,
    box,
    x0=None,
    xtol: float = 1e-8,
    max_evals: int = 2000,
    restarts: int = 1,
    seed: int = 0,
) -> OptimResult:
    """Maximise ``f`` over a box by Nelder-Mead with projection onto the box.

    Starts from the box centre (or ``x0``) and restarts once from a perturbed copy
    of the first solution.  ``converged`` reports whether the final simplex
    diameter dropped below ``xtol``.
    """
    box = np.asarray(box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    width = hi - lo
    start = (lo + hi) / 2.0 if x0 is None else np.clip(np.asarray(x0, dtype=float), lo, hi)
    rng = np.random.default_rng(seed)
    total_evals = 0
    best = None
    for attempt in range(restarts + 1):
        if attempt > 0:
            start = np.clip(best.x + 0.05 * width * rng.uniform(-1, 1, size=len(lo)), lo, hi)
        res = _nelder_mead(lambda t: -f(t), start, lo, hi, 0.1 * width, xtol, max_evals - total_evals)
        total_evals += res.evals
        if best is None or res.fun <= best.fun:
            best = OptimResult(res.x, res.fun, 0, res.converged)
        if total_evals >= max_evals:
            break
    return OptimResult(best.x, -best.fun, total_evals, best.converged)


def _nelder_mead(g, start, lo, hi, step, xtol, max_evals):
    dim = len(start)
    pts = [start.copy()]
    for i in range(dim):
        p = start.copy()
        p[i] = p[i] + step[i] if p[i] + step[i] <= hi[i] else p[i] - step[i]
        pts.append(p)
    simplex = np.array(pts)
    vals = np.array([g(p) for p in simplex])
    evals = dim + 1
    converged = False
    while evals < max_evals:
        order = np.argsort(vals, kind="stable")
        simplex, vals = simplex[order], vals[order]
        diam = np.max(np.abs(simplex[1:] - simplex[0]))
        if diam < xtol:
            converged = True
            break
        centroid = simplex[:-1].mean(axis=0)
        xr = np.clip(centroid + (centroid - simplex[-1]), lo, hi)
        fr = g(xr)
        evals += 1
        if fr < vals[0]:
            xe = np.clip(centroid + 2.0 * (centroid - simplex[-1]), lo, hi)
            fe = g(xe)
            evals += 1
            if fe < fr:
                simplex[-1], vals[-1] = xe, fe
            else:
                simplex[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            simplex[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            xc = np.clip(centroid + 0.5 * (xr - centroid), lo, hi)
        else:
            xc = np.clip(centroid + 0.5 * (simplex[-1] - centroid), lo, hi)
        fc = g(xc)
        evals += 1
        if fc < min(fr, vals[-1]):
            simplex[-1], vals[-1] = xc, fc
            continue
        # shrink towards the best vertex
        simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
        vals[1:] = [g(p) for p in simplex[1:]]
        evals += dim
    i = int(np.argmin(vals))
    return OptimResult(simplex[i].copy(), float(vals[i]), evals, converged)
