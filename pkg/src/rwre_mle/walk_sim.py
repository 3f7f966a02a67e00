"""Quenched simulation of the nearest-neighbour walk up to the hitting time of n.

The environment is generated lazily in blocks of sites, each block drawn from its
own sub-stream keyed by (seed, block index), so the value at a site never depends
on the order in which sites are first queried.  The walk itself consumes uniforms
from a separate ``numpy.random.Generator``; a walk can be stopped at T_n and then
continued towards a larger target, which is how an experiment re-uses one
trajectory for a whole list of n.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .env_models import EnvModel

BLOCK = 1024
UNIFORM_CHUNK = 1 << 16

# first-move codes
_UNVISITED = -1
_LEFT = 0
_RIGHT = 1

# kernel exit codes
HIT, CAPPED, NEED_UNIFORMS, NEED_LEFT_SITES = 0, 1, 2, 3


class QuenchedEnv:
    """Lazily materialised environment omega_x, x in Z, for one seed."""

    def __init__(self, model: EnvModel, seed: int):
        self.model = model
        self.seed = int(seed)
        self._blocks: dict[int, np.ndarray] = {}

    def _block(self, b: int) -> np.ndarray:
        blk = self._blocks.get(b)
        if blk is None:
            key = (0, b) if b >= 0 else (1, -b - 1)
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))
            blk = np.asarray(self.model.sample(rng, BLOCK), dtype=np.float64)
            self._blocks[b] = blk
        return blk

    def omega(self, lo: int, hi: int) -> np.ndarray:
        """omega at sites lo, lo+1, ..., hi-1."""
        if hi <= lo:
            return np.empty(0)
        b_lo, b_hi = lo // BLOCK, (hi - 1) // BLOCK
        parts = [self._block(b) for b in range(b_lo, b_hi + 1)]
        flat = np.concatenate(parts) if len(parts) > 1 else parts[0]
        start = lo - b_lo * BLOCK
        return flat[start:start + (hi - lo)].copy()

    def __getitem__(self, x: int) -> float:
        return float(self._block(x // BLOCK)[x % BLOCK])


class ScriptedEnv:
    """Environment given by an explicit function of the site (test hook)."""

    def __init__(self, fn):
        self.fn = fn

    def omega(self, lo: int, hi: int) -> np.ndarray:
        return np.array([self.fn(x) for x in range(lo, hi)], dtype=np.float64)

    def __getitem__(self, x: int) -> float:
        return float(self.fn(x))


def gen_environment(model: EnvModel, seed: int) -> QuenchedEnv:
    return QuenchedEnv(model, seed)


def default_t_max(n: int, kappa: float) -> int:
    """Step cap ceil(500 n^(1/kappa))."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return math.ceil(500.0 * n ** (1.0 / kappa))


@dataclass
class WalkOutcome:
    n: int
    hit: bool
    total_steps: int
    left_counts: np.ndarray  # L_0 .. L_n at the stopping time
    left_total: int
    min_site: int
    first_moves: np.ndarray = field(repr=False)  # codes for sites min_site .. n, -1 = none

    def first_move_right(self) -> dict[int, bool]:
        return {
            self.min_site + i: bool(c == _RIGHT)
            for i, c in enumerate(self.first_moves)
            if c != _UNVISITED
        }

    @property
    def n_departed(self) -> int:
        return int(np.count_nonzero(self.first_moves != _UNVISITED))

    @property
    def n_right_first(self) -> int:
        return int(np.count_nonzero(self.first_moves == _RIGHT))


@numba.njit(nogil=True, cache=True)
def _advance(omega, origin, state, target, cap, uniforms, left_counts, first_moves, traj):
    """Run the walk until it hits ``target`` or another exit condition.

    Arrays are indexed by ``site + origin``.  ``state`` holds
    [position, time, uniform cursor, left_total, traj_len] and is updated in place.
    """
    x = state[0]
    t = state[1]
    ui = state[2]
    lt = state[3]
    tl = state[4]
    n_u = uniforms.shape[0]
    record = traj.shape[0] > 0
    code = HIT
    while x != target:
        if t >= cap:
            code = CAPPED
            break
        if ui >= n_u:
            code = NEED_UNIFORMS
            break
        i = x + origin
        if i == 0:
            code = NEED_LEFT_SITES
            break
        if uniforms[ui] < omega[i]:
            if first_moves[i] == _UNVISITED:
                first_moves[i] = _RIGHT
            x += 1
        else:
            if first_moves[i] == _UNVISITED:
                first_moves[i] = _LEFT
            left_counts[i] += 1
            lt += 1
            x -= 1
        ui += 1
        t += 1
        if record and tl < traj.shape[0]:
            traj[tl] = x
            tl += 1
    state[0] = x
    state[1] = t
    state[2] = ui
    state[3] = lt
    state[4] = tl
    return code


class Walker:
    """One walk in one quenched environment, advanced target by target.

    ``advance_to(n)`` stops the walk at T_n; a later call with a larger n continues
    the same trajectory.  Once the step cap is reached the walk is frozen and every
    subsequent target reports a censored outcome.
    """

    def __init__(self, env, rng: np.random.Generator, t_max: int, record_trajectory: bool = False):
        self.env = env
        self.rng = rng
        self.t_max = int(t_max)
        self._lo = -BLOCK  # leftmost materialised site
        self._hi = 0  # one past rightmost materialised site
        self._omega = env.omega(self._lo, self._hi)
        self._left = np.zeros(self._hi - self._lo, dtype=np.int64)
        self._first = np.full(self._hi - self._lo, _UNVISITED, dtype=np.int8)
        self._state = np.zeros(5, dtype=np.int64)
        self._uniforms = np.empty(0)
        self._chunk = 1024  # doubles up to UNIFORM_CHUNK; the stream itself does not depend on it
        self.capped = False
        self._record = record_trajectory
        self._traj = np.zeros(self.t_max + 1 if record_trajectory else 0, dtype=np.int64)
        if record_trajectory:
            self._state[4] = 1  # traj[0] = 0

    @property
    def position(self) -> int:
        return int(self._state[0])

    @property
    def time(self) -> int:
        return int(self._state[1])

    def trajectory(self) -> np.ndarray:
        if not self._record:
            raise RuntimeError("walker was created without trajectory recording")
        return self._traj[: self._state[4]].copy()

    def _grow_right(self, hi: int) -> None:
        extra = hi - self._hi
        if extra <= 0:
            return
        self._omega = np.concatenate([self._omega, self.env.omega(self._hi, hi)])
        self._left = np.concatenate([self._left, np.zeros(extra, dtype=np.int64)])
        self._first = np.concatenate([self._first, np.full(extra, _UNVISITED, dtype=np.int8)])
        self._hi = hi

    def _grow_left(self) -> None:
        extra = max(BLOCK, self._hi - self._lo)
        new_lo = self._lo - extra
        self._omega = np.concatenate([self.env.omega(new_lo, self._lo), self._omega])
        self._left = np.concatenate([np.zeros(extra, dtype=np.int64), self._left])
        self._first = np.concatenate([np.full(extra, _UNVISITED, dtype=np.int8), self._first])
        self._lo = new_lo

    def advance_to(self, n: int) -> WalkOutcome:
        if n < 1:
            raise ValueError("target site must be >= 1")
        if n < self.position:
            raise ValueError("targets must be visited in increasing order")
        self._grow_right(n + 1)
        while not self.capped and self.position != n:
            origin = -self._lo
            code = _advance(
                self._omega, origin, self._state, n, self.t_max,
                self._uniforms, self._left, self._first, self._traj,
            )
            if code == NEED_UNIFORMS:
                self._uniforms = self.rng.random(self._chunk)
                self._chunk = min(2 * self._chunk, UNIFORM_CHUNK)
                self._state[2] = 0
            elif code == NEED_LEFT_SITES:
                self._grow_left()
            elif code == CAPPED:
                self.capped = True
        return self._outcome(n)

    def _outcome(self, n: int) -> WalkOutcome:
        origin = -self._lo
        visited = np.flatnonzero(self._first != _UNVISITED)
        # a censored walk may stand on a new leftmost site it has not left yet
        min_site = min(int(visited[0]) - origin if visited.size else 0, self.position)
        return WalkOutcome(
            n=n,
            hit=self.position == n,
            total_steps=self.time,
            left_counts=self._left[origin:origin + n + 1].copy(),
            left_total=int(self._state[3]),
            min_site=min_site,
            first_moves=self._first[min_site + origin:origin + n + 1].copy(),
        )


def run_to_hitting(env, n: int, t_max: int, rng: np.random.Generator) -> WalkOutcome:
    """Walk from 0 until the first visit to n, or until ``t_max`` steps."""
    if t_max < n:
        raise ValueError("t_max must be at least n")
    return Walker(env, rng, t_max).advance_to(n)


def dump_trajectory(traj: np.ndarray, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "site"])
        for step, site in enumerate(traj):
            w.writerow([step, int(site)])
