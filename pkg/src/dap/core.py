"""Instance/solution data model and the cost algebra used by every other module.

Time is discrete and 1-indexed.  Demands arriving at time t are visible when
the ack decision for time t is made; a demand acked at its arrival time incurs
zero delay.  One unit of demand waiting one time step costs 1/d.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class DapError(Exception):
    """Base class for domain errors."""


class FeasibilityError(DapError):
    """A solution leaves a positive demand uncovered."""

    def __init__(self, uncovered_time: int):
        self.uncovered_time = uncovered_time
        super().__init__(f"infeasible solution: demand at time {uncovered_time} is never acknowledged")


class FormatError(DapError):
    """Malformed instance/solution/config text."""


class ResourceError(DapError):
    """A guarded resource limit (horizon cap, table size) was exceeded."""


@dataclass(frozen=True)
class Instance:
    """A demand stream: delay factor d plus per-step demand volumes p_1..p_T."""

    d: float
    demands: tuple[float, ...]

    def __post_init__(self):
        if not (isinstance(self.d, (int, float)) and math.isfinite(self.d) and self.d > 0):
            raise ValueError(f"delay factor must be a positive finite real, got {self.d!r}")
        object.__setattr__(self, "d", float(self.d))
        demands = tuple(float(p) for p in self.demands)
        if len(demands) < 1:
            raise ValueError("horizon must be at least 1")
        for t, p in enumerate(demands, start=1):
            if not (math.isfinite(p) and p >= 0.0):
                raise ValueError(f"demand at time {t} must be a non-negative finite real, got {p!r}")
        object.__setattr__(self, "demands", demands)

    @property
    def horizon(self) -> int:
        return len(self.demands)

    @property
    def last_positive(self) -> int:
        """Last time with positive demand, or 0 for the all-zeros instance."""
        for t in range(len(self.demands), 0, -1):
            if self.demands[t - 1] > 0.0:
                return t
        return 0

    @cached_property
    def _prefix(self) -> tuple[np.ndarray, np.ndarray]:
        """1-indexed prefix sums of p_t and t*p_t (index 0 is 0)."""
        p = np.asarray(self.demands, dtype=np.float64)
        t = np.arange(1, len(self.demands) + 1, dtype=np.float64)
        P = np.zeros(len(self.demands) + 1)
        S = np.zeros(len(self.demands) + 1)
        np.cumsum(p, out=P[1:])
        np.cumsum(t * p, out=S[1:])
        return P, S


@dataclass(frozen=True)
class Solution:
    """A sorted set of ack times.  Feasible for I iff the last positive demand is covered."""

    acks: tuple[int, ...]

    def __post_init__(self):
        acks = tuple(int(x) for x in self.acks)
        for a, b in zip(acks, acks[1:]):
            if a >= b:
                raise ValueError("ack times must be strictly increasing")
        if acks and acks[0] < 1:
            raise ValueError("ack times must be >= 1")
        object.__setattr__(self, "acks", acks)

    def __len__(self) -> int:
        return len(self.acks)


@dataclass(frozen=True)
class CostBreakdown:
    num_acks: int
    delay_cost: float
    total: float

    @classmethod
    def of(cls, num_acks: int, delay_cost: float) -> "CostBreakdown":
        return cls(num_acks, delay_cost, num_acks + delay_cost)


def interval_delay(P: np.ndarray, S: np.ndarray, d: float, a, b: int):
    """Delay of the demands in [a, b] when all are served by an ack at b.

    a may be a numpy array (vectorized over interval starts).  The expression
    is kept identical between scalar and vector use so that costs assembled
    from it are bit-for-bit reproducible.
    """
    return (b * (P[b] - P[a - 1]) - (S[b] - S[a - 1])) / d


def check_feasible(instance: Instance, solution: Solution) -> None:
    if solution.acks and solution.acks[-1] > instance.horizon:
        raise ValueError(f"ack at {solution.acks[-1]} is outside the horizon {instance.horizon}")
    last = instance.last_positive
    if last == 0:
        return
    if not solution.acks or solution.acks[-1] < last:
        raise FeasibilityError(last)


def evaluate(instance: Instance, solution: Solution) -> CostBreakdown:
    """Exact cost of a feasible solution: ack count plus total delay."""
    check_feasible(instance, solution)
    P, S = instance._prefix
    d = instance.d
    delay = 0.0
    prev = 0
    for x in solution.acks:
        delay += float(interval_delay(P, S, d, prev + 1, x))
        prev = x
    return CostBreakdown.of(len(solution.acks), delay)


def delay_saving(instance: Instance, solution: Solution, t: int) -> float:
    """Decrease of the delay cost when an extra ack at t is added to a feasible solution.

    O(1) per query after the instance's O(T) prefix-sum precompute.
    """
    check_feasible(instance, solution)
    if not 1 <= t <= instance.horizon:
        raise ValueError(f"time {t} outside horizon [1, {instance.horizon}]")
    acks = solution.acks
    if t in acks:
        return 0.0
    i = bisect.bisect_left(acks, t)
    prev = acks[i - 1] if i > 0 else 0
    if i == len(acks):
        # t is after the last ack; the tail holds no positive demand.
        return 0.0
    nxt = acks[i]
    P, _ = instance._prefix
    vol = float(P[t] - P[prev])
    return (nxt - t) * vol / instance.d


def subinstance(instance: Instance, t1: int, t2: int) -> Instance:
    """The window [t1, t2] re-indexed to times 1..(t2-t1+1), same delay factor."""
    if not 1 <= t1 <= t2 <= instance.horizon:
        raise ValueError(f"window [{t1}, {t2}] outside horizon [1, {instance.horizon}]")
    return Instance(instance.d, instance.demands[t1 - 1 : t2])


def pad_pair(i1: Instance, i2: Instance) -> tuple[Instance, Instance]:
    """Zero-pad the shorter instance so both share the common horizon."""
    if i1.d != i2.d:
        raise ValueError(f"mismatched delay factors: {i1.d} vs {i2.d}")
    n = max(i1.horizon, i2.horizon)
    a = i1 if i1.horizon == n else Instance(i1.d, i1.demands + (0.0,) * (n - i1.horizon))
    b = i2 if i2.horizon == n else Instance(i2.d, i2.demands + (0.0,) * (n - i2.horizon))
    return a, b


_COMBINE = {
    "max": max,
    "min": min,
    "absdiff": lambda a, b: abs(a - b),
    "sum": lambda a, b: a + b,
}


def combine(i1: Instance, i2: Instance, mode: str) -> Instance:
    """Pointwise max/min/absdiff/sum over the zero-padded common horizon."""
    try:
        op = _COMBINE[mode]
    except KeyError:
        raise ValueError(f"unknown combine mode {mode!r}; expected one of {sorted(_COMBINE)}") from None
    a, b = pad_pair(i1, i2)
    return Instance(a.d, tuple(op(x, y) for x, y in zip(a.demands, b.demands)))


def dominates(i1: Instance, i2: Instance) -> bool:
    """True iff i1's demands are pointwise <= i2's after zero-padding."""
    a, b = pad_pair(i1, i2)
    return all(x <= y for x, y in zip(a.demands, b.demands))
