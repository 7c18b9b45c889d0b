"""Offline optimum: quadratic DP, all-pairs subwindow optimum table, brute-force oracle.

Tie-breaking is deterministic everywhere: minimum cost, then fewest acks, then
the lexicographically smallest ack-time sequence.  The DP and the brute-force
oracle assemble costs from the same interval-delay primitive in the same
left-to-right order, so equal solutions produce bit-identical values.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from dap.core import Instance, ResourceError, Solution, interval_delay

BRUTE_FORCE_HORIZON_CAP = 20
TABLE_HORIZON_CAP = 4000


def optimal_solution(instance: Instance) -> tuple[Solution, float]:
    """Optimal feasible solution and its value.

    The last ack sits exactly at the last positive-demand time; the all-zeros
    instance gets the empty solution at cost 0.
    """
    last = instance.last_positive
    if last == 0:
        return Solution(()), 0.0
    P, S = instance._prefix
    d = instance.d
    cost = np.zeros(last + 1)
    count = [0] * (last + 1)
    seq: list[tuple[int, ...]] = [()] * (last + 1)
    for j in range(1, last + 1):
        m = np.arange(j)
        cand = cost[:j] + (1.0 + interval_delay(P, S, d, m + 1, j))
        best = cand.min()
        ties = np.flatnonzero(cand == best)
        pick = int(min(ties, key=lambda mm: (count[mm], seq[mm])))
        cost[j] = cand[pick]
        count[j] = count[pick] + 1
        seq[j] = seq[pick] + (j,)
    return Solution(seq[last]), float(cost[last])


def optimal_value(instance: Instance) -> float:
    return optimal_solution(instance)[1]


def brute_force_optimal(instance: Instance) -> tuple[Solution, float]:
    """Test oracle: enumerate every ack subset containing the last positive-demand time."""
    if instance.horizon > BRUTE_FORCE_HORIZON_CAP:
        raise ResourceError(f"brute force is capped at horizon {BRUTE_FORCE_HORIZON_CAP}")
    last = instance.last_positive
    if last == 0:
        return Solution(()), 0.0
    P, S = instance._prefix
    d = instance.d
    best: tuple[float, int, tuple[int, ...]] | None = None
    for mask in range(1 << (last - 1)):
        acks = [t for t in range(1, last) if (mask >> (t - 1)) & 1]
        acks.append(last)
        cost = 0.0
        prev = 0
        for x in acks:
            cost = cost + (1.0 + float(interval_delay(P, S, d, prev + 1, x)))
            prev = x
        key = (cost, len(acks), tuple(acks))
        if best is None or key < best:
            best = key
    return Solution(best[2]), best[0]


class AckAtTable:
    """Rolling DP over a growing window of demand volumes.

    After k pushes, entry(i, j) is the cost of serving window steps [i..j]
    with an ack forced at j (1-indexed within the window).  Columns are built
    incrementally, one vectorized min per push, so the table can track an
    online stream.
    """

    def __init__(self, d: float, capacity: int = 64):
        self.d = float(d)
        self.n = 0
        self.last_positive = 0
        self._grow(max(capacity, 8))

    def _grow(self, cap: int) -> None:
        B = np.full((cap + 1, cap + 1), np.inf)
        P = np.zeros(cap + 1)
        S = np.zeros(cap + 1)
        if self.n:
            old = self.n
            B[: old + 1, : old + 1] = self._B[: old + 1, : old + 1]
            P[: old + 1] = self._P[: old + 1]
            S[: old + 1] = self._S[: old + 1]
        self._B, self._P, self._S = B, P, S
        self._cap = cap

    def push(self, p: float) -> None:
        if self.n + 1 > self._cap:
            self._grow(self._cap * 2)
        j = self.n = self.n + 1
        self._P[j] = self._P[j - 1] + p
        self._S[j] = self._S[j - 1] + j * p
        if p > 0.0:
            self.last_positive = j
        B = self._B
        B[j, j - 1] = 0.0
        m = np.arange(j)
        V = interval_delay(self._P, self._S, self.d, m + 1, j)
        B[1 : j + 1, j] = 1.0 + (B[1 : j + 1, :j] + V).min(axis=1)

    def entry(self, i: int, j: int) -> float:
        return float(self._B[i, j])

    def opt(self, i: int = 1) -> float:
        """Optimum of the window suffix [i..n]."""
        lp = self.last_positive
        if lp < i:
            return 0.0
        return float(self._B[i, lp])

    def opt_suffix_column(self) -> np.ndarray:
        """Vector of opt([i..n]) for i = 1..n."""
        n, lp = self.n, self.last_positive
        out = np.zeros(n)
        if lp:
            out[:lp] = self._B[1 : lp + 1, lp]
        return out


class RunningOpt:
    """Forward DP tracking opt of a growing window; O(window) per push."""

    def __init__(self, d: float, capacity: int = 64):
        self.d = float(d)
        self.n = 0
        self.last_positive = 0
        self._cost = np.zeros(max(capacity, 8) + 1)
        self._P = np.zeros(max(capacity, 8) + 1)
        self._S = np.zeros(max(capacity, 8) + 1)

    def push(self, p: float) -> None:
        if self.n + 1 >= len(self._cost):
            for name in ("_cost", "_P", "_S"):
                old = getattr(self, name)
                new = np.zeros(len(old) * 2)
                new[: len(old)] = old
                setattr(self, name, new)
        j = self.n = self.n + 1
        self._P[j] = self._P[j - 1] + p
        self._S[j] = self._S[j - 1] + j * p
        if p > 0.0:
            self.last_positive = j
        m = np.arange(j)
        V = interval_delay(self._P, self._S, self.d, m + 1, j)
        self._cost[j] = 1.0 + (self._cost[:j] + V).min()

    @property
    def value(self) -> float:
        if self.last_positive == 0:
            return 0.0
        return float(self._cost[self.last_positive])


class OptTable:
    """All-pairs subwindow optima: value(i, j) = opt of the window [i..j].

    Memory is O(T^2) doubles; the build is O(T^3) arithmetic done column by
    column with vectorized minima.  A horizon cap guards against accidental
    huge allocations.
    """

    def __init__(self, instance: Instance, max_horizon: int = TABLE_HORIZON_CAP):
        n = instance.horizon
        if n > max_horizon:
            raise ResourceError(f"opt table horizon {n} exceeds the cap {max_horizon}")
        self.instance = instance
        self.n = n
        table = AckAtTable(instance.d, capacity=n)
        lastpos = np.zeros(n + 1, dtype=np.int64)
        values = np.zeros((n + 1, n + 1))
        for j, p in enumerate(instance.demands, start=1):
            table.push(p)
            lastpos[j] = table.last_positive
            lp = table.last_positive
            if lp:
                values[1 : lp + 1, j] = table._B[1 : lp + 1, lp]
        self.values = values
        self._lastpos = lastpos

    def value(self, i: int, j: int) -> float:
        if not 1 <= i <= j <= self.n:
            raise ValueError(f"window [{i}, {j}] outside [1, {self.n}]")
        return float(self.values[i, j])


@lru_cache(maxsize=4)
def opt_table(instance: Instance, max_horizon: int = TABLE_HORIZON_CAP) -> OptTable:
    """Memoized all-pairs table for an instance."""
    return OptTable(instance, max_horizon=max_horizon)
