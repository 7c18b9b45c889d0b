"""Prediction-error measures.

The headline measure compares the pointwise-max (overpredicted) and
pointwise-min (underpredicted) mixtures of the actual and predicted streams:
for a time window, the window error is opt(over) - opt(under); the full error
is the maximum, over all partitions of the horizon whose every interval holds
at least one underpredicted demand, of the summed per-interval window errors.
Computed exactly by dynamic programming over cut points.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import product

import numpy as np

from dap.core import Instance, ResourceError, combine, pad_pair, subinstance
from dap.offline import AckAtTable, OptTable, optimal_value

#: default: recompute the online tracker every step up to this horizon, every 10 steps beyond
ONLINE_EXACT_HORIZON = 300


@dataclass(frozen=True)
class MixedPair:
    """Pointwise max/min of an actual stream and its prediction, on the padded horizon."""

    over: Instance
    under: Instance

    @property
    def horizon(self) -> int:
        return self.over.horizon


def mixed_pair(instance: Instance, predicted: Instance) -> MixedPair:
    a, b = pad_pair(instance, predicted)
    return MixedPair(combine(a, b, "max"), combine(a, b, "min"))


@dataclass(frozen=True)
class ErrorReport:
    """Error value plus the maximizing partition and its per-interval contributions."""

    eta: float
    partition: tuple[tuple[int, int], ...]
    per_interval_tau: tuple[float, ...]


def window_error(instance: Instance, predicted: Instance, t1: int, t2: int) -> float:
    """opt(over) - opt(under) restricted to the window [t1, t2] of the padded horizon."""
    pair = mixed_pair(instance, predicted)
    return optimal_value(subinstance(pair.over, t1, t2)) - optimal_value(subinstance(pair.under, t1, t2))


def prediction_error(instance: Instance, predicted: Instance) -> ErrorReport:
    """Exact error via the cut-point DP; also reports the maximizing partition.

    When the underpredicted mixture holds no demand at all there is no valid
    partition; the error then falls back to the single whole-horizon window
    (which degenerates to opt(over)).
    """
    pair = mixed_pair(instance, predicted)
    n = pair.horizon
    if pair.under.last_positive == 0:
        v = optimal_value(pair.over)
        return ErrorReport(v, ((1, n),), (v,))
    tbl_over = OptTable(pair.over)
    tbl_under = OptTable(pair.under)
    upos = np.asarray(pair.under.demands) > 0.0
    lastpos_u = np.zeros(n + 1, dtype=np.int64)
    for j in range(1, n + 1):
        lastpos_u[j] = j if upos[j - 1] else lastpos_u[j - 1]
    best = np.full(n + 1, -np.inf)
    best[0] = 0.0
    back = np.zeros(n + 1, dtype=np.int64)
    for j in range(1, n + 1):
        lim = int(lastpos_u[j])
        if lim == 0:
            continue
        tau_col = tbl_over.values[1 : lim + 1, j] - tbl_under.values[1 : lim + 1, j]
        cand = best[:lim] + tau_col
        k = int(np.argmax(cand))
        best[j] = cand[k]
        back[j] = k
    intervals: list[tuple[int, int]] = []
    j = n
    while j > 0:
        i = int(back[j])
        intervals.append((i + 1, j))
        j = i
    intervals.reverse()
    taus = tuple(
        float(tbl_over.values[a, b] - tbl_under.values[a, b]) for a, b in intervals
    )
    total = 0.0
    for tau in taus:
        total += tau
    return ErrorReport(total, tuple(intervals), taus)


def comparison_metrics(instance: Instance, predicted: Instance) -> dict[str, float]:
    """Diagnostic alternatives: |opt(I) - opt(P)| and the pointwise l1 distance."""
    a, b = pad_pair(instance, predicted)
    absolute = abs(optimal_value(a) - optimal_value(b))
    l1 = float(sum(abs(x - y) for x, y in zip(a.demands, b.demands)))
    return {"absolute": absolute, "l1": l1}


class OnlineErrorTracker:
    """Error of the hybrid stream (revealed prefix + predicted suffix) against the prediction.

    The value is non-decreasing in time, which lets a recomputation cadence
    coarser than every step only postpone, never miss, a threshold crossing.
    Single-owner mutable state; not meant to be shared across threads.
    """

    def __init__(self, predicted: Instance, recompute_every: int | None = None):
        self.predicted = predicted
        self.recompute_every = recompute_every
        self._revealed: list[float] = []
        self._value = 0.0

    @property
    def value(self) -> float:
        return self._value

    def _cadence(self) -> int:
        if self.recompute_every is not None:
            return self.recompute_every
        n = max(self.predicted.horizon, len(self._revealed))
        return 1 if n <= ONLINE_EXACT_HORIZON else 10

    def _hybrid(self) -> Instance:
        t = len(self._revealed)
        demands = tuple(self._revealed) + self.predicted.demands[t:]
        return Instance(self.predicted.d, demands)

    def exact(self) -> float:
        new = prediction_error(self._hybrid(), self.predicted).eta
        assert new >= self._value - 1e-9, "online error must be non-decreasing"
        self._value = max(self._value, new)
        return self._value

    def step(self, p: float) -> float:
        self._revealed.append(p)
        if len(self._revealed) % self._cadence() == 0:
            return self.exact()
        return self._value


class WindowedErrorTracker:
    """Incremental error of the revealed window: actual vs predicted, clipped to [1..t].

    Used by the online robustness wrapper, which needs the error of the current
    segment after every step; the over/under opt columns are maintained by
    rolling DP so each push costs one vectorized table update.
    """

    def __init__(self, d: float):
        self._over = AckAtTable(d)
        self._under = AckAtTable(d)
        self._best = np.zeros(1)
        self.value = 0.0

    @property
    def size(self) -> int:
        return self._over.n

    def push(self, p: float, p_hat: float) -> float:
        self._over.push(max(p, p_hat))
        self._under.push(min(p, p_hat))
        j = self._over.n
        if j + 1 > len(self._best):
            grown = np.full(len(self._best) * 2, -np.inf)
            grown[: len(self._best)] = self._best
            self._best = grown
        lim = self._under.last_positive
        if lim == 0:
            self._best[j] = -np.inf
            self.value = self._over.opt(1)
            return self.value
        tau_col = self._over.opt_suffix_column()[:lim] - self._under.opt_suffix_column()[:lim]
        self._best[j] = (self._best[:lim] + tau_col).max()
        self.value = float(self._best[j])
        return self.value


def empirical_error(predicted: Instance, samples: list[Instance]) -> float:
    """Mean prediction error of a fixed prediction over sample streams."""
    if not samples:
        raise ValueError("need at least one sample")
    for s in samples:
        if s.d != predicted.d:
            raise ValueError("samples must share the prediction's delay factor")
    return sum(prediction_error(s, predicted).eta for s in samples) / len(samples)


GRID_SEARCH_HORIZON_CAP = 8
GRID_SEARCH_CANDIDATE_CAP = 500_000


def best_grid_prediction(
    samples: list[Instance],
    grid_step: float,
    max_demand: float | None = None,
    horizon_cap: int = GRID_SEARCH_HORIZON_CAP,
) -> tuple[Instance, float]:
    """Exhaustive empirical-error minimizer over the demand grid {0, step, 2*step, ...}.

    Tiny scale only: every candidate instance on the grid is scored, and ties
    go to the lexicographically smallest demand vector.
    """
    if not samples:
        raise ValueError("need at least one sample")
    d = samples[0].d
    if any(s.d != d for s in samples):
        raise ValueError("samples must share one delay factor")
    horizon = max(s.horizon for s in samples)
    if horizon > horizon_cap:
        raise ResourceError(f"grid search is capped at horizon {horizon_cap}")
    if grid_step <= 0:
        raise ValueError("grid step must be positive")
    cap = max_demand if max_demand is not None else max(max(s.demands) for s in samples)
    n_levels = int(np.ceil(cap / grid_step - 1e-12)) + 1
    levels = [i * grid_step for i in range(n_levels)]
    if len(levels) ** horizon > GRID_SEARCH_CANDIDATE_CAP:
        raise ResourceError(
            f"{len(levels)}^{horizon} grid candidates exceed the cap {GRID_SEARCH_CANDIDATE_CAP}"
        )
    weighted = Counter(samples)
    total = sum(weighted.values())
    best: tuple[float, tuple[float, ...]] | None = None
    for demands in product(levels, repeat=horizon):
        candidate = Instance(d, demands)
        score = (
            sum(w * prediction_error(s, candidate).eta for s, w in weighted.items()) / total
        )
        if best is None or score < best[0] - 1e-12:
            best = (score, demands)
    return Instance(d, best[1]), best[0]
