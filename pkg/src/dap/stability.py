"""Stable intervals, stability factor, and the stable-solution constructor.

An instance is a lambda-stable interval when, against the solution that acks
only once at the horizon end, no extra ack at any time would save more than
1 - lambda of delay.  The constructor upgrades an optimal solution so that
every induced subinstance is a lambda-stable interval, at a cost inflation of
at most 1/(1 - lambda).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dap.core import Instance, Solution
from dap.offline import optimal_solution


def final_ack_savings(instance: Instance) -> np.ndarray:
    """Delay saved by one extra ack at each t, against the single ack at the horizon end."""
    P, _ = instance._prefix
    T = instance.horizon
    t = np.arange(1, T + 1)
    return (T - t) * P[1:] / instance.d


def is_stable_interval(instance: Instance, lam: float) -> bool:
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lambda must be in [0, 1), got {lam}")
    return bool(final_ack_savings(instance).max() <= 1.0 - lam)


@dataclass(frozen=True)
class StabilityProfile:
    """factor = 1 - max saving; negative means even the 0-stable test fails."""

    factor: float
    worst_time: int
    delta_curve: tuple[float, ...]


def stability_profile(instance: Instance) -> StabilityProfile:
    curve = final_ack_savings(instance)
    worst = int(curve.argmax())
    return StabilityProfile(float(1.0 - curve[worst]), worst + 1, tuple(float(x) for x in curve))


def stabilize(instance: Instance, lam: float) -> Solution:
    """Insert acks into the optimal solution until every induced subinstance is lambda-stable.

    A single ascending scan suffices: the saving at a time t only shrinks when
    acks are added elsewhere, so earlier decisions stay valid.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must be in (0, 1), got {lam}")
    opt, _ = optimal_solution(instance)
    ackset = set(opt.acks)
    P, _ = instance._prefix
    d = instance.d
    threshold = 1.0 - lam
    acks = sorted(ackset)
    result: list[int] = []
    prev = 0
    next_idx = 0
    for t in range(1, instance.horizon + 1):
        if next_idx < len(acks) and acks[next_idx] == t:
            result.append(t)
            prev = t
            next_idx += 1
            continue
        if next_idx >= len(acks):
            break  # past the last ack; zero-demand tail saves nothing
        nxt = acks[next_idx]
        saving = (nxt - t) * float(P[t] - P[prev]) / d
        if saving > threshold:
            result.append(t)
            prev = t
    return Solution(tuple(result))
