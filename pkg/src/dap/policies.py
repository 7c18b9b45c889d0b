"""Online decision policies behind one step/finish contract.

A policy sees the prediction and its parameters up front, then one step at a
time: step(t, arrivals) -> ack or wait.  When the stream ends, finish() may
return forced final ack times so every positive demand ends up covered.  All
policies here are deterministic; distinct runs never share state.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from dap.core import CostBreakdown, Instance, Solution, evaluate, subinstance
from dap.error import WindowedErrorTracker
from dap.offline import RunningOpt, optimal_solution, optimal_value
from dap.stability import is_stable_interval, stabilize


@dataclass(frozen=True)
class Decision:
    ack: bool
    reason: str = ""


WAIT = Decision(False)


@dataclass(frozen=True)
class PolicyRun:
    solution: Solution
    cost: CostBreakdown
    switch_events: tuple[tuple[int, str], ...]
    trace: tuple[tuple[int, float, str, str], ...] = ()


def run_policy(instance: Instance, policy, collect_trace: bool = False) -> PolicyRun:
    """Drive a policy over a stream one step at a time and price the result."""
    acks: list[int] = []
    rows: list[tuple[int, float, str, str]] = []
    for t, p in enumerate(instance.demands, start=1):
        decision = policy.step(t, p)
        if decision.ack:
            acks.append(t)
        if collect_trace:
            rows.append((t, p, "ack" if decision.ack else "wait", decision.reason))
    for t in policy.finish():
        if not acks or t > acks[-1]:
            acks.append(t)
            if collect_trace:
                rows.append((t, 0.0, "ack", "final"))
    solution = Solution(tuple(acks))
    return PolicyRun(solution, evaluate(instance, solution), tuple(policy.events), tuple(rows))


class _GreedyCore:
    """Threshold rule: ack once the outstanding requests' accumulated delay reaches 1.

    Arrivals at the current step accrue delay only from the next step on, so a
    demand acked at its arrival time costs nothing.
    """

    def __init__(self, d: float):
        self.d = d
        self.acc = 0.0
        self.waiting = 0.0

    def step(self, p: float) -> bool:
        self.acc += self.waiting / self.d
        if self.acc >= 1.0:
            self.acc = 0.0
            self.waiting = 0.0
            return True
        self.waiting += p
        return False


class _PolicyBase:
    def __init__(self):
        self.events: list[tuple[int, str]] = []
        self.last_pos = 0
        self.covered_to = 0

    def _note_arrival(self, t: int, p: float) -> None:
        if p > 0.0:
            self.last_pos = t

    def finish(self) -> list[int]:
        if self.last_pos > self.covered_to:
            return [self.last_pos]
        return []


class GreedyPolicy(_PolicyBase):
    """The classic prediction-free rule; 2-competitive up to discrete-time slack."""

    def __init__(self, d: float):
        super().__init__()
        self._core = _GreedyCore(d)

    def step(self, t: int, p: float) -> Decision:
        self._note_arrival(t, p)
        if self._core.step(p):
            self.covered_to = t
            return Decision(True, "delay_threshold")
        return WAIT


class BlindPolicy(_PolicyBase):
    """Apply the prediction's optimal ack times to the actual stream, no adaptation."""

    def __init__(self, predicted: Instance):
        super().__init__()
        self.predicted = predicted
        self._plan = frozenset(optimal_solution(predicted)[0].acks)

    def step(self, t: int, p: float) -> Decision:
        self._note_arrival(t, p)
        if t in self._plan:
            self.covered_to = t
            return Decision(True, "predicted_ack")
        return WAIT


class PrimalDualPolicy(_PolicyBase):
    """Two-rate counter baseline steered by an advice solution.

    Each outstanding demand unit adds counter mass per step of waiting: at the
    fast rate 1/(1-e^-beta) per unit delay cost once the advice solution has
    already acked its arrival time, at the slow rate e^-beta/(1-e^-beta)
    before that.  An ack fires when the total mass reaches 1.  Smaller beta
    leans on the advice harder; beta = 1 is the most conservative setting.
    """

    def __init__(self, predicted: Instance, beta: float):
        super().__init__()
        if not 0.0 < beta <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {beta}")
        self.predicted = predicted
        self.beta = beta
        self.d = predicted.d
        denom = 1.0 - math.exp(-beta)
        self._fast_rate = 1.0 / denom
        self._slow_rate = math.exp(-beta) / denom
        self._advice = optimal_solution(predicted)[0].acks
        self._mass = 0.0
        self._fast_vol = 0.0
        self._slow_vol = 0.0
        self._pending: list[tuple[int, float]] = []  # (advice cover time, volume), cover times non-decreasing
        self._head = 0

    def _cover_time(self, t: int) -> int:
        i = bisect.bisect_left(self._advice, t)
        if i < len(self._advice):
            return self._advice[i]
        return 10**18  # advice never acks this arrival

    def step(self, t: int, p: float) -> Decision:
        self._note_arrival(t, p)
        while self._head < len(self._pending) and self._pending[self._head][0] <= t:
            self._fast_vol += self._pending[self._head][1]
            self._slow_vol -= self._pending[self._head][1]
            self._head += 1
        self._mass += (self._fast_vol * self._fast_rate + self._slow_vol * self._slow_rate) / self.d
        if self._mass >= 1.0:
            self._mass = 0.0
            self._fast_vol = 0.0
            self._slow_vol = 0.0
            self._pending.clear()
            self._head = 0
            self.covered_to = t
            return Decision(True, "counter_full")
        if p > 0.0:
            cover = self._cover_time(t)
            if cover <= t:
                self._fast_vol += p
            else:
                self._slow_vol += p
                self._pending.append((cover, p))
        return WAIT


class _BudgetPhase:
    """Budget-limited prediction-trusting phase.

    Acks whenever the stretch since the previous ack, extended by one phantom
    zero-demand step, stops being a stable interval; ends (with an
    unconditional final ack) at the first step whose ack-now cost reaches the
    budget.
    """

    def __init__(self, d: float, budget: float):
        self.d = d
        self.budget = budget
        self.acks = 0
        self.locked = 0.0  # delay already fixed by past acks
        self.acc = 0.0  # delay of outstanding requests if acked now
        self.waiting = 0.0
        self._cum = np.zeros(16)  # cumulative volume of the window since the last ack
        self._k = 0

    def _window_push(self, p: float) -> None:
        if self._k >= len(self._cum):
            grown = np.zeros(len(self._cum) * 2)
            grown[: self._k] = self._cum[: self._k]
            self._cum = grown
        self._cum[self._k] = (self._cum[self._k - 1] if self._k else 0.0) + p
        self._k += 1

    def _window_unstable(self) -> bool:
        k = self._k
        # saving of an extra ack at window position s, against a single ack at
        # the phantom end k+1: (k+1-s)/d * volume(1..s); unstable iff any > 1
        pos = np.arange(1, k + 1)
        savings = (k + 1 - pos) * self._cum[:k] / self.d
        return bool(savings.max() > 1.0)

    def step(self, p: float) -> tuple[bool, bool]:
        """Feed one step; returns (acked, phase_ended)."""
        self.acc += self.waiting / self.d
        if self.acks + 1 + self.locked + self.acc >= self.budget:
            self._ack()
            return True, True
        self._window_push(p)
        if self._window_unstable():
            self._k = 0
            self._ack()
            return True, False
        self.waiting += p
        return False, False

    def _ack(self) -> None:
        self.acks += 1
        self.locked += self.acc
        self.acc = 0.0
        self.waiting = 0.0


class BudgetPolicy(_PolicyBase):
    """Two-phase policy: trust the prediction within a budget, then fall back.

    Phase 1 spends at most (1 + lam) times the predicted optimum, acking only
    when the actual stream since the last ack turns unstable; on budget
    exhaustion it acks and hands the remainder to the greedy rule.  With
    phase1_only set, the policy instead goes quiet after phase 1 and records
    its termination time (used by the adaptive composition).
    """

    def __init__(self, predicted: Instance, lam: float, phase1_only: bool = False):
        super().__init__()
        if not 0.0 < lam < 1.0:
            raise ValueError(f"lambda must be in (0, 1), got {lam}")
        self.predicted = predicted
        self.lam = lam
        self.d = predicted.d
        self.budget = (1.0 + lam) * optimal_value(predicted)
        self.phase1_only = phase1_only
        self.terminated_at: int | None = None
        self._phase = _BudgetPhase(self.d, self.budget)
        self._greedy: _GreedyCore | None = None

    def step(self, t: int, p: float) -> Decision:
        self._note_arrival(t, p)
        if self._greedy is not None:
            if self._greedy.step(p):
                self.covered_to = t
                return Decision(True, "greedy")
            return WAIT
        if self.terminated_at is not None:
            return WAIT
        acked, ended = self._phase.step(p)
        if ended:
            self.events.append((t, "budget_exhausted"))
            self.terminated_at = t
            if not self.phase1_only:
                self._greedy = _GreedyCore(self.d)
        if acked:
            self.covered_to = t
            return Decision(True, "budget_exhausted" if ended else "unstable_window")
        return WAIT


def run_phase1_only(instance: Instance, predicted: Instance, lam: float) -> tuple[tuple[int, ...], int | None]:
    """Budget phase 1 alone on a full stream: (ack times, termination time or None)."""
    policy = BudgetPolicy(predicted, lam, phase1_only=True)
    acks = []
    for t, p in enumerate(instance.demands, start=1):
        if policy.step(t, p).ack:
            acks.append(t)
    return tuple(acks), policy.terminated_at


class AdaptiveBudgetPolicy(_PolicyBase):
    """Budget policy iterated over the blocks of a stabilized prediction solution.

    The prediction is pre-split by its lambda-stable near-optimal solution.
    Each block runs the budget phase against the block's own predicted budget
    and closes at the block's anchor (the next ack of the stable solution),
    acking there when requests are outstanding; a budget breach before the
    anchor hands the rest of the block to the greedy rule instead.  Once the
    remaining prediction suffix is itself a stable interval, one final
    two-phase budget policy runs to the end, and any stream beyond the
    prediction is served greedily.
    """

    def __init__(self, predicted: Instance, lam: float):
        super().__init__()
        if not 0.0 < lam < 1.0:
            raise ValueError(f"lambda must be in (0, 1), got {lam}")
        self.predicted = predicted
        self.lam = lam
        self.d = predicted.d
        self.stable_acks = stabilize(predicted, lam).acks
        self.t_prime = 0
        self._mode = ""
        self._phase: _BudgetPhase | None = None
        self._greedy: _GreedyCore | None = None
        self._anchor: int | None = None
        self._begin_block()

    def _suffix_stable(self, a: int) -> bool:
        if a > self.predicted.horizon:
            return True
        return is_stable_interval(subinstance(self.predicted, a, self.predicted.horizon), self.lam)

    def _begin_block(self) -> None:
        tp = self.t_prime
        horizon = self.predicted.horizon
        if tp < horizon and not self._suffix_stable(tp + 1):
            i = bisect.bisect_right(self.stable_acks, tp)
            assert i < len(self.stable_acks), "unstable suffix implies a later stable-solution ack"
            self._anchor = self.stable_acks[i]
            budget = (1.0 + self.lam) * optimal_value(subinstance(self.predicted, tp + 1, self._anchor))
            self._phase = _BudgetPhase(self.d, budget)
            self._mode = "block"
        elif tp < self.predicted.last_positive:
            budget = (1.0 + self.lam) * optimal_value(subinstance(self.predicted, tp + 1, horizon))
            self._anchor = None
            self._phase = _BudgetPhase(self.d, budget)
            self._mode = "final"
        else:
            # no predicted demand remains: the predicted phases are exhausted
            # and the rest of the stream is served greedily
            self._anchor = None
            self._greedy = _GreedyCore(self.d)
            self._mode = "tail"

    def step(self, t: int, p: float) -> Decision:
        self._note_arrival(t, p)
        if self._mode == "block":
            acked, ended = self._phase.step(p)
            reason = "budget_exhausted" if ended else "unstable_window"
            if ended:
                self.events.append((t, "budget_exhausted"))
                if t < self._anchor:
                    self._greedy = _GreedyCore(self.d)
                    self._mode = "block_greedy"
                else:
                    self.t_prime = t
                    self._begin_block()
            elif t == self._anchor:
                # the block's prediction window is exhausted: close it here,
                # acking when requests are still outstanding
                if not acked and self._phase.waiting > 0.0:
                    acked = True
                    reason = "block_close"
                    self.events.append((t, "block_close_ack"))
                self.t_prime = self._anchor
                self._begin_block()
            if acked:
                self.covered_to = t
                return Decision(True, reason)
            return WAIT
        if self._mode == "block_greedy":
            acked = self._greedy.step(p)
            reason = "greedy"
            if t == self._anchor:
                if not acked and self._greedy.waiting > 0.0:
                    acked = True
                    reason = "block_close"
                    self.events.append((t, "block_close_ack"))
                self.t_prime = self._anchor
                self._begin_block()
            if acked:
                self.covered_to = t
                return Decision(True, reason)
            return WAIT
        if self._mode == "final":
            acked, ended = self._phase.step(p)
            if ended:
                self.events.append((t, "budget_exhausted"))
                self._greedy = _GreedyCore(self.d)
                self._mode = "tail"
            if acked:
                self.covered_to = t
                return Decision(True, "budget_exhausted" if ended else "unstable_window")
            return WAIT
        # tail
        if self._greedy.step(p):
            self.covered_to = t
            return Decision(True, "greedy")
        return WAIT


def error_switch_threshold(lam: float) -> float:
    """Error level at which the robust wrapper stops trusting the prediction."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must be in (0, 1), got {lam}")
    return 1.0 / ((1.0 + lam) / (1.0 - lam) + 2.0 + 4.0 / lam)


class RobustPolicy(_PolicyBase):
    """Segmented wrapper adding a worst-case guarantee on top of the adaptive policy.

    The stream is cut online into segments whose own optimum stays below
    1/lambda (the cut lands at the step that would push it over).  Within a
    segment the adaptive policy runs while the segment's measured prediction
    error stays below the switch threshold; past the threshold the segment
    remainder is served greedily, with the outstanding backlog carried into
    the greedy accumulator.  The backlog accumulators persist across segment
    cuts, so requests left uncovered at a boundary stay on the fallback
    rule's clock and force an ack once their accumulated delay warrants one.
    """

    def __init__(self, predicted: Instance, lam: float):
        super().__init__()
        if not 0.0 < lam < 1.0:
            raise ValueError(f"lambda must be in (0, 1), got {lam}")
        self.predicted = predicted
        self.lam = lam
        self.d = predicted.d
        self.threshold = error_switch_threshold(lam)
        self.opt_cap = 1.0 / lam
        # outstanding requests of the current segment (delay if acked now, volume)
        self.acc = 0.0
        self.vol = 0.0
        # backlog orphaned by earlier segment cuts; the current inner policy
        # does not know about it, so it keeps its own greedy clock
        self.orphan_acc = 0.0
        self.orphan_vol = 0.0
        self._inner_events_seen = 0
        self._fresh_segment(1)

    def _pred_suffix(self, start: int) -> Instance:
        horizon = self.predicted.horizon
        if start <= horizon:
            return subinstance(self.predicted, start, horizon)
        return Instance(self.d, (0.0,))

    def _phat(self, t: int) -> float:
        return self.predicted.demands[t - 1] if t <= self.predicted.horizon else 0.0

    def _fresh_segment(self, start: int) -> None:
        self.seg_start = start
        self._runopt = RunningOpt(self.d)
        self._tracker = WindowedErrorTracker(self.d)
        self._inner = AdaptiveBudgetPolicy(self._pred_suffix(start), self.lam)
        self._inner_events_seen = 0
        self._trusting = True

    def _forward_inner_events(self, t: int) -> None:
        new = self._inner.events[self._inner_events_seen :]
        self._inner_events_seen = len(self._inner.events)
        self.events.extend((t, f"inner:{reason}") for _, reason in new)

    def step(self, t: int, p: float) -> Decision:
        self._note_arrival(t, p)
        self.acc += self.vol / self.d
        self.orphan_acc += self.orphan_vol / self.d
        self._runopt.push(p)
        if self._runopt.value > self.opt_cap:
            # the revealed step would push the segment optimum over the cap:
            # the segment is closed behind it and everything restarts here;
            # whatever it left uncovered becomes orphaned backlog
            self.events.append((t, "segment_cut"))
            self.orphan_acc += self.acc
            self.orphan_vol += self.vol
            self.acc = 0.0
            self.vol = 0.0
            self._fresh_segment(t)
            self._runopt.push(p)
        self._tracker.push(p, self._phat(t))
        if self._trusting and self._tracker.value > self.threshold:
            self._trusting = False
            self.events.append((t, "error_threshold"))
        if self._trusting:
            local_t = t - self.seg_start + 1
            decision = self._inner.step(local_t, p)
            self._forward_inner_events(t)
            if not decision.ack and self.orphan_acc >= 1.0:
                # orphaned backlog has waited a full greedy threshold
                decision = Decision(True, "carried_backlog")
        elif self.orphan_acc + self.acc >= 1.0:
            decision = Decision(True, "greedy")
        else:
            decision = WAIT
        if decision.ack:
            self.acc = 0.0
            self.vol = 0.0
            self.orphan_acc = 0.0
            self.orphan_vol = 0.0
            self.covered_to = t
        else:
            self.vol += p
        return decision
