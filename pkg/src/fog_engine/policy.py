"""Turn budgeting and final move selection (purification)."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

MAX_SUPPORT = 3


@dataclass
class TurnBudget:
    total_ms: float
    expander_stop_ms: float
    solver_extra_ms: float

    def __post_init__(self):
        assert self.expander_stop_ms < self.total_ms


def budget_turn(clock_remaining_ms: float, increment_ms: float = 0.0,
                per_move_ms: Optional[float] = None,
                expander_share: float = 0.8) -> TurnBudget:
    """Heuristic time slice: never spend more than half the remaining clock."""
    if per_move_ms is not None:
        total = float(per_move_ms)
    else:
        total = min(clock_remaining_ms / 20.0 + 0.8 * increment_ms,
                    clock_remaining_ms * 0.5)
    stop = total * expander_share
    return TurnBudget(total, stop, total - stop)


def parse_time_control(text: str):
    """'M+S' (minutes + increment seconds) or 'Xs' / 'Xs/move' fixed per move.

    Returns (base_ms, increment_ms, per_move_ms).
    """
    text = text.strip()
    if text.endswith("/move"):
        text = text[:-5]
    if text.endswith("s") and "+" not in text:
        return 0.0, 0.0, float(text[:-1]) * 1000.0
    if "+" in text:
        base, inc = text.split("+")
        return float(base) * 60_000.0, float(inc) * 1000.0, None
    return float(text) * 60_000.0, 0.0, None


class StableActionTracker:
    """Marks actions continuously in the support since the half-time iteration."""

    def __init__(self, n_actions: int):
        self.n = n_actions
        self.active = False
        self._mask = [True] * n_actions

    def start(self):
        self.active = True

    def observe(self, strategy: Sequence[float]) -> None:
        if not self.active:
            return
        mask = self._mask
        for a in range(self.n):
            if strategy[a] <= 0.0:
                mask[a] = False

    def stable_indices(self):
        return {a for a in range(self.n) if self._mask[a]}


def select_move_index(strategy: Sequence[float], resolve_active: bool,
                      stable: set, rng: random.Random,
                      max_support: int = MAX_SUPPORT) -> int:
    """Purified action choice.

    Under Resolve the top action is played outright.  Otherwise play from the
    stable actions plus the top action, truncated to the `max_support` most
    likely, with all excluded mass shifted onto the top action.
    """
    if not strategy:
        raise ValueError("empty strategy")
    n = len(strategy)
    a_star = max(range(n), key=lambda a: (strategy[a], -a))
    if resolve_active:
        return a_star
    support = set(stable) | {a_star}
    ranked = sorted(support, key=lambda a: (-strategy[a], a))
    keep = set(ranked[:max_support])
    play = [0.0] * n
    shifted = 0.0
    for a in range(n):
        if a in keep:
            play[a] = strategy[a]
        else:
            shifted += strategy[a]
    play[a_star] += shifted
    total = sum(play)
    if total <= 0.0:
        return a_star
    u = rng.random() * total
    acc = 0.0
    for a in range(n):
        acc += play[a]
        if u < acc:
            return a
    return a_star


def played_distribution(strategy: Sequence[float], resolve_active: bool,
                        stable: set, max_support: int = MAX_SUPPORT) -> list:
    """The exact distribution select_move_index samples from (for tests/UI)."""
    n = len(strategy)
    a_star = max(range(n), key=lambda a: (strategy[a], -a))
    if resolve_active:
        out = [0.0] * n
        out[a_star] = 1.0
        return out
    support = set(stable) | {a_star}
    ranked = sorted(support, key=lambda a: (-strategy[a], a))
    keep = set(ranked[:max_support])
    play = [0.0] * n
    shifted = 0.0
    for a in range(n):
        if a in keep:
            play[a] = strategy[a]
        else:
            shifted += strategy[a]
    play[a_star] += shifted
    total = sum(play)
    if total > 0:
        play = [p / total for p in play]
    return play
