"""Increment-then-decrement games that bound buffered backlog.

The subtraction game runs on n non-negative variables, all zero at the
start. Each round an adversary adds deltas summing to at most 1, then one
largest variable loses 1 (floored at zero). No variable ever reaches the
harmonic number H(n-1); the zeroing variant resets a largest variable to
zero instead and keeps every variable below H(n-1) + 1 after any step.
Both bounds are sharp, and the adversary strategy that approaches them is
implemented here too.

Rounds accept ints, floats or fractions; the optional scale factor
multiplies both the delta budget and the subtraction amount, so integer
deltas with a power-of-two scale give exact arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction


def harmonic(k: int):
    """H_k = sum_{j=1..k} 1/j as an exact fraction."""
    if k < 1:
        raise ValueError("harmonic number needs k >= 1")
    return sum(Fraction(1, j) for j in range(1, k + 1))


def harmonic_float(k: int) -> float:
    if k < 1:
        raise ValueError("harmonic number needs k >= 1")
    return sum(1.0 / j for j in range(1, k + 1))


@dataclass
class GameState:
    n: int
    x: list = field(default_factory=list)
    rounds_played: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two variables")
        if not self.x:
            self.x = [0] * self.n
        if len(self.x) != self.n:
            raise ValueError("state length disagrees with n")

    @property
    def peak(self):
        return max(self.x)


def _check_deltas(state: GameState, deltas, scale) -> None:
    if len(deltas) != state.n:
        raise ValueError("need one delta per variable")
    total = 0
    for d in deltas:
        if d < 0:
            raise ValueError("deltas must be non-negative")
        total += d
    slack = 1e-12 * float(scale) if isinstance(total, float) else 0
    if total > scale + slack:
        raise ValueError(f"delta sum {total} exceeds budget {scale}")


def _apply_round(state: GameState, deltas, scale, zero: bool) -> GameState:
    _check_deltas(state, deltas, scale)
    x = state.x
    for i, d in enumerate(deltas):
        if d:
            x[i] = x[i] + d
    j = max(range(state.n), key=lambda i: (x[i], -i))  # ties: lowest index
    if zero:
        x[j] = 0
    else:
        x[j] = max(0, x[j] - scale)
    state.rounds_played += 1
    return state


def subtraction_round(state: GameState, deltas, scale=1) -> GameState:
    """One round: add deltas (sum <= scale), then a largest variable loses
    scale, floored at zero. Ties break to the lowest index."""
    return _apply_round(state, deltas, scale, zero=False)


def zeroing_round(state: GameState, deltas, scale=1) -> GameState:
    """One round: add deltas (sum <= scale), then a largest variable is
    reset to zero."""
    return _apply_round(state, deltas, scale, zero=True)


def tightness_adversary(n: int, warmup_rounds: int, exact: bool = True):
    """Play the strategy that drives the subtraction game toward its
    bound: warmup rounds level all but one variable at 1 - (1-1/n)^r,
    then distribution rounds hand 1/j to the top j variables for
    j = n-1, ..., 2. Returns the final maximum, which equals
    H(n-1) - (1-1/n)^warmup_rounds."""
    if n < 3:
        raise ValueError("adversary needs n >= 3")
    if warmup_rounds < 0:
        raise ValueError("warmup_rounds must be >= 0")
    one = Fraction(1) if exact else 1.0
    state = GameState(n, [one * 0 for _ in range(n)])
    inv_n = one / n
    eps_level = one * 0  # shared value of the n-1 plateau variables
    for _ in range(warmup_rounds):
        fill = (one - eps_level) * inv_n
        deltas = [fill] * n
        deltas[0] = eps_level + fill
        subtraction_round(state, deltas, scale=one)
        eps_level = eps_level + fill
    for j in range(n - 1, 1, -1):
        share = one / j
        top = sorted(range(n), key=lambda i: (-state.x[i], i))[:j]
        deltas = [one * 0] * n
        for i in top:
            deltas[i] = share
        subtraction_round(state, deltas, scale=one)
    return state.peak


def random_rounds(n: int, rounds: int, seed: int, mode: str = "sub",
                  scale: int = 1 << 10):
    """Adversary-free driver: random integer deltas at the given scale,
    one round at a time. Yields the state after every round (exact
    arithmetic throughout)."""
    import random as _random

    rng = _random.Random(seed)
    state = GameState(n, [0] * n)
    zero = mode == "zero"
    for _ in range(rounds):
        budget = rng.randrange(scale + 1)
        cuts = sorted(rng.randrange(budget + 1) for _ in range(n - 1))
        deltas = (
            [cuts[0]]
            + [b - a for a, b in zip(cuts, cuts[1:])]
            + [budget - cuts[-1]]
            if n > 1
            else [budget]
        )
        _apply_round(state, deltas, scale, zero)
        yield state
