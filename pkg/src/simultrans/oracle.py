"""Restricted dynamic oracle over a latency band, and baseline paths.

The oracle maps an in-progress prefix pair of a gold sentence pair to the set
of actions that still reach the gold pair while the lag
``d' = src_len - gamma * tgt_len`` stays inside the band ``(alpha, beta)``:
crossing ``alpha`` forces a read, crossing ``beta`` forces a write.  The two
extreme paths hug each bound; they are the only trajectories used in
training.  A brute-force path enumerator doubles as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from .transitions import (
    DELAY,
    Action,
    ActionSequence,
    EMPTY_STATE,
    PrefixState,
    Vocab,
    apply_action,
)

Gamma = Union[float, Fraction]

# Tolerance for band comparisons when gamma is a float.  With a Fraction
# gamma the comparisons are exact.
LAG_EPS = 1e-9


class OracleDomainError(ValueError):
    """Oracle queried on a completed translation or a non-prefix state."""


@dataclass(frozen=True)
class OracleConfig:
    """Band bounds and length ratio defining the dynamic oracle."""

    alpha: int
    beta: int
    gamma: Gamma = 1.0

    def __post_init__(self):
        if self.alpha >= self.beta:
            raise ValueError("alpha must be strictly below beta")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


def effective_lag(state: PrefixState, cfg: OracleConfig) -> Gamma:
    """Length-ratio-corrected lag ``src_len - gamma * tgt_len``.

    Exact (a Fraction) when ``cfg.gamma`` is a Fraction, float otherwise.
    """
    return state.src_len - cfg.gamma * state.tgt_len


def _lag_le(d: Gamma, bound: int) -> bool:
    if isinstance(d, Fraction):
        return d <= bound
    return d <= bound + LAG_EPS


def _lag_ge(d: Gamma, bound: int) -> bool:
    if isinstance(d, Fraction):
        return d >= bound
    return d >= bound - LAG_EPS


def _check_domain(
    state: PrefixState, x: Sequence[int], y: Sequence[int]
) -> None:
    if state.src_len > len(x):
        raise OracleDomainError("source prefix longer than source")
    if state.tgt != tuple(y[: state.tgt_len]):
        raise OracleDomainError("target prefix is not a prefix of the gold target")
    if state.tgt_len >= len(y):
        # y carries its terminal eos, so a complete target means the episode
        # is over no matter how much source remains unread.
        raise OracleDomainError("translation already complete")


def oracle_actions(
    state: PrefixState,
    x: Sequence[int],
    y: Sequence[int],
    cfg: OracleConfig,
) -> set[Action]:
    """Action set of the restricted dynamic oracle at ``state``.

    Forced read below/at ``alpha`` (while source remains), forced write of the
    next gold word at/above ``beta`` (while target remains); otherwise both,
    filtered down to the applicable subset.  Never empty on its domain.
    """
    _check_domain(state, x, y)
    d = effective_lag(state, cfg)
    src_left = state.src_len < len(x)
    next_word = Action.word(y[state.tgt_len])
    if src_left and _lag_le(d, cfg.alpha):
        return {DELAY}
    if _lag_ge(d, cfg.beta):
        return {next_word}
    acts = {next_word}
    if src_left:
        acts.add(DELAY)
    return acts


AGGRESSIVE = "aggressive"
CONSERVATIVE = "conservative"


def extreme_path(
    x: Sequence[int],
    y: Sequence[int],
    cfg: OracleConfig,
    side: str,
    vocab: Vocab,
) -> ActionSequence:
    """The oracle path hugging one band bound.

    ``aggressive`` writes whenever the oracle permits a write (tight against
    ``alpha``); ``conservative`` reads whenever the oracle permits a read
    (tight against ``beta``).  Forcing always wins; the preference only breaks
    two-action ties.
    """
    if side not in (AGGRESSIVE, CONSERVATIVE):
        raise ValueError(f"unknown side: {side}")
    if not x or not y:
        raise ValueError("extreme_path needs non-empty sequences")
    state = EMPTY_STATE
    path: list[Action] = []
    while state.tgt_len < len(y):
        acts = oracle_actions(state, x, y, cfg)
        if len(acts) == 1:
            (a,) = acts
        elif side == CONSERVATIVE:
            a = DELAY
        else:
            a = next(act for act in acts if not act.is_delay)
        path.append(a)
        state = apply_action(state, a, x, vocab)
    return tuple(path)


def waitk_path(
    x: Sequence[int], y: Sequence[int], k: int, vocab: Vocab
) -> ActionSequence:
    """The fixed wait-k schedule as an action sequence.

    Reads ``k`` source words (capped at the source length), then alternates
    write/read until the source is exhausted, then writes the rest.  With
    ``k >= len(x)`` this degenerates to the full-sentence path.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    state = EMPTY_STATE
    path: list[Action] = []
    for _ in range(min(k, len(x))):
        path.append(DELAY)
        state = apply_action(state, DELAY, x, vocab)
    while state.tgt_len < len(y):
        a = Action.word(y[state.tgt_len])
        path.append(a)
        state = apply_action(state, a, x, vocab)
        if state.tgt_len < len(y) and state.src_len < len(x):
            path.append(DELAY)
            state = apply_action(state, DELAY, x, vocab)
    return tuple(path)


@dataclass
class PathEnumeration:
    """Exhaustive oracle-path listing; ``truncated`` marks a hit limit."""

    paths: list[ActionSequence]
    truncated: bool = False


def enumerate_oracle_paths(
    x: Sequence[int],
    y: Sequence[int],
    cfg: OracleConfig,
    limit: int | None = None,
) -> PathEnumeration:
    """Depth-first enumeration of every sequence obtainable by always picking
    from :func:`oracle_actions`.  Exponential in general; use on small pairs
    or pass ``limit``.
    """
    paths: list[ActionSequence] = []
    truncated = False
    n, m = len(x), len(y)

    # (src_len, tgt_len) suffices as state: the target prefix is pinned to y.
    def visit(src_len: int, tgt_len: int, prefix: list[Action]) -> bool:
        nonlocal truncated
        if tgt_len == m:
            if limit is not None and len(paths) >= limit:
                truncated = True
                return False
            paths.append(tuple(prefix))
            return True
        state = PrefixState(
            src_len=src_len,
            tgt=tuple(y[:tgt_len]),
            delay_count=src_len,
            last_action=prefix[-1] if prefix else None,
        )
        acts = oracle_actions(state, x, y, cfg)
        # Deterministic order: delay branch first, then the word branch.
        ordered = sorted(acts, key=lambda a: (not a.is_delay))
        for a in ordered:
            prefix.append(a)
            if a.is_delay:
                ok = visit(src_len + 1, tgt_len, prefix)
            else:
                ok = visit(src_len, tgt_len + 1, prefix)
            prefix.pop()
            if not ok:
                return False
        return True

    visit(0, 0, [])
    return PathEnumeration(paths=paths, truncated=truncated)


def cumulative_lag(
    actions: Sequence[Action], cfg: OracleConfig
) -> Gamma:
    """Sum of the lag ``d'`` over every state a path visits (including the
    start state).  Aggressive paths minimize this; conservative maximize."""
    total: Gamma = 0
    src_len = 0
    tgt_len = 0
    for a in actions:
        total += src_len - cfg.gamma * tgt_len
        if a.is_delay:
            src_len += 1
        else:
            tgt_len += 1
    return total + (src_len - cfg.gamma * tgt_len)


def parse_gamma(text: str) -> Gamma:
    """Parse a gamma value: ``"9/8"`` becomes an exact Fraction, anything
    else a float."""
    if "/" in text:
        return Fraction(text)
    return float(text)


def format_gamma(gamma: Gamma) -> str:
    if isinstance(gamma, Fraction):
        return f"{gamma.numerator}/{gamma.denominator}"
    return repr(float(gamma))
