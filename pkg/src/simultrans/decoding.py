"""Latency-constrained greedy decoding with delay-token temperature.

The adaptive decoder reads one source word, then repeatedly scores actions,
multiplies the delay score by ``e^t`` (under softmax scoring the shift ``t``
is applied to the delay logit before normalization), and takes the argmax —
except that crossing the aggressive bound forces a read and crossing the
conservative bound (or exhausting the source) forces the best non-delay
word.  Emitted words are never revised; emitting eos ends the episode even
with unread source words.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import ScoreVector, ScorerModel, empty_memory, encode, score_actions
from .oracle import Gamma, _lag_ge, _lag_le
from .transitions import (
    DELAY,
    Action,
    ActionSequence,
    Vocab,
    actions_to_text,
    text_to_actions,
)


@dataclass(frozen=True)
class DecodeConfig:
    alpha: int = 1
    beta: int = 5
    gamma: Gamma = 1.0
    temperature: float = 0.0
    max_len: int = 64

    def __post_init__(self):
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.alpha >= self.beta:
            raise ValueError("alpha must be strictly below beta")


@dataclass(frozen=True)
class DecodeTrace:
    """One decode: the raw action sequence plus metric-ready columns.

    ``words`` and ``g`` exclude the terminal eos; ``g[j]`` is the number of
    source words consumed when word ``j`` was emitted.  ``truncated`` marks
    traces stopped by the length cap before eos.
    """

    actions: ActionSequence
    words: tuple[int, ...]
    g: tuple[int, ...]
    truncated: bool


def adjusted_scores(sv: ScoreVector, temperature: float, delay_id: int) -> np.ndarray:
    """The comparison vector actually used for greedy selection.

    Sigmoid scores are positive, so a multiplicative ``e^t`` on the delay
    entry shifts the delay/word comparison monotonically in ``t``.  Under
    softmax the temperature moves the delay logit before renormalizing.
    """
    if sv.mode == "sigmoid":
        adj = np.array(sv.values, dtype=np.float64)
        adj[delay_id] *= math.exp(temperature)
        return adj
    logits = np.array(sv.logits, dtype=np.float64)
    logits[delay_id] += temperature
    e = np.exp(logits - logits.max())
    return e / e.sum()


def choose_action(
    sv: ScoreVector,
    lag: Gamma,
    cfg: DecodeConfig,
    source_left: bool,
    vocab: Vocab,
) -> Action:
    """Band-constrained greedy action choice; ties go to the lowest id."""
    if source_left and _lag_le(lag, cfg.alpha):
        return DELAY
    if not source_left or _lag_ge(lag, cfg.beta):
        return Action.word(_best_word(sv.values, vocab))
    adj = adjusted_scores(sv, cfg.temperature, vocab.delay_id)
    best = int(np.argmax(adj))
    return DELAY if best == vocab.delay_id else Action.word(best)


def _best_word(values: np.ndarray, vocab: Vocab) -> int:
    masked = np.array(values, dtype=np.float64)
    masked[vocab.delay_id] = -np.inf
    return int(np.argmax(masked))


class _PrefixEncoder:
    """Re-encodes the source prefix from scratch at each length, memoized."""

    def __init__(self, model: ScorerModel, x: Sequence[int]):
        self.model = model
        self.x = list(x)
        self._cache: dict[int, np.ndarray] = {}

    def memory(self, src_len: int) -> np.ndarray:
        if src_len == 0:
            return empty_memory(self.model)
        if src_len not in self._cache:
            self._cache[src_len] = encode(self.x[:src_len], self.model)
        return self._cache[src_len]


def adaptive_decode(
    model: ScorerModel, x: Sequence[int], cfg: DecodeConfig
) -> DecodeTrace:
    """Greedy adaptive decoding under the latency band."""
    if len(x) == 0:
        raise ValueError("cannot decode an empty source")
    vocab = model.vocab
    enc = _PrefixEncoder(model, x)
    history: list[Action] = [DELAY]
    src_len = 1
    words: list[int] = []
    g: list[int] = []
    n_word_actions = 0
    truncated = False
    while True:
        if n_word_actions >= cfg.max_len:
            truncated = True
            break
        sv = score_actions(enc.memory(src_len), history, model)
        lag = src_len - cfg.gamma * n_word_actions
        a = choose_action(sv, lag, cfg, src_len < len(x), vocab)
        history.append(a)
        if a.is_delay:
            src_len += 1
            continue
        n_word_actions += 1
        if a.word_id == vocab.eos_id:
            break
        words.append(a.word_id)
        g.append(src_len)
    return DecodeTrace(
        actions=tuple(history), words=tuple(words), g=tuple(g), truncated=truncated
    )


def waitk_decode(
    model: ScorerModel, x: Sequence[int], k: int, max_len: int = 64
) -> DecodeTrace:
    """Fixed wait-k schedule: read k words, then alternate write/read.

    Writes emit the argmax non-delay word (the delay score is ignored), so
    ``g[j] = min(k + j - 1, len(x))``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(x) == 0:
        raise ValueError("cannot decode an empty source")
    vocab = model.vocab
    enc = _PrefixEncoder(model, x)
    src_len = min(k, len(x))
    history: list[Action] = [DELAY] * src_len
    words: list[int] = []
    g: list[int] = []
    truncated = False
    n_word_actions = 0
    while True:
        if n_word_actions >= max_len:
            truncated = True
            break
        sv = score_actions(enc.memory(src_len), history, model)
        wid = _best_word(sv.values, vocab)
        a = Action.word(wid)
        history.append(a)
        n_word_actions += 1
        if wid == vocab.eos_id:
            break
        words.append(wid)
        g.append(src_len)
        if src_len < len(x):
            history.append(DELAY)
            src_len += 1
    return DecodeTrace(
        actions=tuple(history), words=tuple(words), g=tuple(g), truncated=truncated
    )


def full_sentence_decode(
    model: ScorerModel, x: Sequence[int], max_len: int = 64
) -> DecodeTrace:
    """Read everything, then write greedily: wait-k with k = len(x)."""
    return waitk_decode(model, x, k=max(len(x), 1), max_len=max_len)


def band_violations(
    actions: Sequence[Action], x_len: int, cfg: DecodeConfig
) -> list[tuple[int, str]]:
    """Forcing-rule violations found by replaying a trace's actions.

    A word emitted with source remaining at lag <= alpha, or a read taken at
    lag >= beta, is a violation.  An empty list certifies band soundness.
    """
    bad = []
    src_len = 0
    tgt_len = 0
    for i, a in enumerate(actions):
        lag = src_len - cfg.gamma * tgt_len
        if a.is_delay:
            if _lag_ge(lag, cfg.beta):
                bad.append((i, "read-at-or-above-beta"))
            src_len += 1
        else:
            if src_len < x_len and _lag_le(lag, cfg.alpha):
                bad.append((i, "write-at-or-below-alpha"))
            tgt_len += 1
    return bad


def trace_from_actions(
    actions: Sequence[Action], vocab: Vocab, truncated: Optional[bool] = None
) -> DecodeTrace:
    """Rebuild the metric columns of a trace from its action sequence."""
    words: list[int] = []
    g: list[int] = []
    src_len = 0
    for a in actions:
        if a.is_delay:
            src_len += 1
        elif a.word_id != vocab.eos_id:
            words.append(a.word_id)
            g.append(src_len)
    if truncated is None:
        truncated = not (actions and not actions[-1].is_delay
                         and actions[-1].word_id == vocab.eos_id)
    return DecodeTrace(
        actions=tuple(actions), words=tuple(words), g=tuple(g), truncated=truncated
    )


def trace_to_line(trace: DecodeTrace, vocab: Vocab) -> str:
    """Wire format: emitted words, TAB, comma-separated g, TAB, raw actions."""
    words = " ".join(vocab.tokens[w] for w in trace.words)
    gcol = ",".join(str(v) for v in trace.g)
    return f"{words}\t{gcol}\t{actions_to_text(trace.actions, vocab)}"


def trace_from_line(line: str, vocab: Vocab) -> DecodeTrace:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3:
        raise ValueError("trace line must have 3 tab-separated fields")
    actions = text_to_actions(parts[2], vocab)
    trace = trace_from_actions(actions, vocab)
    g = tuple(int(v) for v in parts[1].split(",")) if parts[1] else ()
    if g != trace.g:
        raise ValueError("g column inconsistent with the action sequence")
    return trace
