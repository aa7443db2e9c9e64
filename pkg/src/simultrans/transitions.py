"""Action vocabulary, prefix-pair states, and the read/write transition system.

A policy over a sentence pair is a sequence of actions drawn from the target
vocabulary extended with a delay token.  Emitting the delay token consumes one
source word; emitting any other token appends it to the target prefix.  All
higher-level machinery (oracles, training losses, decoders) is expressed in
terms of the types and transitions defined here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

DELAY_TOKEN = "<eps>"
EOS_TOKEN = "</s>"


class TransitionError(ValueError):
    """An action that cannot be applied in the current state."""


class SourceExhaustedError(TransitionError):
    """Delay requested but every source word has already been read."""


class EpisodeFinishedError(TransitionError):
    """Any action requested after the end-of-sequence token was emitted."""


class InvalidPathError(TransitionError):
    """A replayed action sequence hit an inapplicable action.

    Carries the offset of the offending action so callers can report it.
    """

    def __init__(self, index: int, cause: TransitionError):
        super().__init__(f"action {index} inapplicable: {cause}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class Vocab:
    """Token inventory shared by source and target sides.

    ``tokens`` is the dense id space; it contains the delay token and the
    end-of-sequence marker exactly once each.  Word actions may use any id
    except ``delay_id``.
    """

    tokens: tuple[str, ...]
    delay_id: int
    eos_id: int

    def __post_init__(self):
        n = len(self.tokens)
        if not (0 <= self.delay_id < n and 0 <= self.eos_id < n):
            raise ValueError("delay/eos ids out of range")
        if self.delay_id == self.eos_id:
            raise ValueError("delay and eos must be distinct tokens")
        if self.tokens.count(self.tokens[self.delay_id]) != 1:
            raise ValueError("delay token must occur exactly once")
        if self.tokens.count(self.tokens[self.eos_id]) != 1:
            raise ValueError("eos token must occur exactly once")
        if len(set(self.tokens)) != n:
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def build(cls, words: Iterable[str]) -> "Vocab":
        """Vocabulary with the two specials first, then the given words."""
        toks = [DELAY_TOKEN, EOS_TOKEN]
        for w in words:
            if w in (DELAY_TOKEN, EOS_TOKEN):
                raise ValueError(f"reserved token: {w}")
            toks.append(w)
        return cls(tokens=tuple(toks), delay_id=0, eos_id=1)

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self.tokens.index(token)
        except ValueError:
            raise KeyError(f"unknown token: {token!r}") from None

    def word_ids(self) -> list[int]:
        """All ids usable as word actions (everything except the delay id)."""
        return [i for i in range(len(self.tokens)) if i != self.delay_id]

    def to_json(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "delay_id": self.delay_id,
            "eos_id": self.eos_id,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Vocab":
        return cls(
            tokens=tuple(obj["tokens"]),
            delay_id=int(obj["delay_id"]),
            eos_id=int(obj["eos_id"]),
        )


@dataclass(frozen=True)
class Action:
    """Either the delay token (``word_id is None``) or a target word."""

    word_id: Optional[int] = None

    @property
    def is_delay(self) -> bool:
        return self.word_id is None

    @classmethod
    def delay(cls) -> "Action":
        return DELAY

    @classmethod
    def word(cls, word_id: int) -> "Action":
        return cls(word_id=int(word_id))

    def __repr__(self) -> str:
        return "Delay" if self.is_delay else f"Word({self.word_id})"


DELAY = Action()

ActionSequence = tuple[Action, ...]


@dataclass(frozen=True)
class PrefixState:
    """A cell in the prefix grid plus the bookkeeping the scorer depends on.

    ``src_len`` counts consumed source words, ``tgt`` is the emitted target
    prefix (delay tokens excluded), ``delay_count`` counts delay actions taken
    so far.  Starting from the empty state every read is one delay action, so
    ``delay_count == src_len`` along any replayed path.
    """

    src_len: int = 0
    tgt: tuple[int, ...] = ()
    delay_count: int = 0
    last_action: Optional[Action] = None

    @property
    def tgt_len(self) -> int:
        return len(self.tgt)

    def eos_emitted(self, vocab: Vocab) -> bool:
        return bool(self.tgt) and self.tgt[-1] == vocab.eos_id


EMPTY_STATE = PrefixState()


def apply_action(
    state: PrefixState, action: Action, x: Sequence[int], vocab: Vocab
) -> PrefixState:
    """Apply one action to a prefix-pair state over source ``x``.

    Delay consumes the next source word; any other action appends the word to
    the target prefix.  Raises :class:`SourceExhaustedError` when a delay is
    requested with the source fully read, and :class:`EpisodeFinishedError`
    for any action once eos has been emitted.
    """
    if state.eos_emitted(vocab):
        raise EpisodeFinishedError("episode ended: eos already emitted")
    if action.is_delay:
        if state.src_len >= len(x):
            raise SourceExhaustedError(
                f"cannot read past source of length {len(x)}"
            )
        return PrefixState(
            src_len=state.src_len + 1,
            tgt=state.tgt,
            delay_count=state.delay_count + 1,
            last_action=action,
        )
    wid = action.word_id
    if not (0 <= wid < len(vocab)) or wid == vocab.delay_id:
        raise TransitionError(f"invalid word id {wid}")
    return PrefixState(
        src_len=state.src_len,
        tgt=state.tgt + (wid,),
        delay_count=state.delay_count,
        last_action=action,
    )


def applicable_actions(
    state: PrefixState, x: Sequence[int], vocab: Vocab
) -> set[Action]:
    """Actions applicable in ``state``: empty once eos is out, otherwise all
    words plus (if source remains) the delay action."""
    if state.eos_emitted(vocab):
        return set()
    acts = {Action.word(i) for i in vocab.word_ids()}
    if state.src_len < len(x):
        acts.add(DELAY)
    return acts


def replay(
    actions: Sequence[Action], x: Sequence[int], vocab: Vocab
) -> PrefixState:
    """Fold :func:`apply_action` over ``actions`` from the empty state."""
    state = EMPTY_STATE
    for i, a in enumerate(actions):
        try:
            state = apply_action(state, a, x, vocab)
        except TransitionError as e:
            raise InvalidPathError(i, e) from e
    return state


def replay_states(
    actions: Sequence[Action], x: Sequence[int], vocab: Vocab
) -> list[PrefixState]:
    """All intermediate states: entry ``i`` is the state before action ``i``;
    the final entry is the end state.  Length ``len(actions) + 1``."""
    states = [EMPTY_STATE]
    for i, a in enumerate(actions):
        try:
            states.append(apply_action(states[-1], a, x, vocab))
        except TransitionError as e:
            raise InvalidPathError(i, e) from e
    return states


def actions_to_text(actions: Sequence[Action], vocab: Vocab) -> str:
    """Serialize to one text line: space-separated surface tokens, the delay
    action rendered as ``<eps>``."""
    return " ".join(
        DELAY_TOKEN if a.is_delay else vocab.tokens[a.word_id] for a in actions
    )


def text_to_actions(line: str, vocab: Vocab) -> ActionSequence:
    """Inverse of :func:`actions_to_text`."""
    out = []
    for tok in line.split():
        if tok == DELAY_TOKEN:
            out.append(DELAY)
        else:
            wid = vocab.id_of(tok)
            if wid == vocab.delay_id:
                out.append(DELAY)
            else:
                out.append(Action.word(wid))
    return tuple(out)
