"""Shared builders for the test suite."""

from __future__ import annotations

import random

from simultrans.transitions import Action, DELAY, Vocab


def small_vocab(n_words: int = 6) -> Vocab:
    return Vocab.build([f"w{i}" for i in range(n_words)])


def random_pair(rng: random.Random, vocab: Vocab, max_len: int = 10):
    """A random (x, y) id pair; y ends with eos like real corpora do."""
    wids = [i for i in vocab.word_ids() if i != vocab.eos_id]
    n = rng.randint(1, max_len)
    m = rng.randint(1, max_len)
    x = [rng.choice(wids) for _ in range(n)]
    y = [rng.choice(wids) for _ in range(m - 1)] + [vocab.eos_id]
    return x, y


def words(*ids: int) -> tuple[Action, ...]:
    return tuple(Action.word(i) for i in ids)


def D() -> Action:
    return DELAY
