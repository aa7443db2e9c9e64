"""Deterministic generators for desk-scale parallel corpora, plus file I/O.

Three tasks exercise the adaptive/fixed-lag trade-off:

* ``copy``     — target repeats the source; minimal lag suffices.
* ``reorder``  — the last source token (the payload) must be emitted at
  target position 2, so low-lag fixed policies are forced to guess it.
* ``ratio``    — target length is ``round(|x| / gamma)`` via deterministic
  monotone resampling, for length-ratio (catchup) experiments.

Corpora are pure functions of their spec: sentence ``i`` is generated from a
seed derived from ``(spec.seed, i)``, so generation order and parallelism
never matter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .transitions import Vocab

TASKS = ("copy", "reorder", "ratio")

REORDER_MARKER = "<m>"

# Bucket layout of the index-hash split, out of 10.
_TEST_BUCKET = 0
_DEV_BUCKET = 1


@dataclass(frozen=True)
class CorpusSpec:
    task: str
    vocab_size: int = 12
    n_sentences: int = 200
    min_len: int = 4
    max_len: int = 10
    seed: int = 0
    ratio: float = 1.0  # target gamma for the ratio task

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.vocab_size < 8:
            raise ValueError("vocab_size must be >= 8")
        if self.min_len < 2 or self.max_len < self.min_len:
            raise ValueError("need 2 <= min_len <= max_len")
        if self.task == "reorder" and self.min_len < 3:
            raise ValueError("reorder sentences need length >= 3")
        if self.task == "ratio" and self.ratio <= 0:
            raise ValueError("ratio must be positive")


@dataclass
class ParallelCorpus:
    pairs: list[tuple[tuple[int, ...], tuple[int, ...]]]
    vocab: Vocab

    def __len__(self) -> int:
        return len(self.pairs)


def _sentence_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _copy_vocab(spec: CorpusSpec) -> Vocab:
    return Vocab.build([f"t{i:02d}" for i in range(spec.vocab_size)])


def gen_copy(spec: CorpusSpec) -> ParallelCorpus:
    """Identity transduction: target = source plus eos."""
    if spec.task != "copy":
        raise ValueError("spec.task must be 'copy'")
    vocab = _copy_vocab(spec)
    wids = [vocab.id_of(f"t{i:02d}") for i in range(spec.vocab_size)]
    pairs = []
    for i in range(spec.n_sentences):
        rng = _sentence_rng(spec.seed, i)
        n = int(rng.integers(spec.min_len, spec.max_len + 1))
        src = tuple(int(wids[j]) for j in rng.integers(0, len(wids), size=n))
        pairs.append((src, src + (vocab.eos_id,)))
    return ParallelCorpus(pairs=pairs, vocab=vocab)


def reorder_vocab(spec: CorpusSpec) -> tuple[Vocab, list[int], list[int]]:
    """Vocabulary for the reorder task: marker, payload alphabet, prefix words.

    Returns (vocab, payload ids, prefix-word ids).  A quarter of the word
    budget (at least 4 tokens) is reserved for payloads so that guessing the
    payload from too-short a prefix stays near chance level.
    """
    n_payload = max(4, spec.vocab_size // 4)
    n_prefix = spec.vocab_size - n_payload
    words = [REORDER_MARKER]
    words += [f"p{i:02d}" for i in range(n_payload)]
    words += [f"t{i:02d}" for i in range(n_prefix)]
    vocab = Vocab.build(words)
    payload_ids = [vocab.id_of(f"p{i:02d}") for i in range(n_payload)]
    prefix_ids = [vocab.id_of(f"t{i:02d}") for i in range(n_prefix)]
    return vocab, payload_ids, prefix_ids


def gen_reorder(spec: CorpusSpec) -> ParallelCorpus:
    """Tail-to-front movement: source ``w1 .. wk <m> p`` becomes target
    ``w1 p w2 .. wk </s>``.  Emitting target position 2 correctly requires
    having read the final source token."""
    if spec.task != "reorder":
        raise ValueError("spec.task must be 'reorder'")
    vocab, payload_ids, prefix_ids = reorder_vocab(spec)
    marker = vocab.id_of(REORDER_MARKER)
    pairs = []
    for i in range(spec.n_sentences):
        rng = _sentence_rng(spec.seed, i)
        n = int(rng.integers(spec.min_len, spec.max_len + 1))
        k = n - 2
        prefix = [int(prefix_ids[j]) for j in rng.integers(0, len(prefix_ids), size=k)]
        payload = int(payload_ids[int(rng.integers(0, len(payload_ids)))])
        src = tuple(prefix) + (marker, payload)
        tgt = (prefix[0], payload, *prefix[1:], vocab.eos_id)
        pairs.append((src, tgt))
    return ParallelCorpus(pairs=pairs, vocab=vocab)


def gen_ratio(spec: CorpusSpec) -> ParallelCorpus:
    """Monotone resampling to hit a target source/target length ratio.

    Target word ``j`` copies source position ``ceil(j * n / m) - 1``; tokens
    merge when the target is shorter and duplicate when it is longer."""
    if spec.task != "ratio":
        raise ValueError("spec.task must be 'ratio'")
    vocab = _copy_vocab(spec)
    wids = [vocab.id_of(f"t{i:02d}") for i in range(spec.vocab_size)]
    pairs = []
    for i in range(spec.n_sentences):
        rng = _sentence_rng(spec.seed, i)
        n = int(rng.integers(spec.min_len, spec.max_len + 1))
        src = tuple(int(wids[j]) for j in rng.integers(0, len(wids), size=n))
        m = max(1, round(n / spec.ratio))
        tgt = tuple(src[-(-j * n // m) - 1] for j in range(1, m + 1))
        pairs.append((src, tgt + (vocab.eos_id,)))
    return ParallelCorpus(pairs=pairs, vocab=vocab)


def generate(spec: CorpusSpec) -> ParallelCorpus:
    return {"copy": gen_copy, "reorder": gen_reorder, "ratio": gen_ratio}[
        spec.task
    ](spec)


def measured_gamma(corpus: ParallelCorpus) -> Fraction:
    """Mean source/target length ratio over the corpus, eos excluded; exact."""
    if not corpus.pairs:
        raise ValueError("empty corpus")
    eos = corpus.vocab.eos_id
    total = Fraction(0)
    for x, y in corpus.pairs:
        m = sum(1 for w in y if w != eos)
        total += Fraction(len(x), m)
    return total / len(corpus.pairs)


def _bucket(index: int) -> int:
    # Knuth multiplicative hash on the sentence index.
    return ((index * 2654435761) & 0xFFFFFFFF) % 10


def split_corpus(
    corpus: ParallelCorpus,
) -> tuple[ParallelCorpus, ParallelCorpus, ParallelCorpus]:
    """Disjoint train/dev/test split, hash-partitioned by sentence index."""
    train, dev, test = [], [], []
    for i, pair in enumerate(corpus.pairs):
        b = _bucket(i)
        if b == _TEST_BUCKET:
            test.append(pair)
        elif b == _DEV_BUCKET:
            dev.append(pair)
        else:
            train.append(pair)
    v = corpus.vocab
    return (
        ParallelCorpus(train, v),
        ParallelCorpus(dev, v),
        ParallelCorpus(test, v),
    )


def write_corpus(corpus: ParallelCorpus, prefix: str | Path) -> None:
    """Write ``<prefix>.src`` / ``<prefix>.tgt``: one sentence per line,
    whitespace-tokenized surface strings, the target's terminal eos omitted
    (re-appended on read)."""
    prefix = Path(prefix)
    toks = corpus.vocab.tokens
    eos = corpus.vocab.eos_id
    with open(prefix.with_suffix(".src"), "w", encoding="utf-8") as fs, open(
        prefix.with_suffix(".tgt"), "w", encoding="utf-8"
    ) as ft:
        for x, y in corpus.pairs:
            fs.write(" ".join(toks[i] for i in x) + "\n")
            body = [toks[i] for i in y if i != eos]
            ft.write(" ".join(body) + "\n")


def read_corpus(prefix: str | Path, vocab: Vocab) -> ParallelCorpus:
    prefix = Path(prefix)
    with open(prefix.with_suffix(".src"), encoding="utf-8") as fs:
        srcs = [line.split() for line in fs]
    with open(prefix.with_suffix(".tgt"), encoding="utf-8") as ft:
        tgts = [line.split() for line in ft]
    if len(srcs) != len(tgts):
        raise ValueError("parallel files have different line counts")
    pairs = []
    for s, t in zip(srcs, tgts):
        if not s or not t:
            raise ValueError("empty sentence in corpus file")
        x = tuple(vocab.id_of(w) for w in s)
        y = tuple(vocab.id_of(w) for w in t) + (vocab.eos_id,)
        pairs.append((x, y))
    return ParallelCorpus(pairs=pairs, vocab=vocab)


def write_vocab(vocab: Vocab, path: str | Path) -> None:
    Path(path).write_text(json.dumps(vocab.to_json(), indent=2) + "\n")


def read_vocab(path: str | Path) -> Vocab:
    return Vocab.from_json(json.loads(Path(path).read_text()))
