from fractions import Fraction

import pytest

from simultrans.data import (
    CorpusSpec,
    gen_copy,
    gen_ratio,
    gen_reorder,
    generate,
    measured_gamma,
    read_corpus,
    read_vocab,
    reorder_vocab,
    split_corpus,
    write_corpus,
    write_vocab,
)
from simultrans.oracle import OracleConfig, enumerate_oracle_paths
from simultrans.transitions import replay


class TestGenCopy:
    def setup_method(self):
        self.spec = CorpusSpec(task="copy", vocab_size=10, n_sentences=50, seed=7)

    def test_target_is_source_plus_eos(self):
        corpus = gen_copy(self.spec)
        for x, y in corpus.pairs:
            assert y == x + (corpus.vocab.eos_id,)

    def test_gamma_is_exactly_one(self):
        assert measured_gamma(gen_copy(self.spec)) == Fraction(1)

    def test_seed_reproducibility(self):
        assert gen_copy(self.spec).pairs == gen_copy(self.spec).pairs

    def test_lengths_in_range(self):
        corpus = gen_copy(self.spec)
        for x, _ in corpus.pairs:
            assert self.spec.min_len <= len(x) <= self.spec.max_len


class TestGenReorder:
    def setup_method(self):
        self.spec = CorpusSpec(
            task="reorder", vocab_size=12, n_sentences=60, min_len=4, max_len=8, seed=3
        )

    def test_payload_moves_to_position_two(self):
        corpus = gen_reorder(self.spec)
        vocab, payload_ids, _ = reorder_vocab(self.spec)
        marker = vocab.id_of("<m>")
        for x, y in corpus.pairs:
            assert x[-2] == marker
            assert x[-1] in payload_ids
            # target: first prefix word, payload, rest of prefix, eos
            assert y[0] == x[0]
            assert y[1] == x[-1]
            assert y[2:-1] == x[1:-2]
            assert y[-1] == vocab.eos_id

    def test_rule_on_fixed_example(self):
        # source (w1 w2 w3 M p) -> target (w1 p w2 w3 </s>)
        corpus = gen_reorder(self.spec)
        x, y = next(p for p in corpus.pairs if len(p[0]) == 5)
        assert y == (x[0], x[4], x[1], x[2], corpus.vocab.eos_id)

    def test_wide_band_admits_wait_for_payload(self):
        # An oracle path exists that emits position 2 only after the full read.
        corpus = gen_reorder(self.spec)
        x, y = corpus.pairs[0]
        cfg = OracleConfig(alpha=1, beta=len(x) + 1)
        enum = enumerate_oracle_paths(x, y, cfg, limit=50000)
        assert any(
            # the second word action comes after len(x) delays
            _payload_read_first(path, len(x))
            for path in enum.paths
        )

    def test_min_len_guard(self):
        with pytest.raises(ValueError):
            CorpusSpec(task="reorder", vocab_size=8, min_len=2, max_len=5)


def _payload_read_first(path, src_len):
    delays = 0
    writes = 0
    for a in path:
        if a.is_delay:
            delays += 1
        else:
            writes += 1
            if writes == 2:
                return delays == src_len
    return False


class TestGenRatio:
    def test_target_length_follows_ratio(self):
        spec = CorpusSpec(
            task="ratio", vocab_size=10, n_sentences=40, min_len=5, max_len=5,
            seed=1, ratio=1.25,
        )
        corpus = gen_ratio(spec)
        for x, y in corpus.pairs:
            assert len(x) == 5
            assert len(y) == 4 + 1  # round(5 / 1.25) words plus eos

    def test_corpus_gamma_near_target(self):
        spec = CorpusSpec(
            task="ratio", vocab_size=10, n_sentences=300, min_len=4, max_len=12,
            seed=2, ratio=1.3,
        )
        g = float(measured_gamma(gen_ratio(spec)))
        assert abs(g - 1.3) / 1.3 < 0.05

    def test_deterministic(self):
        spec = CorpusSpec(task="ratio", vocab_size=8, n_sentences=20, ratio=0.8)
        assert gen_ratio(spec).pairs == gen_ratio(spec).pairs

    def test_monotone_resampling_preserves_token_order(self):
        spec = CorpusSpec(
            task="ratio", vocab_size=10, n_sentences=30, min_len=6, max_len=9,
            seed=5, ratio=1.5,
        )
        for x, y in gen_ratio(spec).pairs:
            body = y[:-1]
            # each target token is a source token, positions non-decreasing
            positions = []
            start = 0
            for w in body:
                idx = x.index(w, start) if w in x[start:] else x.index(w)
                positions.append(idx)
                start = max(start, idx)
            assert positions == sorted(positions)


class TestSplits:
    def test_disjoint_and_covering(self):
        spec = CorpusSpec(task="copy", vocab_size=8, n_sentences=200, seed=0)
        corpus = gen_copy(spec)
        train, dev, test = split_corpus(corpus)
        assert len(train) + len(dev) + len(test) == len(corpus)
        assert len(dev) > 0 and len(test) > 0
        assert len(train) > len(dev) + len(test)


class TestFileFormat:
    def test_corpus_round_trip(self, tmp_path):
        spec = CorpusSpec(task="reorder", vocab_size=12, n_sentences=25, seed=9)
        corpus = generate(spec)
        write_corpus(corpus, tmp_path / "dev")
        back = read_corpus(tmp_path / "dev", corpus.vocab)
        assert back.pairs == corpus.pairs

    def test_vocab_round_trip(self, tmp_path):
        spec = CorpusSpec(task="copy", vocab_size=9, n_sentences=5)
        corpus = generate(spec)
        write_vocab(corpus.vocab, tmp_path / "vocab.json")
        assert read_vocab(tmp_path / "vocab.json") == corpus.vocab

    def test_replayable_pairs(self, tmp_path):
        # Generated pairs are consumable by the transition system.
        spec = CorpusSpec(task="copy", vocab_size=8, n_sentences=10, seed=4)
        corpus = generate(spec)
        x, y = corpus.pairs[0]
        from simultrans.oracle import extreme_path

        cfg = OracleConfig(alpha=1, beta=4)
        path = extreme_path(x, y, cfg, "aggressive", corpus.vocab)
        assert replay(path, x, corpus.vocab).tgt == y
