"""Latency metrics (AL, AP, CW) over decode traces and corpus BLEU.

All latency metrics are pure functions of the per-word read counts ``g`` and
the source length; the end-of-sequence token is stripped before any counting.
"""

from __future__ import annotations

import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence


@dataclass
class LatencyReport:
    """Corpus-level latency summary (means over sentences)."""

    al: float
    ap: float
    cw: float
    n_sentences: int
    n_unreached: int = 0  # traces whose reads never reached the full source
    n_zero_read: int = 0  # traces with no reads at all (CW undefined)


@dataclass
class BleuReport:
    """Corpus BLEU with raw n-gram precisions and brevity penalty.

    ``bleu`` uses add-one smoothing on the order-2..4 precisions (desk-scale
    sentences make raw 4-gram counts frequently zero); ``precisions`` are the
    unsmoothed ratios.
    """

    bleu: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_length: int = 0
    ref_length: int = 0


def average_lagging(g: Sequence[int], src_len: int) -> float:
    """Mean lag behind an ideal simultaneous writer.

    ``AL = (1/tau) * sum_{j<=tau} (g[j] - (j-1)/r)`` with ``r`` the
    target/source length ratio and ``tau`` the first index whose read count
    covers the whole source (falls back to the last word when no index does,
    e.g. for truncated traces).
    """
    if not g:
        raise ValueError("average_lagging needs at least one emitted word")
    if src_len < 1:
        raise ValueError("source must be non-empty")
    tau = next((j for j, gj in enumerate(g, start=1) if gj >= src_len), len(g))
    r = len(g) / src_len
    return sum(g[j - 1] - (j - 1) / r for j in range(1, tau + 1)) / tau


def average_proportion(g: Sequence[int], src_len: int) -> float:
    """Normalized area under the read-count curve, in (0, 1]."""
    if not g:
        raise ValueError("average_proportion needs at least one emitted word")
    return sum(g) / (src_len * len(g))


def consecutive_wait(g: Sequence[int]) -> float:
    """Mean reads per read-containing gap between consecutive writes.

    The reads before the first write count as one gap; gaps with no reads are
    ignored.  Returns 0.0 for a zero-read trace (undefined; callers may flag).
    """
    if not g:
        raise ValueError("consecutive_wait needs at least one emitted word")
    gaps = [g[0]] + [b - a for a, b in zip(g, g[1:])]
    waits = [gap for gap in gaps if gap > 0]
    if not waits:
        return 0.0
    return sum(waits) / len(waits)


def corpus_latency(
    gs: Sequence[Sequence[int]], src_lens: Sequence[int]
) -> LatencyReport:
    """Sentence-mean AL/AP/CW over a decoded corpus."""
    if len(gs) != len(src_lens):
        raise ValueError("corpus size mismatch")
    als, aps, cws = [], [], []
    unreached = 0
    zero_read = 0
    for g, n in zip(gs, src_lens):
        if not g:
            continue
        if max(g) < n:
            unreached += 1
        cw = consecutive_wait(g)
        if cw == 0.0:
            zero_read += 1
        als.append(average_lagging(g, n))
        aps.append(average_proportion(g, n))
        cws.append(cw)
    if not als:
        raise ValueError("no scorable sentences in corpus")
    k = len(als)
    return LatencyReport(
        al=sum(als) / k,
        ap=sum(aps) / k,
        cw=sum(cws) / k,
        n_sentences=k,
        n_unreached=unreached,
        n_zero_read=zero_read,
    )


def _ngrams(seq: Sequence, n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def corpus_bleu(
    hypotheses: Sequence[Sequence], references: Sequence[Sequence]
) -> BleuReport:
    """Standard 4-gram corpus BLEU against a single reference per sentence.

    Matched/total counts accumulate over the corpus; the score applies
    add-one smoothing to orders 2..4 and the usual brevity penalty.  Scores
    100.0 exactly iff the corpora are identical.
    """
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis/reference corpus size mismatch")
    if not hypotheses:
        raise ValueError("empty corpus")
    matches = [0] * 4
    totals = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = list(hyp)
        ref = list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, 5):
            hg = _ngrams(hyp, n)
            rg = _ngrams(ref, n)
            totals[n - 1] += sum(hg.values())
            matches[n - 1] += sum((hg & rg).values())
    raw = tuple(
        (matches[i] / totals[i]) if totals[i] > 0 else 0.0 for i in range(4)
    )
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / max(hyp_len, 1))
    if totals[0] == 0 or matches[0] == 0:
        return BleuReport(0.0, raw, bp, hyp_len, ref_len)
    log_sum = math.log(raw[0])
    for i in range(1, 4):
        smoothed = (matches[i] + 1) / (totals[i] + 1)
        log_sum += math.log(smoothed)
    bleu = 100.0 * bp * math.exp(log_sum / 4)
    return BleuReport(bleu, raw, bp, hyp_len, ref_len)


@dataclass
class SweepRow:
    t: float
    al: float
    ap: float
    cw: float
    bleu: float


SWEEP_HEADER = "t,AL,AP,CW,BLEU"


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    """Render sweep rows as CSV with 4 decimal places, locale-independent."""
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(
            f"{r.t:.4f},{r.al:.4f},{r.ap:.4f},{r.cw:.4f},{r.bleu:.4f}"
        )
    return "\n".join(lines) + "\n"


def sweep_from_csv(text: str) -> list[SweepRow]:
    reader = io.StringIO(text)
    header = reader.readline().strip()
    if header != SWEEP_HEADER:
        raise ValueError(f"unexpected CSV header: {header!r}")
    rows = []
    for line in reader:
        line = line.strip()
        if not line:
            continue
        t, al, ap, cw, bleu = (float(v) for v in line.split(","))
        rows.append(SweepRow(t=t, al=al, ap=ap, cw=cw, bleu=bleu))
    return rows


def sweep(model, corpus, temps, decode_cfg, max_len: int | None = None):
    """Decode an evaluation corpus once per temperature and tabulate metrics.

    Returns one :class:`SweepRow` per temperature, sorted by temperature.
    Imported lazily from :mod:`simultrans.decoding` callers; lives here so the
    metric aggregation stays in one place.
    """
    from dataclasses import replace

    from .decoding import adaptive_decode

    eos = corpus.vocab.eos_id
    rows = []
    for t in sorted(temps):
        cfg = replace(decode_cfg, temperature=float(t))
        if max_len is not None:
            cfg = replace(cfg, max_len=max_len)
        gs, srcs, hyps, refs = [], [], [], []
        for x, y in corpus.pairs:
            trace = adaptive_decode(model, x, cfg)
            if not trace.words:
                continue
            gs.append(trace.g)
            srcs.append(len(x))
            hyps.append(list(trace.words))
            refs.append([w for w in y if w != eos])
        lat = corpus_latency(gs, srcs)
        bleu = corpus_bleu(hyps, refs)
        rows.append(
            SweepRow(t=float(t), al=lat.al, ap=lat.ap, cw=lat.cw, bleu=bleu.bleu)
        )
    return rows
