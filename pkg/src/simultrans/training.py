"""Imitation-learning losses over oracle paths and the optimization loop.

Training is teacher-forced along fixed action sequences.  In adaptive mode
each sentence pair contributes its two extreme oracle paths, each step
supervised by the oracle's action set (the per-step objective is the mean
probability of the oracle actions).  In wait-k / full-sentence mode a single
schedule path is followed and each step is supervised by the action taken.

Scores are independent sigmoids by default, so the written loss applies no
downward pressure on non-oracle actions.  The optional ``negative_term``
flag (not part of the method; off by default) adds ``-log(1 - p)`` terms for
the delay token when it is not an oracle action and for the strongest
competitor of the gold next word.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import ParallelCorpus
from .model import (
    DecoderPlan,
    EncoderPlan,
    ModelConfig,
    ScorerModel,
    build_decoder_plan,
    decoder_backward,
    decoder_forward,
    empty_memory,
    encode,
    encoder_backward,
    encoder_forward,
    save_checkpoint,
    score_actions,
)
from .oracle import (
    AGGRESSIVE,
    CONSERVATIVE,
    Gamma,
    OracleConfig,
    extreme_path,
    oracle_actions,
    waitk_path,
)
from .transitions import Action, ActionSequence, Vocab, replay, replay_states

MODES = ("adaptive", "waitk", "full_sentence")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "adaptive"
    alpha: int = 1
    beta: int = 5
    gamma: Gamma = 1.0
    k: int = 1  # wait-k mode only
    lr: float = 5e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 8
    max_steps: int = 1000
    ckpt_every: int = 0  # 0: only the final checkpoint
    negative_term: bool = False
    log_floor: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mode == "waitk" and self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def oracle(self) -> OracleConfig:
        return OracleConfig(alpha=self.alpha, beta=self.beta, gamma=self.gamma)


@dataclass
class TrainStepReport:
    step: int
    loss: float
    grad_norm: float
    examples: int  # cumulative sentence pairs consumed
    wall_ms: float = 0.0
    floor_hits: int = 0


# ---------------------------------------------------------------------------
# path examples: precomputed teacher-forcing jobs for one action sequence


@dataclass
class PathExample:
    x: tuple[int, ...]
    y: tuple[int, ...]
    actions: ActionSequence
    weight: float
    # per-slot arrays for the longest history (BOS + all but the last action)
    tok: np.ndarray
    pos: np.ndarray
    is_delay: np.ndarray
    # per-step arrays, one entry per action in the path
    counts: np.ndarray  # clamped delay count of the history before step i
    src_lens: np.ndarray  # source words read before step i
    target_ids: np.ndarray  # flat oracle/path action ids
    target_off: np.ndarray  # offsets into target_ids, len == steps + 1
    gold_words: np.ndarray  # next gold word id per step (for negatives)


def _path_example(
    x, y, actions, targets, weight, vocab: Vocab, cfg: ModelConfig
) -> PathExample:
    n_steps = len(actions)
    tok = [len(vocab)]
    pos = [0]
    isd = [False]
    r = 1
    for a in actions[:-1]:
        if a.is_delay:
            tok.append(vocab.delay_id)
            isd.append(True)
        else:
            tok.append(a.word_id)
            isd.append(False)
        pos.append(min(r, cfg.max_positions - 1))
        if not a.is_delay:
            r += 1
    counts = np.zeros(n_steps, dtype=np.int64)
    src_lens = np.zeros(n_steps, dtype=np.int64)
    gold = np.zeros(n_steps, dtype=np.int64)
    c = 0
    s = 0
    t = 0
    flat: list[int] = []
    off = [0]
    for i, a in enumerate(actions):
        counts[i] = min(c, cfg.max_delay_count)
        src_lens[i] = s
        gold[i] = y[t]
        flat.extend(targets[i])
        off.append(len(flat))
        if a.is_delay:
            c += 1
            s += 1
        else:
            t += 1
    return PathExample(
        x=tuple(x),
        y=tuple(y),
        actions=tuple(actions),
        weight=weight,
        tok=np.asarray(tok, dtype=np.int64),
        pos=np.asarray(pos, dtype=np.int64),
        is_delay=np.asarray(isd, dtype=bool),
        counts=counts,
        src_lens=src_lens,
        target_ids=np.asarray(flat, dtype=np.int64),
        target_off=np.asarray(off, dtype=np.int64),
        gold_words=gold,
    )


def _action_id(a: Action, vocab: Vocab) -> int:
    return vocab.delay_id if a.is_delay else a.word_id


def oracle_target_sets(
    actions, x, y, cfg: OracleConfig, vocab: Vocab
) -> list[tuple[int, ...]]:
    """Sorted oracle action-id sets at every state along a path."""
    states = replay_states(actions, x, vocab)
    out = []
    for st in states[:-1]:
        acts = oracle_actions(st, x, y, cfg)
        out.append(tuple(sorted(_action_id(a, vocab) for a in acts)))
    return out


def pair_examples(
    x, y, mode: str, cfg: OracleConfig, k: int, vocab: Vocab, mcfg: ModelConfig
) -> list[PathExample]:
    """The teacher-forcing examples one sentence pair contributes."""
    if mode == "adaptive":
        out = []
        for side in (AGGRESSIVE, CONSERVATIVE):
            path = extreme_path(x, y, cfg, side, vocab)
            targets = oracle_target_sets(path, x, y, cfg, vocab)
            out.append(_path_example(x, y, path, targets, 0.5, vocab, mcfg))
        return out
    kk = k if mode == "waitk" else len(x)
    path = waitk_path(x, y, kk, vocab)
    targets = [(_action_id(a, vocab),) for a in path]
    return [_path_example(x, y, path, targets, 1.0, vocab, mcfg)]


# ---------------------------------------------------------------------------
# batched loss + gradients


def _assemble_batch(model: ScorerModel, examples: Sequence[PathExample]):
    """Encoder plan over every distinct source prefix, decoder plan with one
    job per teacher-forcing step."""
    vocab, cfg = model.vocab, model.cfg
    # one encoder row per (source sentence, prefix length)
    enc_prefixes: list[list[int]] = []
    enc_base: dict[tuple[int, ...], int] = {}
    for ex in examples:
        if ex.x not in enc_base:
            enc_base[ex.x] = len(enc_prefixes)
            for s in range(1, len(ex.x) + 1):
                enc_prefixes.append(list(ex.x[:s]))

    t_max = max(len(ex.tok) for ex in examples)
    tok_rows = np.zeros((len(examples), t_max), dtype=np.int64)
    pos_rows = np.zeros((len(examples), t_max), dtype=np.int64)
    isd_rows = np.zeros((len(examples), t_max), dtype=bool)
    steps = np.asarray([len(ex.actions) for ex in examples])
    for i, ex in enumerate(examples):
        tok_rows[i, : len(ex.tok)] = ex.tok
        pos_rows[i, : len(ex.pos)] = ex.pos
        isd_rows[i, : len(ex.is_delay)] = ex.is_delay

    rep = np.repeat(np.arange(len(examples)), steps)
    tok = tok_rows[rep]
    pos = pos_rows[rep]
    isd = isd_rows[rep]
    lens = np.concatenate([np.arange(1, s + 1) for s in steps])
    counts = np.concatenate([ex.counts for ex in examples])
    src_lens = np.concatenate([ex.src_lens for ex in examples])
    bases = np.asarray([enc_base[ex.x] for ex in examples], dtype=np.int64)
    mem_row = np.where(src_lens > 0, bases[rep] + src_lens - 1, -1)

    plan = DecoderPlan(
        tok=tok,
        pos=pos,
        lens=lens,
        counts=counts,
        is_delay=isd,
        mem_row=mem_row,
        mem_len=src_lens,
    )
    enc_plan = EncoderPlan.from_prefixes(enc_prefixes)

    n_targets = np.concatenate(
        [np.diff(ex.target_off) for ex in examples]
    ).astype(np.int64)
    tgt_ids = np.concatenate([ex.target_ids for ex in examples])
    tgt_job = np.repeat(np.arange(len(lens)), n_targets)
    weights = np.repeat(np.asarray([ex.weight for ex in examples]), steps)
    gold = np.concatenate([ex.gold_words for ex in examples])
    job_ex = rep  # job -> example index, for error reporting
    return enc_plan, plan, tgt_ids, tgt_job, n_targets, weights, gold, job_ex


def loss_and_gradients(
    model: ScorerModel,
    examples: Sequence[PathExample],
    negative_term: bool = False,
    log_floor: float = 1e-12,
    want_grads: bool = True,
):
    """Summed loss over path examples and exact gradients for the graph.

    Returns ``(loss, grads_or_None, stats)``; ``stats['floor_hits']`` counts
    steps whose mean oracle probability hit the log floor.
    """
    if not examples:
        raise ValueError("empty batch")
    (
        enc_plan,
        plan,
        tgt_ids,
        tgt_job,
        n_targets,
        weights,
        gold,
        job_ex,
    ) = _assemble_batch(model, examples)

    memory, enc_cache = encoder_forward(model, enc_plan, need_cache=want_grads)
    probs, logits, dec_cache = decoder_forward(
        model, plan, memory, need_cache=want_grads
    )

    j = len(plan.lens)
    sums = np.zeros(j, dtype=np.float64)
    np.add.at(sums, tgt_job, probs[tgt_job, tgt_ids].astype(np.float64))
    f = sums / n_targets
    floored = f < log_floor
    loss_terms = -np.log(np.maximum(f, log_floor)) * weights
    loss = float(loss_terms.sum())
    stats = {"floor_hits": int(floored.sum())}

    neg_delay = None
    comp = None
    p_delay = None
    p_comp = None
    if negative_term:
        delay_id = model.vocab.delay_id
        has_delay = np.zeros(j, dtype=bool)
        np.add.at(has_delay, tgt_job[tgt_ids == delay_id], True)
        neg_delay = ~has_delay
        masked = probs.copy()
        masked[:, delay_id] = -1.0
        masked[np.arange(j), gold] = -1.0
        comp = masked.argmax(1)
        p_delay = probs[:, delay_id].astype(np.float64)
        p_comp = probs[np.arange(j), comp].astype(np.float64)
        loss += float(
            (-np.log(np.maximum(1 - p_delay, log_floor)) * weights * neg_delay).sum()
        )
        loss += float((-np.log(np.maximum(1 - p_comp, log_floor)) * weights).sum())

    if not math.isfinite(loss):
        bad = int(job_ex[np.flatnonzero(~np.isfinite(loss_terms))[0]])
        ex = examples[bad]
        raise TrainingDiverged(
            f"non-finite loss on example {bad} (|x|={len(ex.x)}, |y|={len(ex.y)})"
        )
    if not want_grads:
        return loss, None, stats

    dprobs = np.zeros_like(probs)
    factor = np.where(floored, 0.0, -weights / (np.maximum(f, log_floor) * n_targets))
    np.add.at(dprobs, (tgt_job, tgt_ids), factor[tgt_job].astype(probs.dtype))
    if negative_term:
        d_neg = np.where(
            1 - p_delay < log_floor, 0.0, weights * neg_delay / np.maximum(1 - p_delay, log_floor)
        )
        dprobs[:, model.vocab.delay_id] += d_neg.astype(probs.dtype)
        d_comp = np.where(
            1 - p_comp < log_floor, 0.0, weights / np.maximum(1 - p_comp, log_floor)
        )
        np.add.at(dprobs, (np.arange(j), comp), d_comp.astype(probs.dtype))

    grads = model.zero_like()
    dmem_jobs = decoder_backward(model, dec_cache, dprobs, grads)
    dmem = np.zeros_like(memory)
    used = plan.mem_row >= 0
    np.add.at(dmem, plan.mem_row[used], dmem_jobs[used])
    encoder_backward(model, enc_cache, dmem, grads)
    return loss, grads, stats


# ---------------------------------------------------------------------------
# public loss surface


def oracle_step_probability(
    model: ScorerModel,
    a_prefix: Sequence[Action],
    x: Sequence[int],
    y: Sequence[int],
    cfg: OracleConfig,
) -> float:
    """Mean model probability of the oracle actions at the state reached by
    ``a_prefix`` (teacher forcing: the state comes from the fixed prefix)."""
    vocab = model.vocab
    state = replay(a_prefix, x, vocab)
    acts = oracle_actions(state, x, y, cfg)
    if not acts:
        raise RuntimeError("oracle returned an empty action set on its domain")
    memory = (
        encode(x[: state.src_len], model) if state.src_len else empty_memory(model)
    )
    scores = score_actions(memory, a_prefix, model)
    ids = [_action_id(a, vocab) for a in acts]
    return float(np.mean([scores.values[i] for i in ids]))


def path_loss(
    model: ScorerModel,
    actions: Sequence[Action],
    x: Sequence[int],
    y: Sequence[int],
    cfg: OracleConfig,
    log_floor: float = 1e-12,
) -> float:
    """Negative log mean-oracle-probability summed along one oracle path."""
    targets = oracle_target_sets(actions, x, y, cfg, model.vocab)
    ex = _path_example(x, y, tuple(actions), targets, 1.0, model.vocab, model.cfg)
    loss, _, _ = loss_and_gradients(
        model, [ex], log_floor=log_floor, want_grads=False
    )
    return loss


def two_path_loss(
    model: ScorerModel,
    x: Sequence[int],
    y: Sequence[int],
    cfg: OracleConfig,
    log_floor: float = 1e-12,
) -> float:
    """Mean of the two extreme-path losses: the training loss per pair."""
    a_agg = extreme_path(x, y, cfg, AGGRESSIVE, model.vocab)
    a_con = extreme_path(x, y, cfg, CONSERVATIVE, model.vocab)
    return 0.5 * (
        path_loss(model, a_agg, x, y, cfg, log_floor)
        + path_loss(model, a_con, x, y, cfg, log_floor)
    )


# ---------------------------------------------------------------------------
# optimizer + loop


class Adam:
    """Deterministic single-writer adaptive-moment optimizer."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p -= (self.lr / b1c) * m / (np.sqrt(v / b2c) + self.eps)


def grad_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g.astype(np.float64) ** 2))
    return math.sqrt(total)


def build_examples(
    corpus: ParallelCorpus, tcfg: TrainConfig, mcfg: ModelConfig
) -> list[list[PathExample]]:
    """Per-pair example groups (both extreme paths stay in the same batch so
    the two-path loss is unbiased at every step)."""
    ocfg = tcfg.oracle if tcfg.mode == "adaptive" else None
    groups = []
    for x, y in corpus.pairs:
        groups.append(
            pair_examples(
                x, y, tcfg.mode, ocfg or tcfg.oracle, tcfg.k, corpus.vocab, mcfg
            )
        )
    return groups


def train(
    corpus: ParallelCorpus,
    mcfg: ModelConfig,
    tcfg: TrainConfig,
    out_dir: Optional[str | Path] = None,
    log_every: int = 1,
) -> tuple[ScorerModel, list[TrainStepReport]]:
    """Minibatch first-order training; deterministic given the seeds.

    Emits one report per step, checkpoints on ``tcfg.ckpt_every`` cadence
    plus a final ``model.ckpt``, and keeps the last finite-loss checkpoint
    when the loss diverges.
    """
    if not corpus.pairs:
        raise ValueError("empty training corpus")
    model = ScorerModel.create(mcfg, corpus.vocab)
    groups = build_examples(corpus, tcfg, mcfg)
    shuffle_rng = np.random.default_rng([tcfg.seed, 1])
    opt = Adam(model.params, tcfg.lr, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps)

    out_path = Path(out_dir) if out_dir is not None else None
    log_fh = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        log_fh = open(out_path / "train_log.jsonl", "w", encoding="utf-8")
    band = {
        "mode": tcfg.mode,
        "alpha": tcfg.alpha,
        "beta": tcfg.beta,
        "gamma": str(tcfg.gamma),
        "k": tcfg.k,
    }

    reports: list[TrainStepReport] = []
    consumed = 0
    order: list[int] = []
    last_good: Optional[dict[str, np.ndarray]] = None
    try:
        for step in range(1, tcfg.max_steps + 1):
            batch_groups = []
            for _ in range(tcfg.batch_size):
                if not order:
                    order = list(shuffle_rng.permutation(len(groups)))
                batch_groups.append(groups[order.pop()])
            examples = [ex for grp in batch_groups for ex in grp]
            t0 = time.perf_counter()
            try:
                loss, grads, stats = loss_and_gradients(
                    model,
                    examples,
                    negative_term=tcfg.negative_term,
                    log_floor=tcfg.log_floor,
                )
            except TrainingDiverged:
                if out_path is not None and last_good is not None:
                    keep = ScorerModel(cfg=mcfg, vocab=corpus.vocab, params=last_good)
                    save_checkpoint(keep, out_path / "model.ckpt", band=band)
                raise
            last_good = {k: v.copy() for k, v in model.params.items()}
            opt.step(model.params, grads)
            consumed += tcfg.batch_size
            wall_ms = (time.perf_counter() - t0) * 1000.0
            rep = TrainStepReport(
                step=step,
                loss=loss,
                grad_norm=grad_norm(grads),
                examples=consumed,
                wall_ms=wall_ms,
                floor_hits=stats["floor_hits"],
            )
            reports.append(rep)
            if log_fh is not None and (step % log_every == 0 or step == tcfg.max_steps):
                log_fh.write(
                    json.dumps(
                        {
                            "step": rep.step,
                            "loss": rep.loss,
                            "grad_norm": rep.grad_norm,
                            "wall_ms": round(rep.wall_ms, 3),
                            "floor_hits": rep.floor_hits,
                        }
                    )
                    + "\n"
                )
            if (
                out_path is not None
                and tcfg.ckpt_every
                and step % tcfg.ckpt_every == 0
            ):
                save_checkpoint(model, out_path / f"ckpt_{step:06d}.ckpt", band=band)
        if out_path is not None:
            save_checkpoint(model, out_path / "model.ckpt", band=band)
    finally:
        if log_fh is not None:
            log_fh.close()
    return model, reports
