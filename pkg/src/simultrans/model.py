"""Down-scaled encoder-decoder scorer with hand-written backpropagation.

The scorer assigns an independent sigmoid score (or a softmax probability)
to every action in the extended vocabulary, conditioned on an encoded source
prefix and the action history.  Architecture notes that matter for the
contracts elsewhere:

* The encoder re-reads the whole source prefix from scratch on every read
  (bidirectional self-attention; no incremental reuse).
* Delay tokens in the history are masked out of decoder attention, except a
  delay that is the current (final) input.  Masked delay positions are also
  skipped by the positional indexing, so word positions never shift.
* The number of delay tokens taken so far is embedded (clamped to a table
  cap) and added to the current input's embedding only.  Together with the
  masking this makes the score an exact function of (target-word prefix,
  clamped delay count, whether the last action was a delay) for a fixed
  source memory.
* When the source memory is empty (nothing read yet) the cross-attention
  context is zero and only the output-projection bias passes through.

Everything runs on flat numpy parameter dictionaries; the batched "job"
forward/backward below is the single numeric code path used by scoring,
decoding, and training alike.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .transitions import Action, Vocab

LN_EPS = 1e-5
MASK_BIAS = -1e9
CKPT_MAGIC = b"STRN0001"

_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 2
    ffn_width: int = 256
    max_delay_count: int = 64
    max_positions: int = 256
    keep_delay_in_attention: bool = False
    use_count_embedding: bool = True
    scoring: str = "sigmoid"  # or "softmax"
    precision: str = "f32"  # or "f64"
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.max_delay_count < 1:
            raise ValueError("max_delay_count must be >= 1")
        if self.scoring not in ("sigmoid", "softmax"):
            raise ValueError("scoring must be 'sigmoid' or 'softmax'")
        if self.precision not in ("f32", "f64"):
            raise ValueError("precision must be 'f32' or 'f64'")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


def _param_specs(cfg: ModelConfig, n_vocab: int):
    """(name, shape, kind) for every parameter, in a fixed order.

    Kinds: 'w' weights (uniform +-1/sqrt(fan_in)), 'b' biases (zero),
    'g' layer-norm gains (one).
    """
    d, f = cfg.d_model, cfg.ffn_width
    specs = [
        ("src_tok", (n_vocab, d), "w"),
        ("tgt_tok", (n_vocab + 1, d), "w"),  # extra row: decoder BOS
        ("enc_pos", (cfg.max_positions, d), "w"),
        ("dec_pos", (cfg.max_positions, d), "w"),
        ("count_emb", (cfg.max_delay_count + 1, d), "w"),
    ]

    def attn(prefix):
        return [
            (prefix + "q_w", (d, d), "w"),
            (prefix + "q_b", (d,), "b"),
            (prefix + "k_w", (d, d), "w"),
            (prefix + "k_b", (d,), "b"),
            (prefix + "v_w", (d, d), "w"),
            (prefix + "v_b", (d,), "b"),
            (prefix + "o_w", (d, d), "w"),
            (prefix + "o_b", (d,), "b"),
        ]

    def ln(prefix):
        return [(prefix + "_g", (d,), "g"), (prefix + "_b", (d,), "b")]

    def ffn(prefix):
        return [
            (prefix + "fc1_w", (d, f), "w"),
            (prefix + "fc1_b", (f,), "b"),
            (prefix + "fc2_w", (f, d), "w"),
            (prefix + "fc2_b", (d,), "b"),
        ]

    for i in range(cfg.n_layers):
        p = f"enc{i}."
        specs += ln(p + "ln1") + attn(p) + ln(p + "ln2") + ffn(p)
    for i in range(cfg.n_layers):
        p = f"dec{i}."
        specs += ln(p + "ln1") + attn(p + "self_")
        specs += ln(p + "ln2") + attn(p + "cross_")
        specs += ln(p + "ln3") + ffn(p)
    specs += ln("enc_ln") + ln("dec_ln")
    specs += [("out_w", (d, n_vocab), "w"), ("out_b", (n_vocab,), "b")]
    return specs


def init_params(cfg: ModelConfig, n_vocab: int) -> dict[str, np.ndarray]:
    """Fan-in-scaled uniform init, drawn in spec order from cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape, kind in _param_specs(cfg, n_vocab):
        if kind == "w":
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            bound = 1.0 / math.sqrt(fan_in)
            arr = rng.uniform(-bound, bound, size=shape)
        elif kind == "b":
            arr = np.zeros(shape)
        else:
            arr = np.ones(shape)
        params[name] = arr.astype(cfg.dtype)
    return params


@dataclass
class ScorerModel:
    cfg: ModelConfig
    vocab: Vocab
    params: dict[str, np.ndarray]

    @classmethod
    def create(cls, cfg: ModelConfig, vocab: Vocab) -> "ScorerModel":
        return cls(cfg=cfg, vocab=vocab, params=init_params(cfg, len(vocab)))

    @property
    def bos_row(self) -> int:
        return len(self.vocab)

    def zero_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def copy(self) -> "ScorerModel":
        return ScorerModel(
            cfg=self.cfg,
            vocab=self.vocab,
            params={k: v.copy() for k, v in self.params.items()},
        )


@dataclass
class ScoreVector:
    """Per-action scores for one state, plus the normalization mode used."""

    values: np.ndarray  # [n_vocab], delay score at vocab.delay_id
    mode: str
    logits: np.ndarray


# ---------------------------------------------------------------------------
# numeric primitives (forward, backward) on [..., d] arrays


def _ln_fwd(x, g, b):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)

def _ln_bwd(dy, g, cache, grads, gname, bname):
    xhat, inv = cache
    axes = tuple(range(dy.ndim - 1))
    grads[gname] += (dy * xhat).sum(axes)
    grads[bname] += dy.sum(axes)
    dxhat = dy * g
    m = dxhat.mean(-1, keepdims=True)
    mh = (dxhat * xhat).mean(-1, keepdims=True)
    return (dxhat - m - xhat * mh) * inv


def _gelu_fwd(x):
    u = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), t

def _gelu_bwd(dy, x, t):
    du = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def _linear_fwd(x, w, b):
    return x @ w + b

def _linear_bwd(dy, x, w, grads, wname, bname):
    d_in = x.shape[-1]
    d_out = dy.shape[-1]
    grads[wname] += x.reshape(-1, d_in).T @ dy.reshape(-1, d_out)
    grads[bname] += dy.reshape(-1, d_out).sum(0)
    return dy @ w.T


def _split_heads(x, n_heads):
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)

def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def _attn_fwd(xq, xkv, params, pre, n_heads, bias, row_valid=None):
    """Multi-head attention.  ``bias`` is additive [B,1,T,S]; ``row_valid``
    (optional [B,1,1,1]) zeroes the context of rows with no visible keys."""
    q = _linear_fwd(xq, params[pre + "q_w"], params[pre + "q_b"])
    k = _linear_fwd(xkv, params[pre + "k_w"], params[pre + "k_b"])
    v = _linear_fwd(xkv, params[pre + "v_w"], params[pre + "v_b"])
    qh = _split_heads(q, n_heads)
    kh = _split_heads(k, n_heads)
    vh = _split_heads(v, n_heads)
    scale = 1.0 / math.sqrt(qh.shape[-1])
    scores = qh @ kh.transpose(0, 1, 3, 2) * scale + bias
    scores -= scores.max(-1, keepdims=True)
    e = np.exp(scores)
    probs = e / e.sum(-1, keepdims=True)
    if row_valid is not None:
        probs = probs * row_valid
    ctx = probs @ vh
    ctxm = _merge_heads(ctx)
    out = _linear_fwd(ctxm, params[pre + "o_w"], params[pre + "o_b"])
    return out, (xq, xkv, qh, kh, vh, probs, ctxm, scale)

def _attn_bwd(dout, params, pre, n_heads, cache, grads):
    xq, xkv, qh, kh, vh, probs, ctxm, scale = cache
    dctxm = _linear_bwd(dout, ctxm, params[pre + "o_w"], grads, pre + "o_w", pre + "o_b")
    dctx = _split_heads(dctxm, n_heads)
    dprobs = dctx @ vh.transpose(0, 1, 3, 2)
    dvh = probs.transpose(0, 1, 3, 2) @ dctx
    ds = probs * (dprobs - (dprobs * probs).sum(-1, keepdims=True))
    ds *= scale
    dqh = ds @ kh
    dkh = ds.transpose(0, 1, 3, 2) @ qh
    dq = _merge_heads(dqh)
    dk = _merge_heads(dkh)
    dv = _merge_heads(dvh)
    dxq = _linear_bwd(dq, xq, params[pre + "q_w"], grads, pre + "q_w", pre + "q_b")
    dxkv = _linear_bwd(dk, xkv, params[pre + "k_w"], grads, pre + "k_w", pre + "k_b")
    dxkv += _linear_bwd(dv, xkv, params[pre + "v_w"], grads, pre + "v_w", pre + "v_b")
    return dxq, dxkv


def _ffn_fwd(x, params, pre):
    z1 = _linear_fwd(x, params[pre + "fc1_w"], params[pre + "fc1_b"])
    a, t = _gelu_fwd(z1)
    out = _linear_fwd(a, params[pre + "fc2_w"], params[pre + "fc2_b"])
    return out, (x, z1, a, t)

def _ffn_bwd(dout, params, pre, cache, grads):
    x, z1, a, t = cache
    da = _linear_bwd(dout, a, params[pre + "fc2_w"], grads, pre + "fc2_w", pre + "fc2_b")
    dz1 = _gelu_bwd(da, z1, t)
    return _linear_bwd(dz1, x, params[pre + "fc1_w"], grads, pre + "fc1_w", pre + "fc1_b")


# ---------------------------------------------------------------------------
# batched plans: one encoder row per source prefix, one decoder job per
# state to score


@dataclass
class EncoderPlan:
    tok: np.ndarray  # [E, S] int64 source token ids (0-padded)
    lens: np.ndarray  # [E]

    @classmethod
    def from_prefixes(cls, prefixes: Sequence[Sequence[int]]) -> "EncoderPlan":
        e = len(prefixes)
        s = max(len(p) for p in prefixes)
        tok = np.zeros((e, s), dtype=np.int64)
        lens = np.zeros(e, dtype=np.int64)
        for i, p in enumerate(prefixes):
            tok[i, : len(p)] = p
            lens[i] = len(p)
        return cls(tok=tok, lens=lens)


@dataclass
class DecoderPlan:
    """One row per scoring job: BOS + history tokens, plus masking metadata."""

    tok: np.ndarray  # [J, T] embedding row ids (BOS row = n_vocab)
    pos: np.ndarray  # [J, T]
    lens: np.ndarray  # [J]
    counts: np.ndarray  # [J] clamped delay counts
    is_delay: np.ndarray  # [J, T] bool
    mem_row: np.ndarray  # [J] row into the encoder output, -1 = empty memory
    mem_len: np.ndarray  # [J]


def history_slots(history: Sequence[Action], vocab: Vocab, cfg: ModelConfig):
    """Embedding/positional/mask metadata for one history.

    Positional indices advance only on non-delay slots; the delay count is
    clamped to the embedding table cap.
    """
    tok = [len(vocab)]  # BOS row
    pos = [0]
    isd = [False]
    r = 1
    count = 0
    for a in history:
        if a.is_delay:
            tok.append(vocab.delay_id)
            isd.append(True)
            count += 1
        else:
            tok.append(a.word_id)
            isd.append(False)
        pos.append(min(r, cfg.max_positions - 1))
        if not a.is_delay:
            r += 1
    return tok, pos, isd, min(count, cfg.max_delay_count)


def build_decoder_plan(
    histories: Sequence[Sequence[Action]],
    src_lens: Sequence[int],
    mem_rows: Sequence[int],
    vocab: Vocab,
    cfg: ModelConfig,
) -> DecoderPlan:
    j = len(histories)
    t = max(len(h) for h in histories) + 1
    tok = np.zeros((j, t), dtype=np.int64)
    pos = np.zeros((j, t), dtype=np.int64)
    isd = np.zeros((j, t), dtype=bool)
    lens = np.zeros(j, dtype=np.int64)
    counts = np.zeros(j, dtype=np.int64)
    for i, h in enumerate(histories):
        tk, ps, dl, c = history_slots(h, vocab, cfg)
        n = len(tk)
        tok[i, :n] = tk
        pos[i, :n] = ps
        isd[i, :n] = dl
        lens[i] = n
        counts[i] = c
    return DecoderPlan(
        tok=tok,
        pos=pos,
        lens=lens,
        counts=counts,
        is_delay=isd,
        mem_row=np.asarray(mem_rows, dtype=np.int64),
        mem_len=np.asarray(src_lens, dtype=np.int64),
    )


def _self_attn_bias(plan: DecoderPlan, cfg: ModelConfig, dtype):
    """Additive decoder self-attention bias implementing the delay masking.

    Key k is visible to query q iff k <= q and (k is not a delay slot, or k
    is the job's final slot, or the ablation keeps delays in attention).
    """
    j, t = plan.tok.shape
    qi = np.arange(t)
    causal = qi[None, :, None] >= qi[None, None, :]  # [1, T, T]
    if cfg.keep_delay_in_attention:
        visible = np.broadcast_to(causal, (j, t, t))
    else:
        final = (qi[None, :] == (plan.lens - 1)[:, None])  # [J, T]
        key_ok = (~plan.is_delay) | final
        visible = causal & key_ok[:, None, :]
    bias = np.where(visible, 0.0, MASK_BIAS).astype(dtype)
    return bias[:, None, :, :]


def encoder_forward(model: ScorerModel, plan: EncoderPlan, need_cache=False):
    cfg, p = model.cfg, model.params
    dtype = cfg.dtype
    e, s = plan.tok.shape
    pos_idx = np.minimum(np.arange(s), cfg.max_positions - 1)
    x = p["src_tok"][plan.tok] + p["enc_pos"][pos_idx][None, :, :]
    x = x.astype(dtype)
    key_ok = np.arange(s)[None, :] < plan.lens[:, None]  # [E, S]
    bias = np.where(key_ok, 0.0, MASK_BIAS).astype(dtype)[:, None, None, :]
    caches = []
    for i in range(cfg.n_layers):
        pre = f"enc{i}."
        ln1, c_ln1 = _ln_fwd(x, p[pre + "ln1_g"], p[pre + "ln1_b"])
        a, c_attn = _attn_fwd(ln1, ln1, p, pre, cfg.n_heads, bias)
        x = x + a
        ln2, c_ln2 = _ln_fwd(x, p[pre + "ln2_g"], p[pre + "ln2_b"])
        f, c_ffn = _ffn_fwd(ln2, p, pre)
        x = x + f
        caches.append((c_ln1, c_attn, c_ln2, c_ffn))
    out, c_final = _ln_fwd(x, p["enc_ln_g"], p["enc_ln_b"])
    cache = (plan, pos_idx, caches, c_final) if need_cache else None
    return out, cache


def encoder_backward(model: ScorerModel, cache, dout, grads):
    cfg, p = model.cfg, model.params
    plan, pos_idx, caches, c_final = cache
    dx = _ln_bwd(dout, p["enc_ln_g"], c_final, grads, "enc_ln_g", "enc_ln_b")
    for i in reversed(range(cfg.n_layers)):
        pre = f"enc{i}."
        c_ln1, c_attn, c_ln2, c_ffn = caches[i]
        dln2 = _ffn_bwd(dx, p, pre, c_ffn, grads)
        dx = dx + _ln_bwd(dln2, p[pre + "ln2_g"], c_ln2, grads, pre + "ln2_g", pre + "ln2_b")
        dxq, dxkv = _attn_bwd(dx, p, pre, cfg.n_heads, c_attn, grads)
        dln1 = dxq + dxkv
        dx = dx + _ln_bwd(dln1, p[pre + "ln1_g"], c_ln1, grads, pre + "ln1_g", pre + "ln1_b")
    d = dx.shape[-1]
    np.add.at(grads["src_tok"], plan.tok.reshape(-1), dx.reshape(-1, d))
    np.add.at(grads["enc_pos"], pos_idx, dx.sum(0))


def decoder_forward(
    model: ScorerModel,
    plan: DecoderPlan,
    memory: Optional[np.ndarray],
    need_cache=False,
):
    """Run the decoder jobs; returns per-job probs and logits at final slots.

    ``memory`` is the encoder output batch [E, S, d]; jobs address it via
    ``plan.mem_row`` (-1 selects an all-masked empty memory).
    """
    cfg, p = model.cfg, model.params
    dtype = cfg.dtype
    j, t = plan.tok.shape
    d = cfg.d_model

    x = p["tgt_tok"][plan.tok] + p["dec_pos"][plan.pos]
    x = x.astype(dtype)
    rows = np.arange(j)
    final = plan.lens - 1
    if cfg.use_count_embedding:
        x[rows, final] += p["count_emb"][plan.counts]

    self_bias = _self_attn_bias(plan, cfg, dtype)

    if memory is None:
        s = 1
        mem = np.zeros((j, s, d), dtype=dtype)
    else:
        s = memory.shape[1]
        mem = memory[np.maximum(plan.mem_row, 0)]
    mem_ok = np.arange(s)[None, :] < plan.mem_len[:, None]  # [J, S]
    mem_bias = np.where(mem_ok, 0.0, MASK_BIAS).astype(dtype)[:, None, None, :]
    row_valid = (plan.mem_len > 0).astype(dtype)[:, None, None, None]

    caches = []
    for i in range(cfg.n_layers):
        pre = f"dec{i}."
        ln1, c_ln1 = _ln_fwd(x, p[pre + "ln1_g"], p[pre + "ln1_b"])
        a, c_self = _attn_fwd(ln1, ln1, p, pre + "self_", cfg.n_heads, self_bias)
        x = x + a
        ln2, c_ln2 = _ln_fwd(x, p[pre + "ln2_g"], p[pre + "ln2_b"])
        c, c_cross = _attn_fwd(
            ln2, mem, p, pre + "cross_", cfg.n_heads, mem_bias, row_valid
        )
        x = x + c
        ln3, c_ln3 = _ln_fwd(x, p[pre + "ln3_g"], p[pre + "ln3_b"])
        f, c_ffn = _ffn_fwd(ln3, p, pre)
        x = x + f
        caches.append((c_ln1, c_self, c_ln2, c_cross, c_ln3, c_ffn))

    out, c_final = _ln_fwd(x, p["dec_ln_g"], p["dec_ln_b"])
    h = out[rows, final]  # [J, d]
    logits = _linear_fwd(h, p["out_w"], p["out_b"])
    if cfg.scoring == "sigmoid":
        probs = _sigmoid(logits)
    else:
        probs = _softmax(logits)
    cache = None
    if need_cache:
        cache = (plan, mem, caches, c_final, h, logits, probs)
    return probs, logits, cache


def decoder_backward(model: ScorerModel, cache, dprobs, grads):
    """Backprop from d(loss)/d(probs) through the decoder jobs.

    Returns d(loss)/d(memory) as [E?, ...] scatter-ready [J, S, d] plus the
    plan (callers scatter into their encoder batch).
    """
    cfg, p = model.cfg, model.params
    plan, mem, caches, c_final, h, logits, probs = cache
    j, t = plan.tok.shape
    rows = np.arange(j)
    final = plan.lens - 1

    if cfg.scoring == "sigmoid":
        dlogits = dprobs * probs * (1.0 - probs)
    else:
        dlogits = probs * (dprobs - (dprobs * probs).sum(-1, keepdims=True))
    dh = _linear_bwd(dlogits, h, p["out_w"], grads, "out_w", "out_b")

    dout = np.zeros((j, t, cfg.d_model), dtype=cfg.dtype)
    dout[rows, final] = dh
    dx = _ln_bwd(dout, p["dec_ln_g"], c_final, grads, "dec_ln_g", "dec_ln_b")

    dmem = np.zeros_like(mem)
    for i in reversed(range(cfg.n_layers)):
        pre = f"dec{i}."
        c_ln1, c_self, c_ln2, c_cross, c_ln3, c_ffn = caches[i]
        dln3 = _ffn_bwd(dx, p, pre, c_ffn, grads)
        dx = dx + _ln_bwd(dln3, p[pre + "ln3_g"], c_ln3, grads, pre + "ln3_g", pre + "ln3_b")
        dxq, dxkv = _attn_bwd(dx, p, pre + "cross_", cfg.n_heads, c_cross, grads)
        dmem += dxkv
        dx = dx + _ln_bwd(dxq, p[pre + "ln2_g"], c_ln2, grads, pre + "ln2_g", pre + "ln2_b")
        dxq, dxkv = _attn_bwd(dx, p, pre + "self_", cfg.n_heads, c_self, grads)
        dln1 = dxq + dxkv
        dx = dx + _ln_bwd(dln1, p[pre + "ln1_g"], c_ln1, grads, pre + "ln1_g", pre + "ln1_b")

    if cfg.use_count_embedding:
        np.add.at(grads["count_emb"], plan.counts, dx[rows, final])
    d = cfg.d_model
    np.add.at(grads["tgt_tok"], plan.tok.reshape(-1), dx.reshape(-1, d))
    np.add.at(grads["dec_pos"], plan.pos.reshape(-1), dx.reshape(-1, d))
    return dmem


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z):
    e = np.exp(z - z.max(-1, keepdims=True))
    return e / e.sum(-1, keepdims=True)


# ---------------------------------------------------------------------------
# public single-state API


def encode(source_prefix: Sequence[int], model: ScorerModel) -> np.ndarray:
    """Encode one source prefix to a [len, d] memory.

    Errors on an empty prefix: decoding starts only after the first read.
    Re-encoding happens from scratch for every prefix length (the encoder is
    bidirectional, so earlier vectors may change as the prefix grows).
    """
    if len(source_prefix) == 0:
        raise ValueError("cannot encode an empty source prefix")
    plan = EncoderPlan.from_prefixes([list(source_prefix)])
    out, _ = encoder_forward(model, plan)
    return out[0]


def empty_memory(model: ScorerModel) -> np.ndarray:
    return np.zeros((0, model.cfg.d_model), dtype=model.cfg.dtype)


def score_actions(
    memory: np.ndarray, history: Sequence[Action], model: ScorerModel
) -> ScoreVector:
    """Score every action in the extended vocabulary for the state reached by
    ``history``, attending to ``memory`` (an encoded source prefix; may have
    zero rows before the first read)."""
    memory = np.asarray(memory, dtype=model.cfg.dtype)
    if memory.ndim != 2 or memory.shape[1] != model.cfg.d_model:
        raise ValueError("memory must be [len, d_model]")
    s = memory.shape[0]
    plan = build_decoder_plan(
        [tuple(history)], [s], [0 if s else -1], model.vocab, model.cfg
    )
    mem_batch = memory[None, :, :] if s else None
    probs, logits, _ = decoder_forward(model, plan, mem_batch)
    return ScoreVector(values=probs[0], mode=model.cfg.scoring, logits=logits[0])


# ---------------------------------------------------------------------------
# checkpoints: versioned magic, JSON header, raw little-endian arrays


def save_checkpoint(
    model: ScorerModel, path: str | Path, band: Optional[dict] = None
) -> None:
    manifest = [
        {"name": k, "shape": list(v.shape), "dtype": v.dtype.str}
        for k, v in model.params.items()
    ]
    header = {
        "format": 1,
        "config": model.cfg.to_json(),
        "vocab": model.vocab.to_json(),
        "band": band,
        "params": manifest,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CKPT_MAGIC)
    buf.write(struct.pack("<Q", len(blob)))
    buf.write(blob)
    for v in model.params.values():
        buf.write(np.ascontiguousarray(v, dtype=v.dtype.newbyteorder("<")).tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path) -> tuple[ScorerModel, Optional[dict]]:
    raw = Path(path).read_bytes()
    if raw[: len(CKPT_MAGIC)] != CKPT_MAGIC:
        raise ValueError(f"not a checkpoint file (bad magic): {path}")
    off = len(CKPT_MAGIC)
    (hlen,) = struct.unpack_from("<Q", raw, off)
    off += 8
    header = json.loads(raw[off : off + hlen].decode("utf-8"))
    off += hlen
    cfg = ModelConfig.from_json(header["config"])
    vocab = Vocab.from_json(header["vocab"])
    params = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        dt = np.dtype(entry["dtype"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype=dt, count=count, offset=off).reshape(shape)
        off += arr.nbytes
        params[entry["name"]] = arr.copy()
    model = ScorerModel(cfg=cfg, vocab=vocab, params=params)
    return model, header.get("band")
