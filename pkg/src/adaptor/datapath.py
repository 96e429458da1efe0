"""Functional simulator of the tiled accelerator datapath.

Every matrix product runs tile by tile in the order the hardware visits
tiles, accumulating partial sums in a wide integer accumulator. Because
integer addition is associative the tiled result is bitwise identical to the
untiled one; that identity is what the tiling tests check.

Two arithmetics share the same code path: :class:`FixedArithmetic` (raw
integers in a :class:`~adaptor.fixedpoint.FixedFormat`) and
:class:`RealArithmetic` (float64 reference). Nonlinear steps (score scaling,
softmax, layer-norm normalization, GELU) run in float64 on dequantized values
and are requantized on output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fixedpoint as fp
from .config import ModelConfig, ScaleMode, TileConfig
from .weights import AttentionWeights, HeadWeights, LayerWeights, MissingLayerWeights, ModelWeights


class ShapeMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# tile schedules

@dataclass(frozen=True)
class TileSchedule:
    """Blocks of a ``(K, N)`` weight matrix, in visiting order.

    Each block is ``((k0, k1), (n0, n1))``: rows ``k0:k1`` are a slice of the
    reduction axis, columns ``n0:n1`` a slice of the output axis.
    """

    shape: tuple[int, int]
    blocks: tuple[tuple[tuple[int, int], tuple[int, int]], ...]

    def __len__(self):
        return len(self.blocks)


def _ranges(n: int, width: int) -> list[tuple[int, int]]:
    if width < 1:
        raise ValueError("tile width must be >= 1")
    return [(s, min(s + width, n)) for s in range(0, n, width)]


def mha_schedule(d_model: int, d_k: int, span: int) -> TileSchedule:
    """Column slices of the input (rows of W_q/W_k/W_v) of width ``span``."""
    return TileSchedule((d_model, d_k), tuple((r, (0, d_k)) for r in _ranges(d_model, span)))


def ffn_schedule(k: int, n: int, span: int) -> TileSchedule:
    """Square ``span x span`` blocks; the output columns of one row-band are
    visited first, then the next band of the reduction axis."""
    rows, cols = _ranges(k, span), _ranges(n, span)
    return TileSchedule((k, n), tuple((r, c) for r in rows for c in cols))


def full_schedule(k: int, n: int) -> TileSchedule:
    return TileSchedule((k, n), (((0, k), (0, n)),))


@dataclass(frozen=True)
class Schedules:
    qkv: TileSchedule
    ffn1: TileSchedule
    ffn2: TileSchedule
    ffn3: TileSchedule

    @classmethod
    def build(cls, cfg: ModelConfig, tiles: TileConfig) -> "Schedules":
        d, dh = cfg.d_model, cfg.d_hidden
        span_m = tiles.mha_span(d)
        span_f = tiles.ffn_span(d)
        if span_m != int(span_m) or span_f != int(span_f):
            raise ShapeMismatch(f"functional tiling needs whole spans, got MHA {span_m:g}, FFN {span_f:g}")
        span_m, span_f = int(span_m), int(span_f)
        return cls(qkv=mha_schedule(d, d // cfg.heads, span_m),
                   ffn1=ffn_schedule(d, d, span_f),
                   ffn2=ffn_schedule(d, dh, span_f),
                   ffn3=ffn_schedule(dh, d, span_f))

    @classmethod
    def untiled(cls, cfg: ModelConfig) -> "Schedules":
        d, dh = cfg.d_model, cfg.d_hidden
        return cls(full_schedule(d, d // cfg.heads), full_schedule(d, d),
                   full_schedule(d, dh), full_schedule(dh, d))


# ---------------------------------------------------------------------------
# arithmetic back ends

class FixedArithmetic:
    def __init__(self, fmt: fp.FixedFormat = fp.Q8_8):
        self.fmt = fmt
        self.most_negative = fmt.raw_min

    def encode(self, x):
        return fp.quantize(np.asarray(x, dtype=np.float64), self.fmt)

    def decode(self, t):
        return fp.dequantize(t, self.fmt)

    def acc_zeros(self, rows: int, cols: int, reduction_len: int):
        return np.zeros((rows, cols), dtype=fp.accumulator_dtype(self.fmt, reduction_len))

    def matmul(self, a, b, reduction_len: int):
        return fp.wide_matmul(a, b, self.fmt, reduction_len)

    def finish(self, acc, bias=None):
        if bias is not None:
            acc = acc + (np.asarray(bias).astype(acc.dtype) << self.fmt.frac_bits)
        return np.asarray(fp.requantize(acc, self.fmt))

    def acc_to_real(self, acc):
        return np.ldexp(np.asarray(acc, dtype=np.float64), -2 * self.fmt.frac_bits)

    def add(self, a, b):
        return np.asarray(fp.saturate(a.astype(np.int64) + b.astype(np.int64), self.fmt))

    def relu(self, t):
        return np.maximum(t, 0)


class RealArithmetic:
    """float64 reference: no rounding, no saturation."""

    most_negative = -np.inf

    def encode(self, x):
        return np.asarray(x, dtype=np.float64)

    def decode(self, t):
        return np.asarray(t, dtype=np.float64)

    def acc_zeros(self, rows, cols, reduction_len):
        return np.zeros((rows, cols))

    def matmul(self, a, b, reduction_len):
        return a @ b

    def finish(self, acc, bias=None):
        return acc if bias is None else acc + bias

    def acc_to_real(self, acc):
        return acc

    def add(self, a, b):
        return a + b

    def relu(self, t):
        return np.maximum(t, 0.0)


def tiled_matmul(arith, a, w, schedule: TileSchedule):
    """Accumulate ``a @ w`` block by block; returns the (unrounded) accumulator."""
    k, n = schedule.shape
    if a.shape[1] != k or w.shape != (k, n):
        raise ShapeMismatch(f"operands {a.shape} x {w.shape} do not fit schedule {schedule.shape}")
    acc = arith.acc_zeros(a.shape[0], n, k)
    for (k0, k1), (n0, n1) in schedule.blocks:
        acc[:, n0:n1] += arith.matmul(a[:, k0:k1], w[k0:k1, n0:n1], k)
    return acc


def _linear(arith, x, w_real, b_real, schedule):
    w = arith.encode(w_real)
    b = arith.encode(b_real)
    return arith.finish(tiled_matmul(arith, x, w, schedule), b)


# ---------------------------------------------------------------------------
# operations

def qkv_project(arith, x, head: HeadWeights, schedule: TileSchedule):
    """Q, K, V of one head; ``x`` is SL x d_model in the arithmetic's encoding."""
    if x.shape[1] != head.wq.shape[0]:
        raise ShapeMismatch(f"input width {x.shape[1]} != weight rows {head.wq.shape[0]}")
    return tuple(_linear(arith, x, w, b, schedule)
                 for w, b in ((head.wq, head.bq), (head.wk, head.bk), (head.wv, head.bv)))


def score_scale(scale_mode: ScaleMode, d_k: int, d_model: int) -> float:
    if ScaleMode(scale_mode) is ScaleMode.SQRT_DK:
        return 1.0 / math.sqrt(d_k)
    return 1.0 / d_model


def attention_scores(arith, q, k, scale: float, causal: bool = False):
    if q.shape[1] != k.shape[1]:
        raise ShapeMismatch(f"Q width {q.shape[1]} != K width {k.shape[1]}")
    acc = arith.matmul(q, k.T, q.shape[1])
    s = arith.encode(arith.acc_to_real(acc) * scale)
    if causal:
        s = s.copy()
        s[np.triu_indices(s.shape[0], k=1, m=s.shape[1])] = arith.most_negative
    return s


def softmax_rows(arith, s):
    x = arith.decode(s)
    x = x - x.max(axis=1, keepdims=True)
    e = np.exp(x)
    return arith.encode(e / e.sum(axis=1, keepdims=True))


def attention_apply(arith, p, v):
    if p.shape[1] != v.shape[0]:
        raise ShapeMismatch(f"scores {p.shape} x values {v.shape}")
    return arith.finish(arith.matmul(p, v, p.shape[1]))


def concat_heads(outputs):
    rows = {o.shape[0] for o in outputs}
    if len(rows) != 1:
        raise ShapeMismatch(f"head outputs disagree on row count: {sorted(rows)}")
    return np.concatenate(outputs, axis=1)


def ffn1_forward(arith, a, wo, bo, schedule: TileSchedule):
    """Attention output projection, d_model -> d_model."""
    return _linear(arith, a, wo, bo, schedule)


def ffn2_forward(arith, x, w1, b1, schedule: TileSchedule):
    """Expansion d_model -> d_hidden followed by ReLU."""
    return arith.relu(_linear(arith, x, w1, b1, schedule))


def ffn3_forward(arith, h, w2, b2, schedule: TileSchedule):
    """Contraction d_hidden -> d_model."""
    return _linear(arith, h, w2, b2, schedule)


def layer_norm(arith, x, residual, gamma, beta, eps: float = 1e-5):
    """Residual add, then per-row normalization with population variance."""
    if x.shape != residual.shape:
        raise ShapeMismatch(f"residual {residual.shape} != input {x.shape}")
    y = arith.decode(arith.add(x, residual))
    g = arith.decode(arith.encode(gamma))
    b = arith.decode(arith.encode(beta))
    mu = y.mean(axis=1, keepdims=True)
    var = ((y - mu) ** 2).mean(axis=1, keepdims=True)
    return arith.encode(g * (y - mu) / np.sqrt(var + eps) + b)


def gelu(x):
    x = np.asarray(x, dtype=np.float64)
    erf = np.vectorize(math.erf, otypes=[np.float64])
    out = x * 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# layers

@dataclass
class Datapath:
    """One simulation context: arithmetic, tiling and attention options."""

    arith: object
    tiles: TileConfig | None = None  # None runs untiled
    scale_mode: ScaleMode = ScaleMode.SQRT_DK
    eps: float = 1e-5

    def schedules(self, cfg: ModelConfig) -> Schedules:
        if self.tiles is None:
            return Schedules.untiled(cfg)
        return Schedules.build(cfg, self.tiles)

    def attention_block(self, x, kv_src, aw: AttentionWeights, sched: Schedules, causal: bool):
        """All heads, concatenation and output projection (pre-norm value)."""
        d_model = x.shape[1]
        outs = []
        for head in aw.heads:
            q, k, v = qkv_project(self.arith, x, head, sched.qkv)
            if kv_src is not x:
                _, k, v = qkv_project(self.arith, kv_src, head, sched.qkv)
            scale = score_scale(self.scale_mode, q.shape[1], d_model)
            p = softmax_rows(self.arith, attention_scores(self.arith, q, k, scale, causal))
            outs.append(attention_apply(self.arith, p, v))
        return ffn1_forward(self.arith, concat_heads(outs), aw.wo, aw.bo, sched.ffn1)

    def feed_forward(self, y, lw: LayerWeights, sched: Schedules):
        h = ffn2_forward(self.arith, y, lw.w1, lw.b1, sched.ffn2)
        f = ffn3_forward(self.arith, h, lw.w2, lw.b2, sched.ffn3)
        return layer_norm(self.arith, f, y, lw.ln2_gamma, lw.ln2_beta, self.eps)

    def encoder_layer(self, x, lw: LayerWeights, cfg: ModelConfig):
        sched = self.schedules(cfg)
        p = self.attention_block(x, x, lw.attn, sched, causal=False)
        y1 = layer_norm(self.arith, p, x, lw.attn.ln_gamma, lw.attn.ln_beta, self.eps)
        return self.feed_forward(y1, lw, sched)

    def decoder_layer(self, x, enc_out, lw: LayerWeights, cfg: ModelConfig):
        if lw.cross is None:
            raise MissingLayerWeights("decoder layer needs cross-attention weights")
        if enc_out.shape[1] != x.shape[1]:
            raise ShapeMismatch(f"encoder output width {enc_out.shape[1]} != {x.shape[1]}")
        sched = self.schedules(cfg)
        p = self.attention_block(x, x, lw.attn, sched, causal=True)
        y1 = layer_norm(self.arith, p, x, lw.attn.ln_gamma, lw.attn.ln_beta, self.eps)
        c = self.attention_block(y1, enc_out, lw.cross, sched, causal=False)
        y2 = layer_norm(self.arith, c, y1, lw.cross.ln_gamma, lw.cross.ln_beta, self.eps)
        return self.feed_forward(y2, lw, sched)

    def model_forward(self, x, weights: ModelWeights, cfg: ModelConfig, x_dec=None):
        """Run ``n_enc`` encoders then ``n_dec`` decoders.

        ``x`` and ``x_dec`` are encoded tensors. Decoders attend to the final
        encoder output (``x`` itself when there are no encoders); their own
        input is ``x_dec`` if given, else ``x``.
        """
        if len(weights.layers) < cfg.n_layers:
            raise MissingLayerWeights(
                f"{cfg.n_layers} layers configured, weights for {len(weights.layers)}")
        if x.shape != (cfg.seq_len, cfg.d_model):
            raise ShapeMismatch(f"input {x.shape}, expected {(cfg.seq_len, cfg.d_model)}")
        h = x
        for i in range(cfg.n_enc):
            h = self.encoder_layer(h, weights.layers[i], cfg)
        if cfg.n_dec == 0:
            return h
        d = x if x_dec is None else x_dec
        for i in range(cfg.n_enc, cfg.n_layers):
            d = self.decoder_layer(d, h, weights.layers[i], cfg)
        return d
