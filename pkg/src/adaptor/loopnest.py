"""Cycle counting by walking each unit's loop nest iteration by iteration.

This is the check on :mod:`adaptor.perfmodel`: it never evaluates the
pipelined-loop formula. Outer loops are not pipelined and run their bodies
back to back; the pipelined loop issues one iteration every ``ii`` cycles and
finishes when its last iteration drains; innermost loops are unrolled into a
chain inside one iteration's depth.
"""

from __future__ import annotations

from .config import ModelConfig, TileConfig, validate_model
from .perfmodel import LatencyBreakdown, PipelineConstants


def _whole(x: float, what: str) -> int:
    if x != int(x):
        raise ValueError(f"loop-nest oracle needs integral trip counts, {what} = {x:g}")
    return int(x)


def pipelined_loop(depth: float, ii: float, trips: int) -> float:
    finish = 0.0
    issue = 0.0
    for _ in range(trips):
        finish = max(finish, issue + depth)
        issue += ii
    return finish


def outer_loop(trips: int, body) -> float:
    cycles = 0.0
    for _ in range(trips):
        cycles += body()
    return cycles


def unrolled_chain(length: int, step: float = 1.0) -> float:
    """Depth of a fully unrolled accumulation chain."""
    depth = 0.0
    for _ in range(length):
        depth += step
    return depth


def _nest(outer: int, depth: float, ii: float, inner: int) -> float:
    return outer_loop(outer, lambda: pipelined_loop(depth, ii, inner))


def loopnest_oracle(cfg: ModelConfig, tiles: TileConfig, k: PipelineConstants = PipelineConstants()
                    ) -> LatencyBreakdown:
    validate_model(cfg, tiles, exact_tiling=False).raise_if_failed()
    sl, d, dh = cfg.seq_len, cfg.d_model, cfg.d_hidden
    dk = _whole(d / cfg.heads, "d_k")
    span_m = _whole(tiles.mha_span(d), "MHA span")
    span_f = _whole(tiles.ffn_span(d), "FFN span")
    hspan = _whole(tiles.ffn_hidden_span(dh), "FFN hidden span")
    ii = k.ii
    ld, st = k.load_cycles, k.store_cycles

    u = {}
    # loaders: one AXI transfer of depth pd_load per pipelined iteration
    u["LI"] = _nest(sl, k.pd_load, ii, d)
    u["LBA"] = pipelined_loop(k.pd_load, ii, dk)
    u["LWA"] = _nest(dk, k.pd_load, ii, span_m)
    u["LIA"] = _nest(sl, k.pd_load, ii, span_m)
    # QKV: for token, for output column (pipelined), unrolled over the tile span
    u["SA"] = _nest(sl, unrolled_chain(span_m) + k.op_overhead, ii, dk)
    u["BA"] = _nest(sl, k.pd_bias_add, ii, dk)
    u["Score"] = _nest(sl, unrolled_chain(dk), ii, sl)
    u["SV"] = _nest(sl, unrolled_chain(sl), ii, dk)
    u["SM"] = (_nest(sl, ld + st, ii, sl)
               + _nest(sl, ld + st + k.add_cycles + k.exp_cycles, ii, sl)
               + _nest(sl, ld + st + k.div_cycles, k.div_ii, sl))

    u["LIF1"] = _nest(sl, k.pd_load, ii, span_f)
    u["LWF1"] = _nest(span_f, k.pd_load, ii, span_f)
    u["LBF1"] = pipelined_loop(k.pd_load, ii, d)
    u["FFN1"] = _nest(sl, unrolled_chain(span_f) + k.op_overhead, ii, span_f)
    u["BAF1"] = _nest(sl, k.pd_bias_add, ii, d)

    u["LWN"] = pipelined_loop(k.pd_load, ii, d)
    u["LBN"] = pipelined_loop(k.pd_load, ii, d)
    u["RC"] = _nest(sl, k.pd_bias_add, ii, d)
    mean_depth = ld + k.add_cycles + st
    var_depth = ld + k.mul_cycles + k.add_cycles + st
    norm_depth = ld + 2 * k.mul_cycles + k.add_cycles + st + k.div_cycles + k.float_fix_cycles
    out_depth = ld + k.add_cycles + st
    u["LN"] = (_nest(sl, mean_depth, k.ln_reduce_ii, d) + _nest(sl, var_depth, k.ln_reduce_ii, d)
               + _nest(sl, norm_depth, ii, d) + _nest(sl, out_depth, ii, d))

    u["LIF2"] = _nest(sl, k.pd_load, ii, span_f)
    u["LWF2"] = _nest(span_f, k.pd_load, ii, span_f)
    u["LBF2"] = pipelined_loop(k.pd_load, ii, dh)
    u["FFN2"] = _nest(sl, unrolled_chain(span_f) + k.op_overhead, ii, hspan)
    u["BAF2"] = _nest(sl, k.pd_bias_add, ii, dh)

    u["LIF3"] = _nest(sl, k.pd_load, ii, hspan)
    u["LWF3"] = _nest(span_f, k.pd_load, ii, hspan)
    u["LBF3"] = pipelined_loop(k.pd_load, ii, d)
    u["FFN3"] = _nest(sl, unrolled_chain(hspan) + k.op_overhead, ii, span_f)
    u["BAF3"] = _nest(sl, k.pd_bias_add, ii, d)

    n_mha = _whole(d / span_m, "MHA tile count")
    n1 = tiles.tiles_ffn * tiles.tiles_ffn
    n23 = tiles.tiles_ffn * _whole(dh / span_f, "hidden tile count")
    acc = {"LIA": n_mha, "LWA": n_mha, "SA": n_mha,
           "LIF1": n1, "LWF1": n1, "FFN1": n1,
           "LIF2": n23, "LWF2": n23, "FFN2": n23,
           "LIF3": n23, "LWF3": n23, "FFN3": n23}
    return LatencyBreakdown(u, acc)
