"""Closed-form cycle model of every accelerator unit.

All units are loops whose second level is pipelined and whose innermost level
is fully unrolled, so each costs ``pll(depth, ii, trip) * outer_trip``.
Spans may be fractional here (a ``d_model`` that does not divide into the
tile count); the functional simulator is stricter.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, fields
from enum import Enum

from .config import ModelConfig, TileConfig, validate_model


class ZeroTripCount(ValueError):
    pass


class UnknownMode(ValueError):
    pass


class Mode(str, Enum):
    OVERLAPPED = "overlapped"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class PipelineConstants:
    pd_load: float = 13          # AXI setup 7 + address 1 + load 1 + store 1 + float->fixed 3
    op_overhead: float = 2       # extra depth of a MAC iteration beyond its unrolled span
    pd_bias_add: float = 3       # load + add + store
    exp_cycles: float = 4
    div_cycles: float = 14
    float_fix_cycles: float = 3
    ii: float = 1
    load_cycles: float = 1
    store_cycles: float = 1
    add_cycles: float = 1
    mul_cycles: float = 2
    div_ii: float = 2            # II of the softmax normalization loop
    ln_reduce_ii: float = 2      # II of the mean / variance reduction loops

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")
        if self.ii < 1 or self.div_ii < 1 or self.ln_reduce_ii < 1:
            raise ValueError("initiation intervals must be >= 1")

    @classmethod
    def from_json_dict(cls, d: dict) -> "PipelineConstants":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown pipeline constants: {sorted(unknown)}")
        return cls(**d)


def pll(pd: float, ii: float, tc: float) -> float:
    """Pipelined loop latency."""
    if tc < 1:
        raise ZeroTripCount(f"trip count must be >= 1, got {tc}")
    return pd + ii * (tc - 1)


def total_latency(pipelined: float, outer_tc: float) -> float:
    if pipelined <= 0:
        raise ValueError("pipelined loop latency must be > 0")
    if outer_tc < 1:
        raise ZeroTripCount(f"outer trip count must be >= 1, got {outer_tc}")
    return pipelined * outer_tc


UNITS = ("LI", "LBA", "LWA", "LIA", "SA", "BA", "Score", "SV", "SM",
         "LIF1", "LWF1", "LBF1", "FFN1", "BAF1",
         "LWN", "LBN", "RC", "LN",
         "LIF2", "LWF2", "LBF2", "FFN2", "BAF2",
         "LIF3", "LWF3", "LBF3", "FFN3", "BAF3")


@dataclass
class LatencyBreakdown:
    """Per-unit cycles (one module access each) plus composed totals."""

    units: dict[str, float] = field(default_factory=dict)
    access_counts: dict[str, float] = field(default_factory=dict)
    freq_mhz: float | None = None
    mode: Mode | None = None
    encoder_cycles: float | None = None
    decoder_cycles: float | None = None
    total_cycles: float | None = None

    def __getitem__(self, unit: str) -> float:
        return self.units[unit]

    def merged(self, other: "LatencyBreakdown") -> "LatencyBreakdown":
        return LatencyBreakdown({**self.units, **other.units},
                                {**self.access_counts, **other.access_counts})

    def ms(self, unit_or_cycles, freq_mhz: float | None = None) -> float:
        freq = freq_mhz if freq_mhz is not None else self.freq_mhz
        if freq is None or freq <= 0:
            raise ValueError("a positive frequency is needed for milliseconds")
        cycles = self.units[unit_or_cycles] if isinstance(unit_or_cycles, str) else unit_or_cycles
        return cycles_to_ms(cycles, freq)

    def to_json_dict(self) -> dict:
        d = {
            "units": [self._unit_entry(u, c) for u, c in self.units.items()],
            "freq_mhz": self.freq_mhz,
            "mode": self.mode.value if self.mode else None,
            "encoder_cycles": self.encoder_cycles,
            "decoder_cycles": self.decoder_cycles,
            "total_cycles": self.total_cycles,
        }
        if self.freq_mhz and self.total_cycles is not None:
            d["total_ms"] = cycles_to_ms(self.total_cycles, self.freq_mhz)
        return d

    def _unit_entry(self, unit: str, cycles: float) -> dict:
        e = {"unit": unit, "cycles": cycles,
             "ms": cycles_to_ms(cycles, self.freq_mhz) if self.freq_mhz else None}
        if unit in self.access_counts:  # tiled units only
            e["accesses"] = self.access_counts[unit]
        return e

    @classmethod
    def from_json_dict(cls, d: dict) -> "LatencyBreakdown":
        return cls(units={u["unit"]: u["cycles"] for u in d["units"]},
                   access_counts={u["unit"]: u["accesses"] for u in d["units"] if "accesses" in u},
                   freq_mhz=d["freq_mhz"], mode=Mode(d["mode"]) if d["mode"] else None,
                   encoder_cycles=d["encoder_cycles"], decoder_cycles=d["decoder_cycles"],
                   total_cycles=d["total_cycles"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["unit", "cycles", "ms"])
        for u, c in self.units.items():
            w.writerow([u, repr(float(c)), repr(cycles_to_ms(c, self.freq_mhz)) if self.freq_mhz else ""])
        for label, c in (("encoder_total", self.encoder_cycles), ("decoder_total", self.decoder_cycles),
                         ("model_total", self.total_cycles)):
            if c is not None:
                w.writerow([label, repr(float(c)), repr(cycles_to_ms(c, self.freq_mhz)) if self.freq_mhz else ""])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def cycles_to_ms(cycles: float, freq_mhz: float) -> float:
    return cycles / (freq_mhz * 1e3)


def _check(cfg: ModelConfig, tiles: TileConfig):
    validate_model(cfg, tiles, exact_tiling=False).raise_if_failed()


def attention_latency(cfg: ModelConfig, tiles: TileConfig, k: PipelineConstants = PipelineConstants()
                      ) -> LatencyBreakdown:
    _check(cfg, tiles)
    sl, d = cfg.seq_len, cfg.d_model
    dk = d / cfg.heads
    span = tiles.mha_span(d)
    ls = k.load_cycles + k.store_cycles
    u = {
        "LI": pll(k.pd_load, k.ii, d) * sl,
        "LBA": pll(k.pd_load, k.ii, dk),
        # weight tile loader: outer loop over d_k rows, pipelined over the tile span
        "LWA": pll(k.pd_load, k.ii, span) * dk,
        "LIA": pll(k.pd_load, k.ii, span) * sl,
        # pipeline depth = unrolled MAC chain over the tile span + op overhead
        "SA": pll(span + k.op_overhead, k.ii, dk) * sl,
        "BA": pll(k.pd_bias_add, k.ii, dk) * sl,
        "Score": pll(dk, k.ii, sl) * sl,
        "SV": pll(sl, k.ii, dk) * sl,
        "SM": (pll(ls, k.ii, sl)
               + pll(ls + k.add_cycles + k.exp_cycles, k.ii, sl)
               + pll(ls + k.div_cycles, k.div_ii, sl)) * sl,
    }
    acc = {"LIA": tiles.mha_tile_count(d), "LWA": tiles.mha_tile_count(d),
           "SA": tiles.mha_tile_count(d)}
    return LatencyBreakdown(u, acc)


def ffn_latencies(cfg: ModelConfig, tiles: TileConfig, k: PipelineConstants = PipelineConstants()
                  ) -> LatencyBreakdown:
    _check(cfg, tiles)
    sl, d, dh = cfg.seq_len, cfg.d_model, cfg.d_hidden
    span = tiles.ffn_span(d)
    hspan = tiles.ffn_hidden_span(dh)
    u = {
        "LIF1": pll(k.pd_load, k.ii, span) * sl,
        "LWF1": pll(k.pd_load, k.ii, span) * span,
        "LBF1": pll(k.pd_load, k.ii, d),
        "FFN1": pll(span + k.op_overhead, k.ii, span) * sl,
        "BAF1": pll(k.pd_bias_add, k.ii, d) * sl,
        "LIF2": pll(k.pd_load, k.ii, span) * sl,
        "LWF2": pll(k.pd_load, k.ii, span) * span,
        "LBF2": pll(k.pd_load, k.ii, dh),
        "FFN2": pll(span + k.op_overhead, k.ii, hspan) * sl,
        "BAF2": pll(k.pd_bias_add, k.ii, dh) * sl,
        "LIF3": pll(k.pd_load, k.ii, hspan) * sl,
        "LWF3": pll(k.pd_load, k.ii, hspan) * span,
        "LBF3": pll(k.pd_load, k.ii, d),
        "FFN3": pll(hspan + k.op_overhead, k.ii, span) * sl,
        "BAF3": pll(k.pd_bias_add, k.ii, d) * sl,
    }
    n1 = tiles.tiles_ffn ** 2
    n23 = n1 * dh / d  # 4 * tiles_ffn**2 when d_hidden = 4 * d_model
    acc = {"LIF1": n1, "LWF1": n1, "FFN1": n1,
           "LIF2": n23, "LWF2": n23, "FFN2": n23,
           "LIF3": n23, "LWF3": n23, "FFN3": n23}
    return LatencyBreakdown(u, acc)


def ln_latency(cfg: ModelConfig, k: PipelineConstants = PipelineConstants()) -> LatencyBreakdown:
    sl, d = cfg.seq_len, cfg.d_model
    if sl < 1 or d < 1:
        raise ValueError("seq_len and d_model must be >= 1")
    ld, st, add, mul = k.load_cycles, k.store_cycles, k.add_cycles, k.mul_cycles
    mean = pll(ld + add + st, k.ln_reduce_ii, d)
    var = pll(ld + mul + add + st, k.ln_reduce_ii, d)
    # square + multiply + add + divide + float->fixed conversion per element
    norm = pll(ld + mul + mul + add + st + k.div_cycles + k.float_fix_cycles, k.ii, d)
    out = pll(ld + add + st, k.ii, d)
    return LatencyBreakdown({
        "LWN": pll(k.pd_load, k.ii, d),
        "LBN": pll(k.pd_load, k.ii, d),
        "RC": pll(k.pd_bias_add, k.ii, d) * sl,
        "LN": (mean + var + norm + out) * sl,
    })


def unit_latencies(cfg: ModelConfig, tiles: TileConfig, k: PipelineConstants = PipelineConstants()
                   ) -> LatencyBreakdown:
    return attention_latency(cfg, tiles, k).merged(ffn_latencies(cfg, tiles, k)).merged(ln_latency(cfg, k))


# ---------------------------------------------------------------------------
# composition

def _tiled_phase(load: float, compute: float, n: float, side_load: float, mode: Mode) -> float:
    """``n`` tile accesses, each loading then computing, with one side load
    (biases, LN parameters) that needs no tile buffer.

    Overlapped: double buffering, so tile ``i+1`` loads while tile ``i``
    computes and only the first load and last compute are exposed; the side
    load runs concurrently with the whole phase.
    """
    if mode is Mode.SEQUENTIAL:
        return n * (load + compute) + side_load
    if n <= 1:
        pipe = n * (load + compute)
    else:
        pipe = load + (n - 1) * max(load, compute) + compute
    return max(pipe, side_load)


def _attention_pass(b: LatencyBreakdown, mode: Mode) -> float:
    u, a = b.units, b.access_counts
    qkv = _tiled_phase(u["LIA"] + u["LWA"], u["SA"], a["SA"], u["LBA"], mode)
    return qkv + u["BA"] + u["Score"] + u["SM"] + u["SV"]


def _projection_and_norm(b: LatencyBreakdown, mode: Mode) -> float:
    u, a = b.units, b.access_counts
    proj = _tiled_phase(u["LIF1"] + u["LWF1"], u["FFN1"], a["FFN1"],
                        u["LBF1"] + u["LWN"] + u["LBN"], mode)
    return proj + u["BAF1"] + u["RC"] + u["LN"]


def _feed_forward(b: LatencyBreakdown, mode: Mode) -> float:
    u, a = b.units, b.access_counts
    f2 = _tiled_phase(u["LIF2"] + u["LWF2"], u["FFN2"], a["FFN2"], u["LBF2"], mode)
    f3 = _tiled_phase(u["LIF3"] + u["LWF3"], u["FFN3"], a["FFN3"],
                      u["LBF3"] + u["LWN"] + u["LBN"], mode)
    return f2 + u["BAF2"] + f3 + u["BAF3"] + u["RC"] + u["LN"]


def compose_model_latency(breakdown: LatencyBreakdown, cfg: ModelConfig, tiles: TileConfig | None = None,
                          mode: Mode | str = Mode.OVERLAPPED, freq_mhz: float | None = None
                          ) -> LatencyBreakdown:
    """Sum unit cycles into per-layer and whole-model totals.

    Encoder: attention, projection + LN, FFN2/FFN3 + LN. Decoder: the same
    with a second attention pass (cross-attention) and its projection + LN.
    Every layer starts by loading its input (``LI``): the host runs the
    accelerator once per layer.
    """
    try:
        mode = Mode(mode)
    except ValueError:
        raise UnknownMode(f"unknown composition mode {mode!r}") from None
    att = _attention_pass(breakdown, mode) + _projection_and_norm(breakdown, mode)
    ffn = _feed_forward(breakdown, mode)
    li = breakdown.units["LI"]
    enc = li + att + ffn
    dec = li + 2 * att + ffn
    total = cfg.n_enc * enc + cfg.n_dec * dec
    return LatencyBreakdown(dict(breakdown.units), dict(breakdown.access_counts), freq_mhz, mode,
                            enc, dec, total)


def model_latency(cfg: ModelConfig, tiles: TileConfig, k: PipelineConstants = PipelineConstants(),
                  mode: Mode | str = Mode.OVERLAPPED, freq_mhz: float | None = None) -> LatencyBreakdown:
    return compose_model_latency(unit_latencies(cfg, tiles, k), cfg, tiles, mode, freq_mhz)
