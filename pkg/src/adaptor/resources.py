"""DSP/BRAM estimators, on-chip memory bandwidth and the roofline."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .config import ModelConfig, PlatformConfig, TileConfig


class InvalidPeak(ValueError):
    pass


@dataclass
class ResourceEstimate:
    dsps: float = 0.0
    bram18k: float = 0.0
    terms: list[tuple[str, float]] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {"dsps": self.dsps, "bram18k": self.bram18k,
                "terms": [{"term": t, "value": v} for t, v in self.terms]}


def dsp_estimate(cfg: ModelConfig, tiles: TileConfig) -> ResourceEstimate:
    """Parallel multipliers: QKV PEs, QK and SV PEs, FFN PEs, LN multipliers."""
    h, d, sl = cfg.heads, cfg.d_model, cfg.seq_len
    terms = [
        ("dsp:qkv", 3 * h * tiles.mha_span(d)),
        ("dsp:qk_sv", h * (d / h + sl)),
        ("dsp:ffn", 6 * tiles.ffn_span(d)),
        ("dsp:ln", float(d)),
    ]
    return ResourceEstimate(dsps=sum(v for _, v in terms), terms=terms)


def bram_estimate(cfg: ModelConfig, tiles: TileConfig, bitw: int = 16,
                  platform: PlatformConfig | None = None) -> ResourceEstimate:
    """Sum over the buffers declared in the design, counted in 36 kb blocks
    with a half-block floor for small arrays, then reported in 18 kb units."""
    bw = platform.bram_width_bits if platform else 36
    bd = platform.bram_depth if platform else 1024
    cap = bw * bd
    sl, d, h = cfg.seq_len, cfg.d_model, cfg.heads
    tm = tiles.mha_tile_count(d)
    tf = tiles.tiles_ffn

    def floor_half(bits):
        return max(0.5, bits / cap)

    blocks36 = [
        ("bram:10 x SLxd buffers", 10 * sl * d * bitw / cap),
        ("bram:SL row buffers", sl * floor_half(sl * bitw)),
        ("bram:input", floor_half(sl * d * bitw)),
        ("bram:per-head SLxd", h * sl * d * bitw / cap),
        ("bram:d vector", floor_half(d * bitw)),
        ("bram:SL x MHA tiles", sl * tm * bitw / cap),
        ("bram:MHA input tiles", tm * h * floor_half(sl * bitw)),
        ("bram:FFN weights", 8 * d * d * bitw / (tf * cap)),
        ("bram:MHA weight tiles", tm * h * floor_half(d * bitw)),
        ("bram:FFN input tiles", (d / tf) * floor_half(sl * bitw)),
        ("bram:FFN hidden buffers", 4 * d * floor_half(sl * bitw)),
    ]
    terms = [(name, 2 * v) for name, v in blocks36]
    return ResourceEstimate(bram18k=sum(v for _, v in terms), terms=terms)


def estimate_resources(cfg: ModelConfig, tiles: TileConfig, bitw: int = 16,
                       platform: PlatformConfig | None = None) -> ResourceEstimate:
    dsp = dsp_estimate(cfg, tiles)
    bram = bram_estimate(cfg, tiles, bitw, platform)
    return ResourceEstimate(dsp.dsps, bram.bram18k, dsp.terms + bram.terms)


def memory_bandwidth(brams: float, bram_width_bits: float, lutrams: float,
                     lutram_width_bits: float, freq_mhz: float) -> float:
    """Aggregate on-chip bytes/s, every BRAM and LUTRAM port delivering one word per cycle."""
    return (brams * bram_width_bits + lutrams * lutram_width_bits) * freq_mhz * 1e6 / 8


def platform_bandwidth(platform: PlatformConfig, brams: float | None = None,
                       lutrams: float | None = None) -> float:
    return memory_bandwidth(platform.bram18k_budget if brams is None else brams,
                            platform.bram_width_bits,
                            platform.lutram_count if lutrams is None else lutrams,
                            platform.lutram_width_bits, platform.freq_mhz)


# ---------------------------------------------------------------------------
# roofline

class Bound(str, Enum):
    COMPUTE = "compute_bound"
    MEMORY = "memory_bound"


@dataclass
class RooflinePoint:
    total_ops: float
    bytes_moved: float
    intensity: float
    attainable_gops: float
    bound: Bound

    def to_json_dict(self) -> dict:
        return {"ops": self.total_ops, "bytes": self.bytes_moved, "intensity": self.intensity,
                "attainable_gops": self.attainable_gops, "bound": self.bound.value}


def layer_ops(cfg: ModelConfig, decoder: bool = False) -> float:
    """2 ops per MAC over every matrix product of one layer."""
    h, sl, d, dh = cfg.heads, cfg.seq_len, cfg.d_model, cfg.d_hidden
    dk = d / h
    attention = h * sl * d * dk * 3 + h * sl * sl * dk * 2 + sl * d * d
    ffn = 2 * sl * d * dh
    macs = (2 if decoder else 1) * attention + ffn
    return 2.0 * macs


def model_ops(cfg: ModelConfig) -> float:
    return cfg.n_enc * layer_ops(cfg) + cfg.n_dec * layer_ops(cfg, decoder=True)


def layer_param_words(cfg: ModelConfig, decoder: bool = False) -> float:
    d, dh = cfg.d_model, cfg.d_hidden
    attention = 3 * d * d + 3 * d + d * d + d + 2 * d  # QKV, biases, W_O, b_O, LN
    ffn = d * dh + dh + dh * d + d + 2 * d
    return (2 if decoder else 1) * attention + ffn


def model_bytes(cfg: ModelConfig, bitw: int = 16) -> float:
    """Off-chip traffic: every weight tile, bias and LN parameter once, the
    input once and the final output once (layers chain through on-chip buffers)."""
    words = (cfg.n_enc * layer_param_words(cfg) + cfg.n_dec * layer_param_words(cfg, True)
             + 2 * cfg.seq_len * cfg.d_model)
    return words * bitw / 8


def roofline_point(total_ops: float, bytes_moved: float, compute_peak_gops: float,
                   bandwidth_bytes_per_s: float) -> RooflinePoint:
    if compute_peak_gops <= 0:
        raise InvalidPeak(f"compute peak must be > 0, got {compute_peak_gops}")
    if bandwidth_bytes_per_s <= 0:
        raise ValueError("bandwidth must be > 0")
    bytes_moved = max(bytes_moved, 1.0)
    intensity = total_ops / bytes_moved
    memory_roof = intensity * bandwidth_bytes_per_s / 1e9
    bound = Bound.COMPUTE if memory_roof >= compute_peak_gops else Bound.MEMORY
    return RooflinePoint(total_ops, bytes_moved, intensity, min(compute_peak_gops, memory_roof), bound)


def roofline(cfg: ModelConfig, tiles: TileConfig, bitw: int, compute_peak_gops: float,
             bandwidth_bytes_per_s: float) -> RooflinePoint:
    if cfg.n_enc + cfg.n_dec < 1:
        raise ValueError("roofline needs at least one layer")
    return roofline_point(model_ops(cfg), model_bytes(cfg, bitw), compute_peak_gops,
                          bandwidth_bytes_per_s)
