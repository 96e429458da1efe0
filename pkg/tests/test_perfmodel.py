import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptor.config import ConfigError, ModelConfig, TileConfig
from adaptor.perfmodel import (UNITS, LatencyBreakdown, Mode, PipelineConstants, UnknownMode,
                               ZeroTripCount, compose_model_latency, cycles_to_ms, model_latency,
                               pll, total_latency, unit_latencies)

ROW1 = (ModelConfig(64, 768, 8), TileConfig(tiles_mha=12, tiles_ffn=6))


def test_pll():
    assert pll(13, 1, 64) == 76
    assert pll(5, 2, 1) == 5
    with pytest.raises(ZeroTripCount):
        pll(5, 1, 0)


def test_total_latency():
    assert total_latency(76, 96) == 7296
    with pytest.raises(ZeroTripCount):
        total_latency(76, 0)
    with pytest.raises(ValueError):
        total_latency(0, 4)


def test_row1_units():
    b = unit_latencies(*ROW1)
    assert b["SA"] == (95 + 66) * 64 == 10304
    assert b["LWA"] == 76 * 96 == 7296
    assert b["FFN1"] == (127 + 130) * 64 == 16448
    assert cycles_to_ms(b["SA"], 200) == pytest.approx(0.05152)


def test_every_unit_reported():
    b = unit_latencies(*ROW1)
    assert tuple(b.units) == UNITS or set(b.units) == set(UNITS)
    assert all(c > 0 for c in b.units.values())


def test_access_counts():
    b = unit_latencies(*ROW1)
    assert b.access_counts["SA"] == 12
    assert b.access_counts["FFN1"] == 36
    assert b.access_counts["FFN2"] == b.access_counts["FFN3"] == 144


def test_fractional_span_allowed():
    b = unit_latencies(ModelConfig(64, 512, 8), TileConfig(tiles_mha=12, tiles_ffn=6))
    assert b["SA"] == pytest.approx((512 / 12 + 2 + 63) * 64)


def test_invalid_config_raises():
    with pytest.raises(ConfigError):
        unit_latencies(ModelConfig(4, 8, 2), TileConfig(tiles_mha=16, tiles_ffn=1))


@given(st.integers(1, 64), st.sampled_from([1, 2, 4]), st.integers(1, 16), st.integers(1, 4))
def test_sl_linearity(sl, heads, dk, tm):
    d = heads * dk * tm
    tiles = TileConfig(tiles_mha=tm, tiles_ffn=1, max_d_model=4096, max_d_hidden=16384)
    a = unit_latencies(ModelConfig(sl, d, heads), tiles)
    b = unit_latencies(ModelConfig(2 * sl, d, heads), tiles)
    for unit in ("SA", "FFN1", "FFN2", "FFN3", "LIA", "BA"):
        assert b[unit] == 2 * a[unit]
    assert b["LWA"] == a["LWA"]


@given(st.integers(1, 32), st.integers(1, 8), st.integers(1, 8))
def test_sequential_never_faster(sl, tm, tf):
    d = 8 * tm * tf
    cfg = ModelConfig(sl, d, 8, n_enc=1, n_dec=1)
    tiles = TileConfig(tiles_mha=tm, tiles_ffn=tf, max_d_model=4096, max_d_hidden=16384)
    seq = model_latency(cfg, tiles, mode="sequential")
    ovl = model_latency(cfg, tiles, mode="overlapped")
    assert seq.total_cycles >= ovl.total_cycles
    assert seq.encoder_cycles >= ovl.encoder_cycles


def test_compute_bound_overlap_approaches_sum_of_compute():
    cfg, tiles = ROW1
    k = PipelineConstants(pd_load=1)
    ovl = model_latency(cfg, tiles, k, "overlapped")
    seq = model_latency(cfg, tiles, k, "sequential")
    assert ovl.total_cycles < seq.total_cycles


def test_model_total_composition():
    cfg = ModelConfig(16, 64, 4, n_enc=2, n_dec=3)
    b = model_latency(cfg, TileConfig(tiles_mha=4, tiles_ffn=2))
    assert b.total_cycles == 2 * b.encoder_cycles + 3 * b.decoder_cycles
    assert b.decoder_cycles > b.encoder_cycles


def test_unknown_mode():
    with pytest.raises(UnknownMode):
        compose_model_latency(unit_latencies(*ROW1), ROW1[0], mode="pipelined")


def test_constants_json():
    k = PipelineConstants.from_json_dict({"pd_load": 10, "op_overhead": 3})
    assert k.pd_load == 10 and k.op_overhead == 3
    with pytest.raises(ValueError):
        PipelineConstants.from_json_dict({"bogus": 1})
    with pytest.raises(ValueError):
        PipelineConstants(ii=0)


def test_breakdown_json_round_trip():
    b = model_latency(*ROW1, freq_mhz=200)
    again = LatencyBreakdown.from_json_dict(json.loads(b.to_json()))
    assert again == b
    assert again.mode is Mode.OVERLAPPED


def test_breakdown_csv():
    text = model_latency(*ROW1, freq_mhz=200).to_csv()
    lines = text.splitlines()
    assert lines[0] == "unit,cycles,ms"
    assert any(line.startswith("SA,10304.0,0.05152") for line in lines)
    assert lines[-1].startswith("model_total,")


def test_ms_needs_frequency():
    with pytest.raises(ValueError):
        unit_latencies(*ROW1).ms("SA")
