import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptor.config import (PRESETS, REGISTER_NAMES, ConfigError, ModelConfig, PlatformConfig,
                            RegisterFile, ScaleMode, TileConfig, UnknownRegister,
                            ValueExceedsCapacity, config_to_registers, load_model_config,
                            load_platform, model_config_from_registers, register_write,
                            validate_model)


def test_defaults_fill_hidden_and_out():
    cfg = ModelConfig(64, 768, 8)
    assert cfg.d_hidden == 3072
    assert cfg.out_dim == 768
    assert cfg.d_k == 96
    assert cfg.n_layers == 1


def test_bert_row_validates():
    tiles = TileConfig(tiles_mha=12, tiles_ffn=6)
    assert validate_model(ModelConfig(64, 768, 8), tiles).ok
    assert tiles.mha_span(768) == 64


def test_heads_must_divide_d_model():
    report = validate_model(ModelConfig(64, 768, 7), TileConfig(tiles_mha=1, tiles_ffn=1))
    assert "d_model mod heads != 0" in report.violations


def test_fractional_head_width_is_analytical_only():
    cfg = ModelConfig(64, 200, 3, n_enc=2)
    tiles = TileConfig(tiles_mha=1, tiles_ffn=1)
    assert not validate_model(cfg, tiles).ok
    assert validate_model(cfg, tiles, exact_tiling=False).ok


def test_capacity_exceeded():
    report = validate_model(ModelConfig(64, 1024, 8), TileConfig(tiles_mha=8, tiles_ffn=8))
    assert any(v.startswith("capacity exceeded") and "d_model" in v for v in report.violations)
    with pytest.raises(ConfigError) as err:
        report.raise_if_failed()
    assert err.value.violations == report.violations


def test_no_layers_rejected():
    report = validate_model(ModelConfig(8, 16, 2, n_enc=0, n_dec=0), TileConfig(1, 1))
    assert "n_enc + n_dec must be >= 1" in report.violations


def test_tile_divisibility_only_when_exact():
    cfg = ModelConfig(64, 512, 8)
    tiles = TileConfig(tiles_mha=12, tiles_ffn=6)
    assert not validate_model(cfg, tiles).ok
    assert validate_model(cfg, tiles, exact_tiling=False).ok


def test_span_below_one_rejected_even_analytically():
    report = validate_model(ModelConfig(4, 8, 1), TileConfig(tiles_mha=16, tiles_ffn=1),
                            exact_tiling=False)
    assert not report.ok


def test_pinned_mha_tile_size():
    tiles = TileConfig(tiles_ffn=6, ts_mha=64)
    assert tiles.mha_span(512) == 64
    assert tiles.mha_tile_count(512) == 8
    assert tiles.ffn_span(512) == pytest.approx(512 / 6)


@given(st.integers(1, 128), st.integers(1, 16), st.integers(0, 3), st.integers(0, 3),
       st.sampled_from(list(ScaleMode)))
def test_model_json_round_trip(sl, dk, n_enc, n_dec, mode):
    cfg = ModelConfig(sl, dk * 2, 2, n_enc=n_enc, n_dec=n_dec, scale_mode=mode)
    doc = json.loads(json.dumps(cfg.to_json_dict()))
    assert ModelConfig.from_json_dict(doc) == cfg


def test_model_json_rejects_unknown_keys():
    doc = ModelConfig(8, 16, 2).to_json_dict()
    doc["extra"] = 1
    with pytest.raises(ValueError, match="extra"):
        ModelConfig.from_json_dict(doc)


def test_load_model_config(tmp_path):
    cfg = ModelConfig(8, 16, 2, n_dec=1)
    p = tmp_path / "m.json"
    p.write_text(json.dumps(cfg.to_json_dict()))
    assert load_model_config(p) == cfg


@pytest.mark.parametrize("name", PRESETS)
def test_presets_load_and_round_trip(name):
    p = load_platform(name)
    assert p.name == name
    assert PlatformConfig.from_json_dict(json.loads(json.dumps(p.to_json_dict()))) == p


def test_platform_from_path(tmp_path):
    p = PlatformConfig("tiny", 10, 100, 20, freq_mhz=100)
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(p.to_json_dict()))
    assert load_platform(str(path)) == p


def test_platform_rejects_bad_freq():
    with pytest.raises(ValueError):
        PlatformConfig("x", 1, 1, 1, freq_mhz=0)


# registers

def test_register_set_is_exact():
    rf = RegisterFile(TileConfig())
    assert tuple(rf.dump()) == REGISTER_NAMES


def test_register_write_within_capacity():
    rf = RegisterFile(TileConfig(max_heads=16))
    register_write(rf, "Heads", 8)
    assert rf.read("Heads") == 8


def test_register_over_capacity():
    rf = RegisterFile(TileConfig(max_heads=16))
    with pytest.raises(ValueExceedsCapacity):
        rf.write("Heads", 32)
    assert rf.read("Heads") == 8  # unchanged


def test_unknown_register():
    rf = RegisterFile(TileConfig())
    with pytest.raises(UnknownRegister):
        rf.write("Foo", 1)
    with pytest.raises(UnknownRegister):
        rf.read("Foo")


def test_negative_register_value():
    with pytest.raises(ValueError):
        RegisterFile(TileConfig()).write("Sequence", -1)


def test_registers_to_bert_config():
    rf = RegisterFile(TileConfig(tiles_mha=12, tiles_ffn=6))
    for name, value in {"Sequence": 64, "Heads": 8, "Embeddings": 768, "Hidden": 3072,
                        "Layers_enc": 1, "Layers_dec": 0, "Out": 768}.items():
        rf.write(name, value)
    assert model_config_from_registers(rf) == ModelConfig(64, 768, 8)


def test_registers_without_layers_fail():
    rf = RegisterFile(TileConfig(tiles_mha=1, tiles_ffn=1))
    rf.write("Layers_enc", 0).write("Layers_dec", 0)
    with pytest.raises(ConfigError):
        model_config_from_registers(rf)


@given(st.integers(1, 128), st.sampled_from([1, 2, 4, 8]), st.integers(1, 24),
       st.integers(0, 12), st.integers(0, 12))
def test_register_round_trip(sl, heads, dk_mult, n_enc, n_dec):
    d = heads * dk_mult
    cfg = ModelConfig(sl, d, heads, n_enc=max(n_enc, 1), n_dec=n_dec)
    rf = RegisterFile(TileConfig(tiles_mha=1, tiles_ffn=1)).load_config(cfg)
    assert rf.dump() == config_to_registers(cfg)
    assert model_config_from_registers(rf) == cfg
