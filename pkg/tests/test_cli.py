import json
import subprocess
import sys

import numpy as np
import pytest

from adaptor.cli import main, parse_int_list
from adaptor.config import ModelConfig
from adaptor.weights import save_weights, write_f32, zero_weights

ZERO_MODEL_CHECKSUM = "2e66aa8c7e31a09fb410208077229a2d54ac1a1090d8c7ebdb6ce66f7e0cf00d"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _write_model(tmp_path, cfg, name="m.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg.to_json_dict()))
    return p


def test_parse_int_list():
    assert parse_int_list("1,2,6-8") == [1, 2, 6, 7, 8]
    assert parse_int_list("") == []


def test_simulate_tiling_byte_identical(capsys, toy_files):
    f = toy_files
    outs = []
    for tiles in ("1,1", "2,2"):
        y = f["dir"] / f"y{tiles[0]}.bin"
        code, out, _ = run(capsys, "simulate", "--model", f["model"], "--weights", f["manifest"],
                           "--input", f["input"], "--tiles", tiles, "--output", y)
        assert code == 0
        outs.append((y.read_bytes(), json.loads(out)["checksum"]))
    assert outs[0] == outs[1]


def test_simulate_summary_fields(capsys, toy_files):
    f = toy_files
    code, out, _ = run(capsys, "simulate", "--model", f["model"], "--weights", f["manifest"],
                       "--input", f["input"], "--output", f["dir"] / "y.bin", "--reference")
    doc = json.loads(out)
    assert code == 0
    assert doc["config"] == f["cfg"].to_json_dict()
    assert doc["arithmetic"] == "float64"
    assert 0 < doc["max_abs_diff"] < 0.1
    assert doc["wall_time_s"] >= 0
    assert (f["dir"] / "y.bin").stat().st_size == 4 * 8 * 16


def test_simulate_zero_weight_golden(capsys, tmp_path):
    cfg = ModelConfig(4, 8, 2)
    model = _write_model(tmp_path, cfg)
    manifest = save_weights(zero_weights(cfg), tmp_path / "w")
    x = (np.arange(32).reshape(4, 8) % 7 - 3) / 4.0
    write_f32(tmp_path / "x.bin", x)
    y = tmp_path / "y.bin"
    code, out, _ = run(capsys, "simulate", "--model", model, "--weights", manifest,
                       "--input", tmp_path / "x.bin", "--output", y)
    assert code == 0
    assert json.loads(out)["checksum"] == ZERO_MODEL_CHECKSUM
    # zero weights: the output is LN(LN(x))
    def ln(v):
        return (v - v.mean(1, keepdims=True)) / np.sqrt(v.var(1, keepdims=True) + 1e-5)
    got = np.fromfile(y, "<f4").reshape(4, 8)
    assert np.max(np.abs(got - ln(ln(x)))) < 4 / 256


def test_simulate_missing_tensor(capsys, toy_files):
    f = toy_files
    doc = json.loads(f["manifest"].read_text())
    doc["tensors"] = [t for t in doc["tensors"] if t["name"] != "layer0.w1"]
    f["manifest"].write_text(json.dumps(doc))
    code, _, err = run(capsys, "simulate", "--model", f["model"], "--weights", f["manifest"],
                       "--input", f["input"], "--output", f["dir"] / "y.bin")
    assert code == 2
    assert "layer0.w1" in err


def test_simulate_bad_input_size(capsys, toy_files):
    f = toy_files
    write_f32(f["input"], np.zeros((3, 16)))
    code, _, _ = run(capsys, "simulate", "--model", f["model"], "--weights", f["manifest"],
                     "--input", f["input"], "--output", f["dir"] / "y.bin")
    assert code == 2


def test_estimate_row1(capsys, tmp_path):
    model = _write_model(tmp_path, ModelConfig(64, 768, 8))
    code, out, _ = run(capsys, "estimate", "--model", model, "--tiles", "12,6", "--freq", "200",
                       "--validate")
    assert code == 0
    units = {u["unit"]: u for u in json.loads(out)["units"]}
    assert units["SA"]["ms"] == pytest.approx(0.05152)
    assert units["LWA"]["ms"] == pytest.approx(0.03648)
    assert units["FFN1"]["ms"] == pytest.approx(0.08224)


def test_estimate_csv_and_mode(capsys, tmp_path):
    model = _write_model(tmp_path, ModelConfig(64, 768, 8))
    _, seq, _ = run(capsys, "estimate", "--model", model, "--csv", "--mode", "sequential")
    _, ovl, _ = run(capsys, "estimate", "--model", model, "--csv", "--mode", "overlapped")
    total = {t: float(text.splitlines()[-1].split(",")[1]) for t, text in (("s", seq), ("o", ovl))}
    assert seq.splitlines()[0] == "unit,cycles,ms"
    assert total["s"] >= total["o"]


def test_estimate_validate_random(capsys, tmp_path):
    rng = np.random.default_rng(20)
    for i in range(20):
        heads = int(rng.choice([1, 2, 4]))
        d = heads * int(rng.integers(1, 9))
        divisors = [t for t in range(1, d + 1) if d % t == 0]
        model = _write_model(tmp_path, ModelConfig(int(rng.integers(1, 17)), d, heads), f"m{i}.json")
        tiles = f"{rng.choice(divisors)},{rng.choice(divisors)}"
        code, _, err = run(capsys, "estimate", "--model", model, "--tiles", tiles, "--validate")
        assert code == 0, err


def test_estimate_constants_file(capsys, tmp_path):
    model = _write_model(tmp_path, ModelConfig(64, 768, 8))
    k = tmp_path / "k.json"
    k.write_text(json.dumps({"op_overhead": 3}))
    code, out, _ = run(capsys, "estimate", "--model", model, "--constants", k)
    units = {u["unit"]: u["cycles"] for u in json.loads(out)["units"]}
    assert code == 0 and units["SA"] == (95 + 67) * 64


def test_estimate_bad_freq(capsys, tmp_path):
    model = _write_model(tmp_path, ModelConfig(8, 16, 2))
    with pytest.raises(SystemExit) as e:
        main(["estimate", "--model", str(model), "--freq", "0"])
    assert e.value.code == 2


def test_resources_row4(capsys, tmp_path):
    model = _write_model(tmp_path, ModelConfig(64, 768, 8))
    code, out, err = run(capsys, "resources", "--model", model, "--tiles", "6,4", "--peak-gops", "53")
    doc = json.loads(out)
    assert code == 0
    assert doc["dsps"] == 6272
    assert doc["roofline"]["bound"] in ("compute_bound", "memory_bound")
    assert "bandwidth_bytes_per_s" in doc


def test_resources_unit_and_warning(capsys, tmp_path):
    model = _write_model(tmp_path, ModelConfig(1, 1, 1))
    code, out, err = run(capsys, "resources", "--model", model, "--tiles", "1,1")
    assert json.loads(out)["dsps"] == 12 and err == ""
    big = _write_model(tmp_path, ModelConfig(64, 768, 8), "big.json")
    code, out, err = run(capsys, "resources", "--model", big, "--tiles", "1,1", "--platform", "zcu102")
    assert code == 0 and "over budget" in err
    assert json.loads(out)["within_budget"] is False


def test_roofline_csv(capsys, tmp_path):
    model = _write_model(tmp_path, ModelConfig(64, 768, 8))
    code, out, _ = run(capsys, "roofline", "--model", model, "--peak-gops", "53", "--layers", "1,12",
                       "--tiles", "12,6", "--tiles", "24,6", "--brams", "340", "--lutrams", "129101")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 5
    assert lines[0].startswith("layers,tiles_mha")


def test_roofline_zero_layers(capsys, tmp_path):
    model = _write_model(tmp_path, ModelConfig(64, 768, 8))
    code, _, _ = run(capsys, "roofline", "--model", model, "--peak-gops", "53", "--layers", "0")
    assert code == 2


def test_dse_portability(capsys, tmp_path):
    model = _write_model(tmp_path, ModelConfig(64, 200, 3, n_enc=2))
    best = {}
    for platform in ("u55c", "zcu102"):
        out_csv = tmp_path / f"{platform}.csv"
        code, out, _ = run(capsys, "dse", "--model", model, "--platform", platform,
                           "--mha-tiles", "1,2,4,5,8,10", "--ffn-tiles", "1,2,4,5", "--out", out_csv,
                           "--mode", "sequential")
        assert code == 0
        assert out_csv.read_text().startswith("tiles_mha,tiles_ffn,dsps")
        best[platform] = json.loads(out)["optimum"]
    assert best["u55c"]["tiles_mha"] == best["u55c"]["tiles_ffn"] == 1
    assert (best["zcu102"]["tiles_mha"] + best["zcu102"]["tiles_ffn"]
            > best["u55c"]["tiles_mha"] + best["u55c"]["tiles_ffn"])


def test_dse_empty_candidates(capsys, tmp_path):
    model = _write_model(tmp_path, ModelConfig(8, 16, 2))
    code, _, _ = run(capsys, "dse", "--model", model, "--mha-tiles", "")
    assert code == 2


def test_dse_infeasible(capsys, tmp_path):
    model = _write_model(tmp_path, ModelConfig(64, 768, 8))
    plat = tmp_path / "p.json"
    plat.write_text(json.dumps({"name": "tiny", "dsp_budget": 0, "lut_budget": 0, "bram18k_budget": 0,
                                "bram_width_bits": 36, "bram_depth": 1024, "lutram_count": 0,
                                "lutram_width_bits": 32, "freq_mhz": 100}))
    code, _, _ = run(capsys, "dse", "--model", model, "--platform", plat, "--mha-tiles", "12",
                     "--ffn-tiles", "6")
    assert code == 3


def test_registers_round_trip(capsys, tmp_path):
    code, out, err = run(capsys, "registers", "--write", "Sequence=32", "--write", "Heads=4",
                         "--write", "Embeddings=64", "--write", "Hidden=256", "--write", "Out=64",
                         "--write", "Layers_enc=2", "--write", "Layers_dec=1", "--show")
    assert code == 0
    regs = json.loads(err)["registers"]
    assert regs == {"Sequence": 32, "Heads": 4, "Layers_enc": 2, "Layers_dec": 1,
                    "Embeddings": 64, "Hidden": 256, "Out": 64}
    assert ModelConfig.from_json_dict(json.loads(out)) == ModelConfig(32, 64, 4, 256, 2, 1, 64)


def test_registers_capacity(capsys):
    code, _, err = run(capsys, "registers", "--write", "Heads=99")
    assert code == 3 and "Heads" in err


def test_registers_unknown_and_malformed(capsys):
    assert run(capsys, "registers", "--write", "Foo=1")[0] == 2
    assert run(capsys, "registers", "--write", "Heads")[0] == 2
    assert run(capsys, "registers", "--write", "Heads=x")[0] == 2


def test_registers_pipe_into_simulate(tmp_path, toy_files):
    f = toy_files
    regs = subprocess.run([sys.executable, "-m", "adaptor.cli", "registers", "--model", str(f["model"]),
                           "--write", "Sequence=4"], capture_output=True, text=True, check=True)
    write_f32(f["input"], np.ones((4, 16)))
    sim = subprocess.run([sys.executable, "-m", "adaptor.cli", "simulate", "--model", "-",
                          "--weights", str(f["manifest"]), "--input", str(f["input"]),
                          "--output", str(tmp_path / "y.bin")],
                         input=regs.stdout, capture_output=True, text=True)
    assert sim.returncode == 0, sim.stderr
    assert json.loads(sim.stdout)["config"]["sequence"] == 4
