"""Command-line front end.

Exit codes: 0 success, 1 internal error or oracle mismatch, 2 input/shape or
usage error, 3 capacity or feasibility error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as C
from .accelerator import Accelerator
from .dse import EmptyCandidates, NoFeasiblePoint, enumerate_points, read_freq_table, select_optimum
from .dse import to_csv as dse_csv
from .fixedpoint import FixedFormat
from .loopnest import loopnest_oracle
from .perfmodel import Mode, PipelineConstants, model_latency
from .resources import InvalidPeak, estimate_resources, platform_bandwidth, roofline
from .weights import ManifestError, load_weights, read_f32, write_f32

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_CAPACITY = 0, 1, 2, 3


class UsageError(ValueError):
    pass


class OracleMismatch(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# argument helpers

def parse_tiles(text: str) -> tuple[int, int]:
    try:
        m, f = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"tiles must be M,F (two integers), got {text!r}") from None
    if m < 1 or f < 1:
        raise argparse.ArgumentTypeError("tile counts must be >= 1")
    return m, f


def parse_int_list(text: str) -> list[int]:
    """``"1,2,4"``, ``"6-48"`` or a mix; empty string gives an empty list."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        try:
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-"))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad integer list item {part!r}") from None
    return out


def positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _read_json(path: str) -> dict:
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _model(path: str) -> C.ModelConfig:
    return C.ModelConfig.from_json_dict(_read_json(path))


def _build(cfg: C.ModelConfig, tiles: tuple[int, int], ts_mha: int | None = None) -> C.TileConfig:
    """A build large enough for ``cfg`` (simulation and estimation do not test capacity)."""
    base = C.TileConfig()
    return C.TileConfig(tiles_mha=tiles[0], tiles_ffn=tiles[1],
                        max_d_model=max(base.max_d_model, cfg.d_model),
                        max_seq_len=max(base.max_seq_len, cfg.seq_len),
                        max_heads=max(base.max_heads, cfg.heads),
                        max_d_hidden=max(base.max_d_hidden, cfg.d_hidden),
                        max_layers=max(base.max_layers, cfg.n_enc, cfg.n_dec),
                        max_out=max(base.max_d_model, cfg.out_dim), ts_mha=ts_mha)


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> int:
    cfg = _model(args.model)
    fmt = FixedFormat.parse(args.format)
    tiles = _build(cfg, args.tiles)
    acc = Accelerator(tiles, fmt, cfg.scale_mode)
    acc.registers.load_config(cfg)
    weights = load_weights(args.weights, cfg)
    x = read_f32(args.input, cfg.seq_len, cfg.d_model)
    x_dec = read_f32(args.decoder_input, cfg.seq_len, cfg.d_model) if args.decoder_input else None

    fixed = acc.run(x, weights, x_dec)
    result = fixed
    summary = {"config": cfg.to_json_dict(), "tiles": list(args.tiles), "format": str(fmt),
               "arithmetic": "fixed"}
    if args.reference:
        result = acc.run(x, weights, x_dec, reference=True)
        summary["arithmetic"] = "float64"
        summary["max_abs_diff"] = float(np.max(np.abs(result.output - fixed.output)))
        summary["fixed_wall_time_s"] = fixed.wall_time_s
    out = result.output.astype("<f4")
    write_f32(args.output, out)
    summary["output"] = str(args.output)
    summary["checksum"] = hashlib.sha256(out.tobytes()).hexdigest()
    summary["wall_time_s"] = result.wall_time_s  # simulator time, not accelerator time
    _emit(json.dumps(summary, indent=2), args.summary)
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _model(args.model)
    tiles = _build(cfg, args.tiles, args.mha_tile_size)
    k = PipelineConstants.from_json_dict(_read_json(args.constants)) if args.constants else PipelineConstants()
    result = model_latency(cfg, tiles, k, args.mode, args.freq)
    if args.validate:
        oracle = loopnest_oracle(cfg, tiles, k)
        bad = [u for u in result.units if result.units[u] != oracle.units[u]]
        bad += [f"accesses:{u}" for u in result.access_counts
                if result.access_counts[u] != oracle.access_counts.get(u)]
        if bad:
            raise OracleMismatch(f"closed form and loop-nest oracle disagree on {bad}")
    _emit(result.to_csv() if args.csv else result.to_json(), args.out)
    return EXIT_OK


def cmd_resources(args) -> int:
    cfg = _model(args.model)
    platform = C.load_platform(args.platform)
    tiles = _build(cfg, args.tiles, args.mha_tile_size)
    C.validate_model(cfg, tiles, exact_tiling=False).raise_if_failed()
    est = estimate_resources(cfg, tiles, args.bitw, platform)
    bw = platform_bandwidth(platform)
    report = est.to_json_dict()
    report["platform"] = platform.name
    report["bandwidth_bytes_per_s"] = bw
    if args.peak_gops is not None:
        report["roofline"] = roofline(cfg, tiles, args.bitw, args.peak_gops, bw).to_json_dict()
    over = []
    if est.dsps > platform.dsp_budget:
        over.append(f"DSPs {est.dsps:g} > {platform.dsp_budget}")
    if est.bram18k > platform.bram18k_budget:
        over.append(f"BRAM18k {est.bram18k:g} > {platform.bram18k_budget}")
    for msg in over:
        print(f"warning: over budget on {platform.name}: {msg}", file=sys.stderr)
    report["within_budget"] = not over
    _emit(json.dumps(report, indent=2), args.out)
    return EXIT_OK


def cmd_roofline(args) -> int:
    cfg = _model(args.model)
    platform = C.load_platform(args.platform)
    bw = platform_bandwidth(platform, args.brams, args.lutrams)
    if args.freq is not None:
        bw = bw * args.freq / platform.freq_mhz
    if args.layers is None:
        variants = [(cfg.n_layers, cfg)]
    else:
        if not args.layers or any(n < 1 for n in args.layers):
            raise UsageError("layer counts must be >= 1")
        variants = [(n, replace(cfg, n_enc=n, n_dec=0)) for n in args.layers]
    rows = ["layers,tiles_mha,tiles_ffn,ops,bytes,intensity,attainable_gops,bound"]
    for n, c in variants:
        for t in args.tiles or [(1, 1)]:
            p = roofline(c, _build(c, t), args.bitw, args.peak_gops, bw)
            rows.append(f"{n},{t[0]},{t[1]},{p.total_ops!r},{p.bytes_moved!r},{p.intensity!r},"
                        f"{p.attainable_gops!r},{p.bound.value}")
    _emit("\n".join(rows) + "\n", args.out)
    return EXIT_OK


def cmd_dse(args) -> int:
    cfg = _model(args.model)
    platform = C.load_platform(args.platform)
    freq_table = read_freq_table(Path(args.freq_table).read_text()) if args.freq_table else None
    points = enumerate_points(cfg, platform, args.mha_tiles, args.ffn_tiles, freq_table,
                              mode=args.mode, bitw=args.bitw, workers=args.workers)
    text = dse_csv(points)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    best = select_optimum(points)
    echo = json.dumps({"optimum": best.to_json_dict(), "platform": platform.name})
    print(echo, file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def cmd_registers(args) -> int:
    build = _read_json(args.build) if args.build else {"tiles_mha": 1, "tiles_ffn": 1}
    unknown = set(build) - set(C.TileConfig.__dataclass_fields__)
    if unknown:
        raise UsageError(f"unknown build fields {sorted(unknown)}")
    tiles = C.TileConfig(**build)
    rf = C.RegisterFile(tiles)
    scale = C.ScaleMode.SQRT_DK
    if args.model:
        cfg = _model(args.model)
        scale = cfg.scale_mode
        rf.load_config(cfg)
    for item in args.write:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--write expects name=value, got {item!r}")
        try:
            rf.write(name.strip(), int(value))
        except ValueError as e:
            if isinstance(e, C.ValueExceedsCapacity):
                raise
            raise UsageError(f"register value must be a non-negative integer: {item!r}") from None
    if args.show:
        print(json.dumps({"registers": rf.dump()}, indent=2), file=sys.stderr)
    cfg = C.model_config_from_registers(rf, scale)
    print(json.dumps(cfg.to_json_dict(), indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptor", description="Runtime-adaptive transformer accelerator model")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="functional forward pass in fixed point")
    s.add_argument("--model", required=True, help="model config JSON ('-' for stdin)")
    s.add_argument("--weights", required=True, help="tensor manifest JSON")
    s.add_argument("--input", required=True, help="SL x d_model f32le tensor")
    s.add_argument("--decoder-input", help="decoder input tensor (defaults to --input)")
    s.add_argument("--tiles", type=parse_tiles, default=(1, 1), help="M,F tile counts")
    s.add_argument("--format", default="Q8.8")
    s.add_argument("--reference", action="store_true",
                   help="write the float64 result and report its distance to fixed point")
    s.add_argument("--output", required=True)
    s.add_argument("--summary", help="write the JSON summary here instead of stdout")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="analytical latency breakdown")
    e.add_argument("--model", required=True)
    e.add_argument("--tiles", type=parse_tiles, default=(12, 6))
    e.add_argument("--mha-tile-size", type=int, help="fix the MHA span instead of deriving it")
    e.add_argument("--freq", type=positive_float, default=200.0, help="MHz")
    e.add_argument("--constants", help="pipeline constants JSON")
    e.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.OVERLAPPED.value)
    e.add_argument("--csv", action="store_true")
    e.add_argument("--validate", action="store_true", help="cross-check against the loop-nest oracle")
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    r = sub.add_parser("resources", help="DSP/BRAM estimate and bandwidth")
    r.add_argument("--model", required=True)
    r.add_argument("--tiles", type=parse_tiles, default=(12, 6))
    r.add_argument("--mha-tile-size", type=int)
    r.add_argument("--bitw", type=int, default=16)
    r.add_argument("--platform", default="u55c", help="preset name or JSON path")
    r.add_argument("--peak-gops", type=positive_float)
    r.add_argument("--out")
    r.set_defaults(func=cmd_resources)

    f = sub.add_parser("roofline", help="roofline points as CSV")
    f.add_argument("--model", required=True)
    f.add_argument("--tiles", type=parse_tiles, action="append")
    f.add_argument("--layers", type=parse_int_list, default=None, help="encoder layer counts, e.g. 1,2,12")
    f.add_argument("--peak-gops", type=float, required=True)
    f.add_argument("--platform", default="u55c")
    f.add_argument("--brams", type=float, help="override BRAM count for the bandwidth")
    f.add_argument("--lutrams", type=float, help="override LUTRAM count for the bandwidth")
    f.add_argument("--freq", type=positive_float, help="override platform MHz")
    f.add_argument("--bitw", type=int, default=16)
    f.add_argument("--out")
    f.set_defaults(func=cmd_roofline)

    d = sub.add_parser("dse", help="tile-count sweep")
    d.add_argument("--model", required=True)
    d.add_argument("--platform", default="u55c")
    d.add_argument("--mha-tiles", type=parse_int_list, default=list(range(6, 49)))
    d.add_argument("--ffn-tiles", type=parse_int_list, default=list(range(2, 7)))
    d.add_argument("--freq-table", help="CSV tiles_mha,tiles_ffn,freq_mhz")
    d.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.OVERLAPPED.value)
    d.add_argument("--bitw", type=int, default=16)
    d.add_argument("--workers", type=int, default=1)
    d.add_argument("--out", help="CSV path; the optimum then goes to stdout")
    d.set_defaults(func=cmd_dse)

    g = sub.add_parser("registers", help="write topology registers and emit the model config")
    g.add_argument("--model", help="starting config ('-' for stdin)")
    g.add_argument("--build", help="TileConfig JSON giving tiles and build maxima "
                   "(default: one tile each, default maxima)")
    g.add_argument("--write", action="append", default=[], metavar="NAME=VALUE")
    g.add_argument("--show", action="store_true", help="dump the register file to stderr")
    g.set_defaults(func=cmd_registers)
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (C.ValueExceedsCapacity, NoFeasiblePoint)):
        return EXIT_CAPACITY
    if isinstance(exc, C.ConfigError):
        capacity = any(v.startswith("capacity exceeded") for v in exc.violations)
        return EXIT_CAPACITY if capacity else EXIT_INPUT
    if isinstance(exc, OracleMismatch):
        return EXIT_INTERNAL
    if isinstance(exc, (ValueError, KeyError, OSError, ManifestError,
                        EmptyCandidates, InvalidPeak, json.JSONDecodeError)):
        return EXIT_INPUT
    return EXIT_INTERNAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
