"""Sweep MHA/FFN tile counts for a model and write the grid as CSV.

Optionally reads a measured frequency table (tiles_mha, tiles_ffn, freq_mhz)
so the optimum reflects clock degradation at large tiles.
"""

import argparse
import sys
from pathlib import Path

from adaptor.config import ModelConfig, load_platform
from adaptor.dse import enumerate_points, read_freq_table, select_optimum, to_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seq-len", type=int, default=64)
    ap.add_argument("--d-model", type=int, default=768)
    ap.add_argument("--heads", type=int, default=8)
    ap.add_argument("--layers", type=int, default=12)
    ap.add_argument("--platform", default="u55c")
    ap.add_argument("--mha", default="6-48", help="range lo-hi")
    ap.add_argument("--ffn", default="2-6", help="range lo-hi")
    ap.add_argument("--freq-table")
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    def rng(text):
        lo, hi = (int(x) for x in text.split("-"))
        return range(lo, hi + 1)

    cfg = ModelConfig(args.seq_len, args.d_model, args.heads, n_enc=args.layers)
    platform = load_platform(args.platform)
    table = read_freq_table(Path(args.freq_table).read_text()) if args.freq_table else None
    points = enumerate_points(cfg, platform, rng(args.mha), rng(args.ffn), table, workers=args.workers)
    text = to_csv(points)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    feasible = [p for p in points if p.feasible]
    print(f"{len(feasible)}/{len(points)} points fit {platform.name}", file=sys.stderr)
    if feasible:
        best = select_optimum(points)
        print(f"optimum: tiles ({best.tiles_mha}, {best.tiles_ffn}), {best.latency_ms:.3f} ms, "
              f"{best.resources.dsps:g} DSPs", file=sys.stderr)


if __name__ == "__main__":
    main()
