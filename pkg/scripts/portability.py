"""Tile selection for the 200-wide, 3-head, 2-encoder model on each platform preset."""

import argparse

from adaptor.config import PRESETS, ModelConfig, load_platform
from adaptor.dse import enumerate_points, pareto, select_optimum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mode", choices=["overlapped", "sequential"], default="overlapped")
    ap.add_argument("--seq-len", type=int, default=64)
    args = ap.parse_args()

    cfg = ModelConfig(args.seq_len, 200, 3, n_enc=2)
    divisors = [t for t in range(1, 201) if 200 % t == 0]
    for name in PRESETS:
        platform = load_platform(name)
        points = enumerate_points(cfg, platform, divisors, divisors, mode=args.mode)
        best = select_optimum(points)
        print(f"{name:>7}: tiles ({best.tiles_mha:>2}, {best.tiles_ffn:>2})  "
              f"DSP {best.resources.dsps:>6.0f}/{platform.dsp_budget:<5} "
              f"BRAM18k {best.resources.bram18k:>7.1f}/{platform.bram18k_budget:<5} "
              f"latency {best.latency_ms:.3f} ms  "
              f"({sum(p.feasible for p in points)} feasible, {len(pareto(points))} on the front)")


if __name__ == "__main__":
    main()
