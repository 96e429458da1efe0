"""Print the analytical SA/LWA/FFN1 latencies and DSPs for the four validation builds."""

import argparse

from adaptor.config import ModelConfig, TileConfig
from adaptor.perfmodel import PipelineConstants, model_latency
from adaptor.resources import bram_estimate, dsp_estimate

# SL, d_model, heads, MHA tile size, FFN tiles, MHz, printed SA/LWA/FFN1 (ms), printed DSPs
ROWS = [
    (64, 768, 8, 64, 6, 200, (0.052, 0.037, 0.082), 3784),
    (128, 768, 8, 64, 6, 200, (0.103, 0.037, 0.165), 3784),
    (64, 512, 8, 64, 6, 200, (0.042, 0.025, 0.055), 3784),
    (64, 768, 8, 128, 4, 135, (0.11, 0.10, 0.18), 6272),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--op-overhead", type=float, default=2)
    ap.add_argument("--pd-load", type=float, default=13)
    args = ap.parse_args()
    k = PipelineConstants(pd_load=args.pd_load, op_overhead=args.op_overhead)

    print(f"{'SL':>4} {'d':>4} {'h':>2} {'unit':>5} {'model ms':>10} {'printed':>8} {'err %':>6}")
    for sl, d, h, ts, tf, freq, printed, dsp_printed in ROWS:
        cfg = ModelConfig(sl, d, h)
        tiles = TileConfig(tiles_ffn=tf, ts_mha=ts)
        b = model_latency(cfg, tiles, k, freq_mhz=freq)
        for unit, want in zip(("SA", "LWA", "FFN1"), printed):
            got = b.ms(unit)
            print(f"{sl:>4} {d:>4} {h:>2} {unit:>5} {got:>10.5f} {want:>8} {100 * abs(got - want) / want:>6.2f}")
        # resources use the tile-count build (MHA span d/tiles)
        rtiles = TileConfig(tiles_mha=round(d / ts), tiles_ffn=tf)
        print(f"{'':>14} DSPs {dsp_estimate(cfg, rtiles).dsps:g} (printed {dsp_printed}), "
              f"BRAM18k {bram_estimate(cfg, rtiles).bram18k:g}")


if __name__ == "__main__":
    main()
