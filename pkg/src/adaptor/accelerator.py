"""A synthesized accelerator instance driven through its register file."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import RegisterFile, ScaleMode, TileConfig, model_config_from_registers
from .datapath import Datapath, FixedArithmetic, RealArithmetic
from .fixedpoint import Q8_8, FixedFormat
from .weights import ModelWeights


@dataclass
class RunResult:
    output: np.ndarray  # dequantized, float64
    wall_time_s: float


class Accelerator:
    """Build-time state (tiles, number format) is fixed at construction;
    the topology is read from the registers at every :meth:`run`."""

    def __init__(self, tiles: TileConfig, fmt: FixedFormat = Q8_8,
                 scale_mode: ScaleMode = ScaleMode.SQRT_DK, eps: float = 1e-5):
        self.tiles = tiles
        self.fmt = fmt
        self.scale_mode = scale_mode
        self.eps = eps
        self.registers = RegisterFile(tiles)

    def write(self, name: str, value: int):
        self.registers.write(name, value)

    @property
    def config(self):
        return model_config_from_registers(self.registers, self.scale_mode)

    def run(self, x, weights: ModelWeights, x_dec=None, reference: bool = False) -> RunResult:
        cfg = self.config
        arith = RealArithmetic() if reference else FixedArithmetic(self.fmt)
        dp = Datapath(arith, self.tiles, self.scale_mode, self.eps)
        start = time.perf_counter()
        out = dp.model_forward(arith.encode(x), weights, cfg,
                               None if x_dec is None else arith.encode(x_dec))
        elapsed = time.perf_counter() - start
        return RunResult(arith.decode(out), elapsed)
