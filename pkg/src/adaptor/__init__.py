"""Software model of a runtime-adaptive transformer accelerator.

Fixed-point functional simulation, an analytical cycle model with a loop-nest
cross-check, resource and roofline estimates, and a tile-count sweep.
"""

from .config import (ConfigError, ModelConfig, PlatformConfig, RegisterFile, ScaleMode,
                     TileConfig, UnknownRegister, ValueExceedsCapacity, load_platform,
                     model_config_from_registers, validate_model)
from .fixedpoint import Q8_8, FixedFormat
from .accelerator import Accelerator
from .perfmodel import LatencyBreakdown, Mode, PipelineConstants, model_latency, unit_latencies
from .loopnest import loopnest_oracle
from .resources import dsp_estimate, bram_estimate, memory_bandwidth, roofline
from .dse import enumerate_points, pareto, select_optimum

__version__ = "0.1.0"

__all__ = [
    "Accelerator", "ConfigError", "FixedFormat", "LatencyBreakdown", "Mode", "ModelConfig",
    "PipelineConstants", "PlatformConfig", "Q8_8", "RegisterFile", "ScaleMode", "TileConfig",
    "UnknownRegister", "ValueExceedsCapacity", "bram_estimate", "dsp_estimate",
    "enumerate_points", "load_platform", "loopnest_oracle", "memory_bandwidth",
    "model_config_from_registers", "model_latency", "pareto", "roofline", "select_optimum",
    "unit_latencies", "validate_model",
]
