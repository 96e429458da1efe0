"""Model topology, build-time tile shape, platform budgets and the register file.

The accelerator separates two kinds of parameters:

* build-time: tile counts and capacity maxima (``TileConfig``) plus the FPGA
  budgets (``PlatformConfig``). Changing these means re-synthesis.
* runtime: the transformer topology (``ModelConfig``), written through the
  seven-entry ``RegisterFile`` without touching the build-time objects.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path


class ScaleMode(str, Enum):
    """How raw attention scores are scaled before softmax."""

    SQRT_DK = "sqrt_dk"
    EMBEDDING_DIM = "embedding_dim"


class ConfigError(ValueError):
    """Raised when a configuration fails validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UnknownRegister(KeyError):
    pass


class ValueExceedsCapacity(ValueError):
    """The value needs a larger build than the synthesized one."""


@dataclass(frozen=True)
class ModelConfig:
    seq_len: int
    d_model: int
    heads: int
    d_hidden: int | None = None
    n_enc: int = 1
    n_dec: int = 0
    out_dim: int | None = None
    scale_mode: ScaleMode = ScaleMode.SQRT_DK

    def __post_init__(self):
        if self.d_hidden is None:
            object.__setattr__(self, "d_hidden", 4 * self.d_model)
        if self.out_dim is None:
            object.__setattr__(self, "out_dim", self.d_model)
        object.__setattr__(self, "scale_mode", ScaleMode(self.scale_mode))

    @property
    def d_k(self) -> float:
        return self.d_model / self.heads

    @property
    def n_layers(self) -> int:
        return self.n_enc + self.n_dec

    def to_json_dict(self) -> dict:
        return {
            "sequence": self.seq_len,
            "heads": self.heads,
            "layers_enc": self.n_enc,
            "layers_dec": self.n_dec,
            "embeddings": self.d_model,
            "hidden": self.d_hidden,
            "out": self.out_dim,
            "scale_mode": self.scale_mode.value,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelConfig":
        expected = {"sequence", "heads", "layers_enc", "layers_dec",
                    "embeddings", "hidden", "out", "scale_mode"}
        missing = expected - d.keys()
        extra = d.keys() - expected
        if missing or extra:
            raise ValueError(
                f"model config keys mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        return cls(seq_len=int(d["sequence"]), d_model=int(d["embeddings"]),
                   heads=int(d["heads"]), d_hidden=int(d["hidden"]),
                   n_enc=int(d["layers_enc"]), n_dec=int(d["layers_dec"]),
                   out_dim=int(d["out"]), scale_mode=ScaleMode(d["scale_mode"]))


@dataclass(frozen=True)
class TileConfig:
    """Build-time tiling and capacity.

    ``tiles_mha``/``tiles_ffn`` are tile counts; spans follow the runtime
    ``d_model``. ``ts_mha`` optionally pins the MHA tile *width* instead, which
    is how the attention buffers behave when a smaller ``d_model`` runs on a
    build sized for a larger one.
    """

    tiles_mha: int = 12
    tiles_ffn: int = 6
    max_d_model: int = 768
    max_seq_len: int = 128
    max_heads: int = 16
    max_d_hidden: int = 3072
    max_layers: int = 12
    max_out: int | None = None
    ts_mha: float | None = None

    def __post_init__(self):
        if self.max_out is None:
            object.__setattr__(self, "max_out", self.max_d_model)
        for name in ("tiles_mha", "tiles_ffn", "max_d_model", "max_seq_len",
                     "max_heads", "max_d_hidden", "max_layers", "max_out"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.ts_mha is not None and self.ts_mha <= 0:
            raise ValueError("ts_mha must be > 0")

    def mha_span(self, d_model: int) -> float:
        if self.ts_mha is not None:
            return float(self.ts_mha)
        return d_model / self.tiles_mha

    def mha_tile_count(self, d_model: int) -> float:
        return d_model / self.mha_span(d_model)

    def ffn_span(self, d_model: int) -> float:
        return d_model / self.tiles_ffn

    def ffn_hidden_span(self, d_hidden: int) -> float:
        return d_hidden / self.tiles_ffn


@dataclass(frozen=True)
class PlatformConfig:
    name: str
    dsp_budget: int
    lut_budget: int
    bram18k_budget: int
    bram_width_bits: int = 36
    bram_depth: int = 1024
    lutram_count: int = 0
    lutram_width_bits: int = 32
    freq_mhz: float = 200.0

    def __post_init__(self):
        for name in ("dsp_budget", "lut_budget", "bram18k_budget", "bram_width_bits",
                     "bram_depth", "lutram_count", "lutram_width_bits"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.freq_mhz <= 0:
            raise ValueError("freq_mhz must be > 0")

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, d: dict) -> "PlatformConfig":
        expected = {f for f in cls.__dataclass_fields__}
        if set(d) != expected:
            raise ValueError(f"platform keys must be exactly {sorted(expected)}")
        return cls(**d)


PRESETS = ("u55c", "zcu102", "vc707")


def load_platform(name_or_path: str) -> PlatformConfig:
    """Load a shipped preset by name, or a platform JSON file by path."""
    if name_or_path in PRESETS:
        text = resources.files("adaptor.presets").joinpath(f"{name_or_path}.json").read_text()
    else:
        text = Path(name_or_path).read_text()
    return PlatformConfig.from_json_dict(json.loads(text))


def load_model_config(path: str | Path) -> ModelConfig:
    return ModelConfig.from_json_dict(json.loads(Path(path).read_text()))


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_failed(self):
        if self.violations:
            raise ConfigError(self.violations)


def validate_model(cfg: ModelConfig, tiles: TileConfig, exact_tiling: bool = True) -> ValidationReport:
    """Check a topology against itself and against a build.

    With ``exact_tiling`` (functional simulation) d_k and every tile span must
    be whole numbers; the analytical model passes ``False`` and only needs
    spans of at least one element.
    """
    v = []
    for name in ("seq_len", "d_model", "heads", "d_hidden", "out_dim"):
        if getattr(cfg, name) < 1:
            v.append(f"{name} must be >= 1")
    if cfg.n_enc < 0 or cfg.n_dec < 0:
        v.append("layer counts must be >= 0")
    if cfg.n_enc + cfg.n_dec < 1:
        v.append("n_enc + n_dec must be >= 1")
    if cfg.heads > cfg.d_model >= 1:
        v.append("heads > d_model")
    elif exact_tiling and cfg.heads >= 1 and cfg.d_model % cfg.heads != 0:
        v.append("d_model mod heads != 0")

    caps = [("d_model", cfg.d_model, tiles.max_d_model),
            ("seq_len", cfg.seq_len, tiles.max_seq_len),
            ("heads", cfg.heads, tiles.max_heads),
            ("d_hidden", cfg.d_hidden, tiles.max_d_hidden),
            ("n_enc", cfg.n_enc, tiles.max_layers),
            ("n_dec", cfg.n_dec, tiles.max_layers),
            ("out_dim", cfg.out_dim, tiles.max_out)]
    for name, value, cap in caps:
        if value > cap:
            v.append(f"capacity exceeded: {name}={value} > {cap}")

    if cfg.d_model >= 1:
        span_m = tiles.mha_span(cfg.d_model)
        if span_m < 1 or span_m > cfg.d_model:
            v.append(f"MHA tile span {span_m:g} outside [1, d_model]")
        elif exact_tiling and (span_m != int(span_m) or cfg.d_model % int(span_m)):
            v.append(f"d_model={cfg.d_model} not divisible into MHA tiles of {span_m:g}")
        if tiles.ffn_span(cfg.d_model) < 1:
            v.append("d_model / tiles_ffn < 1")
        elif exact_tiling and cfg.d_model % tiles.tiles_ffn:
            v.append(f"d_model={cfg.d_model} not divisible by tiles_ffn={tiles.tiles_ffn}")
    if cfg.d_hidden >= 1 and tiles.ffn_hidden_span(cfg.d_hidden) < 1:
        v.append("d_hidden / tiles_ffn < 1")
    return ValidationReport(v)


REGISTER_NAMES = ("Sequence", "Heads", "Layers_enc", "Layers_dec", "Embeddings", "Hidden", "Out")

_DEFAULTS = {"Sequence": 64, "Heads": 8, "Layers_enc": 1, "Layers_dec": 0,
             "Embeddings": 768, "Hidden": 3072, "Out": 768}


class RegisterFile:
    """The seven runtime-writable topology registers of one accelerator build."""

    def __init__(self, tiles: TileConfig):
        self.tiles = tiles
        self.maxima = {
            "Sequence": tiles.max_seq_len,
            "Heads": tiles.max_heads,
            "Layers_enc": tiles.max_layers,
            "Layers_dec": tiles.max_layers,
            "Embeddings": tiles.max_d_model,
            "Hidden": tiles.max_d_hidden,
            "Out": tiles.max_out,
        }
        self._values = {n: min(_DEFAULTS[n], self.maxima[n]) for n in REGISTER_NAMES}

    def write(self, name: str, value: int) -> "RegisterFile":
        if name not in self._values:
            raise UnknownRegister(name)
        value = int(value)
        if value < 0:
            raise ValueError(f"register {name} holds a non-negative integer, got {value}")
        if value > self.maxima[name]:
            raise ValueExceedsCapacity(
                f"{name}={value} exceeds build maximum {self.maxima[name]}; re-synthesis required")
        self._values[name] = value
        return self

    def read(self, name: str) -> int:
        if name not in self._values:
            raise UnknownRegister(name)
        return self._values[name]

    def dump(self) -> dict[str, int]:
        return dict(self._values)

    def load_config(self, cfg: ModelConfig) -> "RegisterFile":
        for name, value in config_to_registers(cfg).items():
            self.write(name, value)
        return self


def register_write(rf: RegisterFile, name: str, value: int) -> RegisterFile:
    return rf.write(name, value)


def config_to_registers(cfg: ModelConfig) -> dict[str, int]:
    return {"Sequence": cfg.seq_len, "Heads": cfg.heads, "Layers_enc": cfg.n_enc,
            "Layers_dec": cfg.n_dec, "Embeddings": cfg.d_model, "Hidden": cfg.d_hidden,
            "Out": cfg.out_dim}


def model_config_from_registers(rf: RegisterFile, scale_mode: ScaleMode = ScaleMode.SQRT_DK,
                                exact_tiling: bool = True) -> ModelConfig:
    r = rf.dump()
    cfg = ModelConfig(seq_len=r["Sequence"], d_model=r["Embeddings"], heads=r["Heads"],
                      d_hidden=r["Hidden"], n_enc=r["Layers_enc"], n_dec=r["Layers_dec"],
                      out_dim=r["Out"], scale_mode=scale_mode)
    validate_model(cfg, rf.tiles, exact_tiling=exact_tiling).raise_if_failed()
    return cfg
