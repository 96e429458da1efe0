"""Per-layer parameter bundles and their f32le + JSON manifest storage.

Tensor names follow ``layer{i}.<name>``:

* attention (every layer): ``head{j}.wq|wk|wv|bq|bk|bv``, ``wo``, ``bo``,
  ``ln1.gamma``, ``ln1.beta``
* feed-forward (every layer): ``w1``, ``b1``, ``w2``, ``b2``, ``ln2.gamma``, ``ln2.beta``
* cross-attention (decoder layers only): the attention names under a
  ``cross.`` prefix, with its norm as ``cross.ln.gamma``/``cross.ln.beta``

Layers ``0..n_enc-1`` are encoders, the remaining ``n_dec`` are decoders.
Biases are stored as 1-row tensors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ModelConfig


class ManifestError(Exception):
    """Malformed manifest or tensor file."""


class MissingTensor(ManifestError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"missing tensor {name!r}")


class MissingLayerWeights(ValueError):
    pass


@dataclass
class HeadWeights:
    wq: np.ndarray  # d_model x d_k
    wk: np.ndarray
    wv: np.ndarray
    bq: np.ndarray  # d_k
    bk: np.ndarray
    bv: np.ndarray


@dataclass
class AttentionWeights:
    heads: list[HeadWeights]
    wo: np.ndarray  # d_model x d_model
    bo: np.ndarray
    ln_gamma: np.ndarray
    ln_beta: np.ndarray


@dataclass
class LayerWeights:
    attn: AttentionWeights
    w1: np.ndarray  # d_model x d_hidden
    b1: np.ndarray
    w2: np.ndarray  # d_hidden x d_model
    b2: np.ndarray
    ln2_gamma: np.ndarray
    ln2_beta: np.ndarray
    cross: AttentionWeights | None = None


@dataclass
class ModelWeights:
    layers: list[LayerWeights]


def _attn_shapes(cfg: ModelConfig, prefix: str) -> dict[str, tuple[int, int]]:
    d, dk = cfg.d_model, cfg.d_model // cfg.heads
    shapes = {}
    for j in range(cfg.heads):
        for w in ("wq", "wk", "wv"):
            shapes[f"{prefix}head{j}.{w}"] = (d, dk)
        for b in ("bq", "bk", "bv"):
            shapes[f"{prefix}head{j}.{b}"] = (1, dk)
    shapes[f"{prefix}wo"] = (d, d)
    shapes[f"{prefix}bo"] = (1, d)
    return shapes


def layer_schema(cfg: ModelConfig, i: int) -> dict[str, tuple[int, int]]:
    """Tensor name -> (rows, cols) for layer ``i``."""
    d, dh = cfg.d_model, cfg.d_hidden
    s = {f"layer{i}.{k}": v for k, v in _attn_shapes(cfg, "").items()}
    s.update({
        f"layer{i}.ln1.gamma": (1, d), f"layer{i}.ln1.beta": (1, d),
        f"layer{i}.w1": (d, dh), f"layer{i}.b1": (1, dh),
        f"layer{i}.w2": (dh, d), f"layer{i}.b2": (1, d),
        f"layer{i}.ln2.gamma": (1, d), f"layer{i}.ln2.beta": (1, d),
    })
    if i >= cfg.n_enc:
        s.update({f"layer{i}.{k}": v for k, v in _attn_shapes(cfg, "cross.").items()})
        s[f"layer{i}.cross.ln.gamma"] = (1, d)
        s[f"layer{i}.cross.ln.beta"] = (1, d)
    return s


def model_schema(cfg: ModelConfig) -> dict[str, tuple[int, int]]:
    s = {}
    for i in range(cfg.n_layers):
        s.update(layer_schema(cfg, i))
    return s


def weights_from_tensors(tensors: dict[str, np.ndarray], cfg: ModelConfig) -> ModelWeights:
    """Assemble a bundle from a flat name -> array mapping, checking names and shapes."""
    layers = []
    for i in range(cfg.n_layers):
        schema = layer_schema(cfg, i)
        local = {}
        for name, shape in schema.items():
            if name not in tensors:
                raise MissingTensor(name)
            arr = np.asarray(tensors[name], dtype=np.float64)
            if arr.ndim == 1:
                arr = arr.reshape(1, -1)
            if arr.shape != shape:
                raise ManifestError(f"tensor {name!r} has shape {arr.shape}, expected {shape}")
            local[name[len(f"layer{i}."):]] = arr

        def attn(prefix, ln):
            hs = [HeadWeights(local[f"{prefix}head{j}.wq"], local[f"{prefix}head{j}.wk"],
                              local[f"{prefix}head{j}.wv"], local[f"{prefix}head{j}.bq"][0],
                              local[f"{prefix}head{j}.bk"][0], local[f"{prefix}head{j}.bv"][0])
                  for j in range(cfg.heads)]
            return AttentionWeights(hs, local[f"{prefix}wo"], local[f"{prefix}bo"][0],
                                    local[f"{ln}.gamma"][0], local[f"{ln}.beta"][0])

        layers.append(LayerWeights(
            attn=attn("", "ln1"),
            w1=local["w1"], b1=local["b1"][0], w2=local["w2"], b2=local["b2"][0],
            ln2_gamma=local["ln2.gamma"][0], ln2_beta=local["ln2.beta"][0],
            cross=attn("cross.", "cross.ln") if i >= cfg.n_enc else None,
        ))
    return ModelWeights(layers)


def weights_to_tensors(weights: ModelWeights) -> dict[str, np.ndarray]:
    out = {}

    def put_attn(i, prefix, a: AttentionWeights, ln):
        for j, h in enumerate(a.heads):
            for n in ("wq", "wk", "wv"):
                out[f"layer{i}.{prefix}head{j}.{n}"] = getattr(h, n)
            for n in ("bq", "bk", "bv"):
                out[f"layer{i}.{prefix}head{j}.{n}"] = getattr(h, n).reshape(1, -1)
        out[f"layer{i}.{prefix}wo"] = a.wo
        out[f"layer{i}.{prefix}bo"] = a.bo.reshape(1, -1)
        out[f"layer{i}.{ln}.gamma"] = a.ln_gamma.reshape(1, -1)
        out[f"layer{i}.{ln}.beta"] = a.ln_beta.reshape(1, -1)

    for i, lw in enumerate(weights.layers):
        put_attn(i, "", lw.attn, "ln1")
        out[f"layer{i}.w1"] = lw.w1
        out[f"layer{i}.b1"] = lw.b1.reshape(1, -1)
        out[f"layer{i}.w2"] = lw.w2
        out[f"layer{i}.b2"] = lw.b2.reshape(1, -1)
        out[f"layer{i}.ln2.gamma"] = lw.ln2_gamma.reshape(1, -1)
        out[f"layer{i}.ln2.beta"] = lw.ln2_beta.reshape(1, -1)
        if lw.cross is not None:
            put_attn(i, "cross.", lw.cross, "cross.ln")
    return out


def random_weights(cfg: ModelConfig, rng: np.random.Generator, scale: float = 1.0) -> ModelWeights:
    """Uniform [-scale, scale] weights and biases; LN gamma=1, beta=0."""
    tensors = {}
    for name, shape in model_schema(cfg).items():
        if name.endswith(".gamma"):
            tensors[name] = np.ones(shape)
        elif name.endswith(".beta"):
            tensors[name] = np.zeros(shape)
        else:
            tensors[name] = rng.uniform(-scale, scale, size=shape)
    return weights_from_tensors(tensors, cfg)


def zero_weights(cfg: ModelConfig) -> ModelWeights:
    tensors = {n: (np.ones(s) if n.endswith(".gamma") else np.zeros(s))
               for n, s in model_schema(cfg).items()}
    return weights_from_tensors(tensors, cfg)


# ---------------------------------------------------------------------------
# f32le files + manifest

def write_f32(path: str | Path, arr: np.ndarray):
    np.ascontiguousarray(arr, dtype="<f4").tofile(path)


def read_f32(path: str | Path, rows: int, cols: int) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"tensor file {str(path)!r} not found")
    size = path.stat().st_size
    if size != 4 * rows * cols:
        raise ManifestError(f"{path.name}: {size} bytes, expected {4 * rows * cols} for {rows}x{cols}")
    return np.fromfile(path, dtype="<f4").astype(np.float64).reshape(rows, cols)


def save_manifest(tensors: dict[str, np.ndarray], directory: str | Path,
                  name: str = "manifest.json") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for tname, arr in tensors.items():
        arr = np.atleast_2d(np.asarray(arr))
        fname = f"{tname}.bin"
        write_f32(directory / fname, arr)
        entries.append({"name": tname, "rows": int(arr.shape[0]), "cols": int(arr.shape[1]),
                        "file": fname})
    path = directory / name
    path.write_text(json.dumps({"format": "f32le", "tensors": entries}, indent=1))
    return path


def load_manifest(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"cannot read manifest {str(path)!r}: {e}") from e
    if doc.get("format") != "f32le":
        raise ManifestError(f"unsupported tensor format {doc.get('format')!r}")
    tensors = {}
    for entry in doc.get("tensors", []):
        name = entry["name"]
        if name in tensors:
            raise ManifestError(f"duplicate tensor name {name!r}")
        tensors[name] = read_f32(path.parent / entry["file"], int(entry["rows"]), int(entry["cols"]))
    return tensors


def save_weights(weights: ModelWeights, directory: str | Path) -> Path:
    return save_manifest(weights_to_tensors(weights), directory)


def load_weights(path: str | Path, cfg: ModelConfig) -> ModelWeights:
    return weights_from_tensors(load_manifest(path), cfg)
