"""File formats: JSON model documents, IDX datasets, key/value config files."""

from __future__ import annotations

import gzip
import json
import struct
from pathlib import Path

import numpy as np

from .blocks import ImageSpec
from .models import MLP, Layer, LabeledDataset, SoftmaxRegression

MODEL_SCHEMA = "blockattack.model/1"
CONFIG_SCHEMA = "1"
IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


class FormatError(IOError):
    """Malformed file. Message carries the path and byte offset when known."""


# -- models -----------------------------------------------------------------

def model_to_dict(model: MLP) -> dict:
    doc = {
        "schema": MODEL_SCHEMA,
        "kind": "softmax_regression" if isinstance(model, SoftmaxRegression) else "mlp",
        "layers": [
            {
                "shape": list(W.shape),
                "weights": W.reshape(-1).tolist(),
                "bias": b.tolist(),
                "activation": act,
            }
            for W, b, act in model.layers
        ],
    }
    if model.spec is not None:
        s = model.spec
        doc["input"] = {"height": s.height, "width": s.width, "channels": s.channels,
                        "lo": s.lo, "hi": s.hi}
    return doc


def model_from_dict(doc: dict, source="<dict>") -> MLP:
    if doc.get("schema") != MODEL_SCHEMA:
        raise FormatError(f"{source}: unsupported model schema {doc.get('schema')!r}")
    try:
        layers = []
        for i, L in enumerate(doc["layers"]):
            rows, cols = L["shape"]
            W = np.array(L["weights"], dtype=float)
            if W.size != rows * cols:
                raise FormatError(f"{source}: layer {i} has {W.size} weights, shape says {rows}x{cols}")
            layers.append(Layer(W.reshape(rows, cols), np.array(L["bias"], dtype=float), L["activation"]))
        spec = ImageSpec(**doc["input"]) if "input" in doc else None
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{source}: malformed model document ({exc})") from exc
    if doc.get("kind") == "softmax_regression" and len(layers) == 1:
        return SoftmaxRegression(layers[0].weight, layers[0].bias, spec)
    return MLP(layers, spec)


def save_model(model: MLP, path):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> MLP:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at offset {exc.pos}") from exc
    return model_from_dict(doc, source=str(path))


# -- IDX --------------------------------------------------------------------
# Big-endian header: magic (u32), then one u32 per dimension, then raw bytes.

def _open(path, mode):
    return gzip.open(path, mode) if str(path).endswith(".gz") else open(path, mode)


def _read_idx(path, magic, ndim):
    with _open(path, "rb") as fh:
        raw = fh.read()
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated header at offset {len(raw)}")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise FormatError(f"{path}: bad magic 0x{found:08x} at offset 0, expected 0x{magic:08x}")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header != count:
        raise FormatError(f"{path}: expected {count} data bytes after offset {header}, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def read_idx_images(path):
    """(n, rows, cols) uint8 array."""
    return _read_idx(path, IDX_IMAGES, 3)


def read_idx_labels(path):
    return _read_idx(path, IDX_LABELS, 1)


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    with _open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES, *images.shape))
        fh.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with _open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS, len(labels)))
        fh.write(labels.tobytes())


def load_idx_dataset(images_path, labels_path) -> LabeledDataset:
    imgs = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(imgs) != len(labels):
        raise FormatError(f"{images_path}: {len(imgs)} images but {len(labels)} labels")
    n, h, w = imgs.shape
    flat = imgs.reshape(n, h * w).astype(float) / 255.0
    return LabeledDataset(flat, labels.astype(np.int64), ImageSpec(h, w, 1))


def save_idx_dataset(data: LabeledDataset, images_path, labels_path):
    """Quantises pixels to bytes (x * 255, rounded); single-channel only."""
    s = data.spec
    if s.channels != 1:
        raise FormatError("IDX images are single-channel")
    scaled = (data.images - s.lo) / (s.hi - s.lo)
    write_idx_images(images_path, np.rint(scaled * 255).reshape(len(data), s.height, s.width))
    write_idx_labels(labels_path, data.labels)


# -- key/value config ---------------------------------------------------------

def read_config(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. A
    ``schema_version`` key is required. Values stay strings."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key.replace("-", "_")] = value
    if out.get("schema_version") != CONFIG_SCHEMA:
        raise FormatError(f"{path}: schema_version must be {CONFIG_SCHEMA}")
    return out


def write_config(path, values: dict):
    lines = [f"schema_version = {CONFIG_SCHEMA}"]
    lines += [f"{k} = {v}" for k, v in values.items() if k != "schema_version"]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
