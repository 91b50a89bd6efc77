"""Versioned binary model artifacts.

Layout (little-endian, see ``docs/format.md``)::

    magic "PIF1" | u32 format_version | u32 section count
    per section: u16 name length | name | u8 kind | u64 payload length | payload
    sha256 digest of all preceding bytes (32 bytes)

Section kinds: ``0`` canonical JSON, ``1`` ndarray
(``u8 dtype | u8 ndim | ndim x u64 shape | raw data``).
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .baselines import IForParams, IsolationForest, LocalOutlierFactor, LofParams, _AxisTree
from .detector import PreferenceIsolationForest
from .errors import ArtifactError, ArtifactIOError, CorruptArtifact, VersionMismatch
from .forest import PifParams, PiForest, _FlatTree
from .geometry import ModelFamily, ModelInstance
from .preference import EmbeddingConfig

__all__ = ["MAGIC", "FORMAT_VERSION", "dumps", "loads", "save_model", "load_model"]

MAGIC = b"PIF1"
FORMAT_VERSION = 1
_DIGEST = 32
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<i8")}
_DTYPE_CODES = {np.dtype("<f8"): 0, np.dtype("<i8"): 1}


def _json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _array_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    dtype = np.dtype("<f8") if arr.dtype.kind == "f" else np.dtype("<i8")
    arr = np.ascontiguousarray(arr, dtype=dtype)
    head = struct.pack("<BB", _DTYPE_CODES[dtype], arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + arr.tobytes()


def _encode(sections: dict[str, object]) -> bytes:
    out = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(sections))]
    for name, value in sections.items():
        if isinstance(value, np.ndarray):
            kind, payload = 1, _array_bytes(value)
        else:
            kind, payload = 0, _json_bytes(value)
        key = name.encode()
        out.append(struct.pack("<H", len(key)) + key)
        out.append(struct.pack("<BQ", kind, len(payload)))
        out.append(payload)
    body = b"".join(out)
    return body + hashlib.sha256(body).digest()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptArtifact("artifact is truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _decode(data: bytes) -> dict[str, object]:
    if len(data) < 12 or data[:4] != MAGIC:
        raise CorruptArtifact("not a model artifact (bad magic bytes)")
    (version,) = struct.unpack("<I", data[4:8])
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"artifact format version {version} is not supported; "
            f"this build reads version {FORMAT_VERSION}"
        )
    if len(data) < 12 + _DIGEST:
        raise CorruptArtifact("artifact is truncated")
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptArtifact("checksum mismatch (artifact truncated or modified)")
    reader = _Reader(body)
    reader.take(8)
    (count,) = reader.unpack("<I")
    sections = {}
    try:
        for _ in range(count):
            (name_len,) = reader.unpack("<H")
            name = reader.take(name_len).decode()
            kind, length = reader.unpack("<BQ")
            payload = _Reader(reader.take(length))
            if kind == 0:
                sections[name] = json.loads(payload.data)
            elif kind == 1:
                code, ndim = payload.unpack("<BB")
                shape = payload.unpack(f"<{ndim}Q")
                raw = payload.take(len(payload.data) - payload.pos)
                sections[name] = np.frombuffer(raw, dtype=_DTYPES[code]).reshape(shape).copy()
            else:
                raise CorruptArtifact(f"unknown section kind {kind}")
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise CorruptArtifact(f"malformed section: {exc}") from None
    if reader.pos != len(body):
        raise CorruptArtifact("trailing bytes after last section")
    return sections


# -- model <-> sections -----------------------------------------------------


def _forest_sections(forest: PiForest) -> dict[str, object]:
    flats = [tree.flat for tree in forest.trees]
    offsets = np.cumsum([0] + [f.sizes.size for f in flats])
    return {
        "forest": {
            "params": {
                "t": forest.params.t, "psi": forest.params.psi, "b": forest.params.b,
                "height_limit": forest.params.height_limit,
                "metric": forest.params.metric, "rng_seed": forest.params.rng_seed,
            },
            "sample_size": forest.sample_size,
        },
        "seed_bank": forest.seed_bank,
        "tree_offsets": offsets,
        "node_seeds": np.concatenate([f.seeds for f in flats]),
        "node_children": np.concatenate([f.children for f in flats]),
        "node_sizes": np.concatenate([f.sizes for f in flats]),
        "node_depth": np.concatenate([f.depth for f in flats]),
    }


def _forest_from(sections) -> PiForest:
    meta = sections["forest"]
    params = PifParams(**meta["params"])
    off = sections["tree_offsets"]
    roots = []
    for lo, hi in zip(off[:-1], off[1:]):
        flat = _FlatTree(
            sections["node_seeds"][lo:hi],
            sections["node_children"][lo:hi],
            sections["node_sizes"][lo:hi],
            sections["node_depth"][lo:hi],
        )
        roots.append(flat.to_root())
    return PiForest(roots, sections["seed_bank"], params, meta["sample_size"])


def model_sections(model) -> dict[str, object]:
    if isinstance(model, PiForest):
        return {"header": {"method": "pif-forest"}, **_forest_sections(model)}
    if isinstance(model, PreferenceIsolationForest):
        if model.forest_ is None:
            raise ArtifactError("cannot save an unfitted detector")
        e = model.embedding
        return {
            "header": {"method": "pif"},
            "embedding": {
                "family": model.family.value, "sigma": e.sigma,
                "pool_multiplier": e.pool_multiplier, "binarize": e.binarize,
                "rng_seed": e.rng_seed, "phi_exponent": e.phi_exponent,
            },
            "pool": model.pool_params,
            **_forest_sections(model.forest_),
        }
    if isinstance(model, IsolationForest):
        trees = model.trees
        return {
            "header": {"method": "ifor"},
            "ifor": {
                "params": {"t": model.params.t, "psi": model.params.psi,
                           "rng_seed": model.params.rng_seed},
                "sample_size": model.sample_size, "n_features": model.n_features,
            },
            "tree_offsets": np.cumsum([0] + [t.size.size for t in trees]),
            "feature": np.concatenate([t.feature for t in trees]),
            "threshold": np.concatenate([t.threshold for t in trees]),
            "left": np.concatenate([t.left for t in trees]),
            "right": np.concatenate([t.right for t in trees]),
            "size": np.concatenate([t.size for t in trees]),
            "depth": np.concatenate([t.depth for t in trees]),
        }
    if isinstance(model, LocalOutlierFactor):
        if model.train_ is None:
            raise ArtifactError("cannot save an unfitted LOF model")
        return {
            "header": {"method": "lof"},
            "lof": {"k": model.params.k, "metric": model.params.metric},
            "train": model.train_,
        }
    raise ArtifactError(f"cannot serialize {type(model).__name__}")


def model_from_sections(sections):
    try:
        method = sections["header"]["method"]
        if method == "pif-forest":
            return _forest_from(sections)
        if method == "pif":
            e = sections["embedding"]
            det = PreferenceIsolationForest(
                e["family"],
                EmbeddingConfig(e["sigma"], e["pool_multiplier"], e["binarize"],
                                e["rng_seed"], e["phi_exponent"]),
            )
            family = ModelFamily.parse(e["family"])
            det.pool_ = [ModelInstance(family, tuple(map(float, row))) for row in sections["pool"]]
            det.forest_ = _forest_from(sections)
            det.params = det.forest_.params
            return det
        if method == "ifor":
            meta = sections["ifor"]
            model = IsolationForest(IForParams(**meta["params"]))
            model.sample_size = meta["sample_size"]
            model.n_features = meta["n_features"]
            off = sections["tree_offsets"]
            names = ("feature", "threshold", "left", "right", "size", "depth")
            model.trees = [
                _AxisTree(*(sections[n][lo:hi] for n in names))
                for lo, hi in zip(off[:-1], off[1:])
            ]
            return model
        if method == "lof":
            return LocalOutlierFactor(LofParams(**sections["lof"])).fit(sections["train"])
    except KeyError as exc:
        raise CorruptArtifact(f"missing section or field {exc}") from None
    except (IndexError, TypeError, ValueError) as exc:
        raise CorruptArtifact(f"inconsistent model sections: {exc}") from None
    raise CorruptArtifact(f"unknown method {method!r}")


def dumps(model) -> bytes:
    return _encode(model_sections(model))


def loads(data: bytes):
    return model_from_sections(_decode(data))


def save_model(model, path: str | Path) -> None:
    data = dumps(model)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc


def load_model(path: str | Path):
    """Load a model written by :func:`save_model`.

    Raises ``CorruptArtifact`` for truncated or modified files and
    ``VersionMismatch`` for unsupported format versions.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    return loads(data)
