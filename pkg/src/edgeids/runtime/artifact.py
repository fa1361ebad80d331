"""Versioned little-endian model files.

Layout (all integers little-endian)::

    offset  size  field
    0       4     magic  b"HAMS"
    4       2     u16 format version (1)
    6       1     u8 kind: 0 RF, 1 GBDT leaf-wise, 2 GBDT level-wise, 3 CNN
    7       4     u32 CRC-32 of the payload
    11      4     u32 payload length in bytes
    15      ...   payload

    payload = u32 meta_len | meta (UTF-8 JSON) | body

Tree body: u32 n_trees, then per tree an 8-byte header (u32 n_nodes,
i32 class_tag) followed by n_nodes 16-byte records
(i32 feature, f32 threshold-or-leaf-value, i32 left, i32 right).
CNN body: u32 n_values followed by float32 parameters in architecture order.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from ..cnn.arch import CnnArch
from ..cnn.model import CnnModel
from ..dataio import ScalerParams
from ..hwcost import HardwareProfile, profile_cnn, profile_tree_ensemble
from ..trees._tree import LEAF, Tree, TreeEnsemble
from ..trees.params import Family, TreeHyperParams

MAGIC = b"HAMS"
VERSION = 1
HEADER = struct.Struct("<4sHBII")
NODE = np.dtype([("feature", "<i4"), ("value", "<f4"), ("left", "<i4"), ("right", "<i4")])
TREE_HEADER = struct.Struct("<Ii")

KIND_CODES = {"RF": 0, "GBDT_LEAFWISE": 1, "GBDT_LEVELWISE": 2, "CNN": 3}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}


class ArtifactError(ValueError):
    pass


class BadMagicError(ArtifactError):
    pass


class VersionError(ArtifactError):
    pass


class ChecksumError(ArtifactError):
    pass


class TruncatedError(ArtifactError):
    pass


class ShapeError(ArtifactError):
    pass


Model = Union[TreeEnsemble, CnnModel]


@dataclass(frozen=True)
class ModelArtifact:
    """A trained model plus everything needed to run it on raw features."""

    model: Model
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]
    scaler: ScalerParams | None = None
    profile: HardwareProfile | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.profile is None:
            object.__setattr__(self, "profile", profile_model(self.model))
        if self.scaler is not None and self.scaler.feature_names != self.feature_names:
            raise ArtifactError("scaler feature names differ from artifact feature names")
        if len(self.feature_names) != _input_width(self.model):
            raise ArtifactError("feature name count does not match model input width")
        if len(self.class_names) != _n_classes(self.model):
            raise ArtifactError("class name count does not match model output width")

    @property
    def kind(self) -> str:
        if isinstance(self.model, CnnModel):
            return "CNN"
        return self.model.family.value

    @property
    def descriptor(self) -> dict:
        if isinstance(self.model, CnnModel):
            return self.model.arch.to_dict()
        hp = self.model.hyperparams
        return hp.to_dict() if hp is not None else {"family": self.kind}

    def predict_proba(self, X) -> np.ndarray:
        """Probabilities for raw (unscaled) feature rows."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return self.model.predict_proba(X)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_bytes(self) -> bytes:
        return save_model(self)

    def save(self, path) -> None:
        Path(path).write_bytes(save_model(self))

    @classmethod
    def load(cls, path) -> "ModelArtifact":
        return load_model(Path(path).read_bytes())


def _input_width(m: Model) -> int:
    return m.arch.input_len if isinstance(m, CnnModel) else m.n_features


def _n_classes(m: Model) -> int:
    return m.arch.n_classes if isinstance(m, CnnModel) else m.n_classes


def profile_model(m: Model) -> HardwareProfile:
    return profile_cnn(m.arch) if isinstance(m, CnnModel) else profile_tree_ensemble(m)


def _tree_body(m: TreeEnsemble) -> bytes:
    parts = [struct.pack("<I", len(m.trees))]
    for t in m.trees:
        rec = np.empty(t.n_nodes, dtype=NODE)
        rec["feature"] = t.feature
        rec["value"] = np.where(t.is_leaf, t.value, t.threshold)
        rec["left"] = t.left
        rec["right"] = t.right
        parts.append(TREE_HEADER.pack(t.n_nodes, t.class_tag))
        parts.append(rec.tobytes())
    return b"".join(parts)


def save_model(a: ModelArtifact) -> bytes:
    meta = {
        "feature_names": list(a.feature_names),
        "class_names": list(a.class_names),
        "scaler": a.scaler.to_dict() if a.scaler is not None else None,
        "profile": a.profile.to_dict(),
        "descriptor": a.descriptor,
        "extra": a.meta,
    }
    if isinstance(a.model, CnnModel):
        flat = a.model.flat_params()
        body = struct.pack("<I", flat.size) + flat.astype("<f4").tobytes()
    else:
        meta["n_classes"] = a.model.n_classes
        meta["n_features"] = a.model.n_features
        meta["learning_rate"] = a.model.learning_rate
        body = _tree_body(a.model)
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    payload = struct.pack("<I", len(meta_bytes)) + meta_bytes + body
    head = HEADER.pack(MAGIC, VERSION, KIND_CODES[a.kind], zlib.crc32(payload), len(payload))
    return head + payload


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ShapeError("payload ends before its declared contents")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))


_U32 = struct.Struct("<I")


def _read_trees(r: _Reader, kind: str, meta: dict) -> TreeEnsemble:
    (n_trees,) = r.unpack(_U32)
    trees = []
    n_features, n_classes = int(meta["n_features"]), int(meta["n_classes"])
    for _ in range(n_trees):
        n_nodes, tag = r.unpack(TREE_HEADER)
        rec = np.frombuffer(r.take(n_nodes * NODE.itemsize), dtype=NODE)
        leaf = rec["feature"] == LEAF
        t = Tree(
            rec["feature"].copy(),
            np.where(leaf, 0.0, rec["value"]).astype(np.float32),
            rec["left"].copy(),
            rec["right"].copy(),
            np.where(leaf, rec["value"], 0.0).astype(np.float32),
            class_tag=int(tag),
        )
        try:
            t.validate()
        except ValueError as exc:
            raise ShapeError(f"malformed tree: {exc}") from exc
        if np.any(rec["feature"][~leaf] >= n_features) or not -1 <= tag < n_classes:
            raise ShapeError("tree references a feature or class outside the model")
        trees.append(t)
    desc = dict(meta["descriptor"])
    hp = TreeHyperParams.from_dict(desc) if "n_trees" in desc else None
    return TreeEnsemble(Family(kind), trees, n_classes, n_features,
                        learning_rate=float(meta["learning_rate"]), hyperparams=hp)


def load_model(data: bytes) -> ModelArtifact:
    """Parse and validate a model file; each failure mode raises its own error type."""
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError("not a model file (bad magic)")
    if len(data) < HEADER.size:
        raise TruncatedError("file shorter than the header")
    _, version, kind_code, crc, length = HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionError(f"unsupported format version {version} (reader handles {VERSION})")
    payload = data[HEADER.size :]
    if len(payload) < length:
        raise TruncatedError(f"payload is {len(payload)} bytes, header declares {length}")
    if len(payload) > length:
        raise ShapeError("trailing bytes after payload")
    if zlib.crc32(payload) != crc:
        raise ChecksumError("payload checksum mismatch")
    if kind_code not in KIND_NAMES:
        raise ShapeError(f"unknown model kind {kind_code}")
    kind = KIND_NAMES[kind_code]
    r = _Reader(payload)
    (meta_len,) = r.unpack(_U32)
    meta = json.loads(r.take(meta_len).decode("utf-8"))
    if kind == "CNN":
        arch = CnnArch.from_dict(meta["descriptor"])
        (n,) = r.unpack(_U32)
        flat = np.frombuffer(r.take(4 * n), dtype="<f4")
        try:
            model = CnnModel.from_flat(arch, flat)
        except ValueError as exc:
            raise ShapeError(str(exc)) from exc
    else:
        model = _read_trees(r, kind, meta)
    if r.pos != len(payload):
        raise ShapeError("unread bytes at end of payload")
    scaler = ScalerParams.from_dict(meta["scaler"]) if meta.get("scaler") else None
    return ModelArtifact(
        model,
        tuple(meta["feature_names"]),
        tuple(meta["class_names"]),
        scaler=scaler,
        profile=HardwareProfile.from_dict(meta["profile"]),
        meta=meta.get("extra") or {},
    )


def read_artifact(path) -> ModelArtifact:
    return load_model(Path(path).read_bytes())
