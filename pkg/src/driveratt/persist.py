"""DATM model container for trained SVM and network models.

Layout, little-endian:

    magic   4 bytes  0x44 0x41 0x54 0x4D ("DATM")
    u16     version (1)
    u8      kind (0 = svm, 1 = eegnet-raw, 2 = eegnet-bands)
    u32     length-prefixed UTF-8 JSON metadata
    blobs   f64 arrays, in the order listed in the metadata's "arrays" field

Each metadata "arrays" entry is [name, shape]; the blob section concatenates
the arrays in that order. Loading validates every shape against the config
before accepting the file. Metadata JSON is canonical (sorted keys), so
identical models serialize to identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeMismatch
from .eegnet.model import EEGNetConfig, EEGNetModel
from .svm import Standardizer, SvmModel

MAGIC = b"DATM"
VERSION = 1

KIND_SVM = 0
KIND_EEGNET_RAW = 1
KIND_EEGNET_BANDS = 2

_HEADER = struct.Struct("<4sHB")


def _pack(kind: int, meta: dict, arrays: list[tuple[str, np.ndarray]]) -> bytes:
    meta = dict(meta)
    meta["arrays"] = [[name, list(arr.shape)] for name, arr in arrays]
    meta_raw = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [_HEADER.pack(MAGIC, VERSION, kind), struct.pack("<I", len(meta_raw)), meta_raw]
    for _, arr in arrays:
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def _unpack(data: bytes, path) -> tuple[int, dict, dict[str, np.ndarray]]:
    if len(data) < _HEADER.size + 4:
        raise FormatError(f"{path}: truncated header")
    magic, version, kind = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    (meta_len,) = struct.unpack_from("<I", data, _HEADER.size)
    off = _HEADER.size + 4
    meta = json.loads(data[off : off + meta_len].decode("utf-8"))
    off += meta_len
    arrays = {}
    for name, shape in meta["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if off + nbytes > len(data):
            raise FormatError(f"{path}: truncated array {name}")
        arrays[name] = np.frombuffer(data[off : off + nbytes], dtype="<f8").reshape(shape)
        off += nbytes
    if off != len(data):
        raise FormatError(f"{path}: {len(data) - off} trailing bytes")
    return kind, meta, arrays


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    import os

    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# SVM
# ---------------------------------------------------------------------------


def save_svm(model: SvmModel, path: str | Path, provenance: dict | None = None) -> None:
    meta = {
        "kernel": model.kernel,
        "gamma": model.gamma,
        "c": model.c,
        "bias": model.bias,
        "flagged": model.standardizer.flagged,
        "provenance": provenance or {},
    }
    arrays = [
        ("support_vectors", model.support_vectors),
        ("dual_coef", model.dual_coef),
        ("std_mean", model.standardizer.mean),
        ("std_scale", model.standardizer.scale),
    ]
    _atomic_write(Path(path), _pack(KIND_SVM, meta, arrays))


def load_svm(path: str | Path) -> SvmModel:
    kind, meta, arrays = _unpack(Path(path).read_bytes(), path)
    if kind != KIND_SVM:
        raise FormatError(f"{path}: kind {kind} is not an svm model")
    sv = arrays["support_vectors"]
    if sv.shape[0] == 0:
        raise FormatError(f"{path}: model has zero support vectors")
    if sv.shape[0] != arrays["dual_coef"].shape[0]:
        raise FormatError(f"{path}: support vector / coefficient count mismatch")
    if sv.shape[1] != arrays["std_mean"].shape[0]:
        raise FormatError(f"{path}: feature dimension mismatch")
    return SvmModel(
        support_vectors=sv,
        dual_coef=arrays["dual_coef"],
        bias=float(meta["bias"]),
        kernel=meta["kernel"],
        gamma=float(meta["gamma"]),
        c=float(meta["c"]),
        standardizer=Standardizer(
            mean=arrays["std_mean"],
            scale=arrays["std_scale"],
            flagged=[int(i) for i in meta["flagged"]],
        ),
    )


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------


def save_eegnet(model: EEGNetModel, path: str | Path, kind: int = KIND_EEGNET_RAW,
                provenance: dict | None = None) -> None:
    if kind not in (KIND_EEGNET_RAW, KIND_EEGNET_BANDS):
        raise ValueError(f"bad network kind {kind}")
    meta = {
        "config": model.config.to_dict(),
        "seed": model.seed,
        "provenance": provenance or {},
    }
    arrays = [(name, arr) for name, arr in model.parameters().items()]
    arrays += [(name, arr) for name, arr in model.bn_state().items()]
    _atomic_write(Path(path), _pack(kind, meta, arrays))


def load_eegnet(path: str | Path) -> tuple[EEGNetModel, int]:
    kind, meta, arrays = _unpack(Path(path).read_bytes(), path)
    if kind not in (KIND_EEGNET_RAW, KIND_EEGNET_BANDS):
        raise FormatError(f"{path}: kind {kind} is not a network model")
    cfg = EEGNetConfig.from_dict(meta["config"])
    model = EEGNetModel(cfg, seed=int(meta["seed"]))
    expected = dict(model.parameters())
    expected.update(model.bn_state())
    for name, arr in expected.items():
        if name not in arrays:
            raise FormatError(f"{path}: missing array {name}")
        if tuple(arrays[name].shape) != arr.shape:
            raise FormatError(
                f"{path}: array {name} has shape {arrays[name].shape}, "
                f"config requires {arr.shape}"
            )
    try:
        for name in model.parameters():
            model.set_parameter(name, arrays[name])
        for lname, layer in model._layers:
            if hasattr(layer, "state_items"):
                layer.running_mean = arrays[f"{lname}.running_mean"].copy()
                layer.running_var = arrays[f"{lname}.running_var"].copy()
    except ShapeMismatch as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return model, kind
