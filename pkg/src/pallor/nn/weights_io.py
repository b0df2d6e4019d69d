"""Portable weights files.

Binary layout (little-endian):

    bytes 0..8    magic "PALLOR-NN"
    uint32        format version (currently 1)
    uint32        header length in bytes
    header        UTF-8 JSON: {"spec": NetworkSpec, "standardization":
                  {"mean": [...], "std": [...]} | null, "param_count": N}
    N float64     parameters, in layer order, weights before bias, row-major

A JSON twin (same content, parameters as a JSON list) is accepted and
produced for cross-language debugging; loaders sniff the first byte.
Round-tripping either format reproduces bit-identical predictions: float64
is stored exactly in binary and via shortest-repr decimal in JSON.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..errors import WeightsFormatError, WeightsSpecMismatchError
from .network import Network, NetworkSpec, init_network

__all__ = ["Standardization", "save_weights", "load_weights", "file_model_id"]

MAGIC = b"PALLOR-NN"
VERSION = 1


@dataclass(frozen=True)
class Standardization:
    """Per-feature input standardization constants stored with a model."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - np.asarray(self.mean)) / np.asarray(self.std)

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, d: dict | None) -> "Standardization | None":
        if d is None:
            return None
        return cls(mean=tuple(float(v) for v in d["mean"]),
                   std=tuple(float(v) for v in d["std"]))


def _header_dict(net: Network, standardization: Standardization | None) -> dict:
    return {
        "spec": net.spec.to_dict(),
        "standardization": None if standardization is None else standardization.to_dict(),
        "param_count": net.param_count(),
    }


def encode_weights(
    net: Network, standardization: Standardization | None = None, fmt: str = "binary"
) -> bytes:
    if fmt == "binary":
        header = json.dumps(_header_dict(net, standardization)).encode("utf-8")
        parts = [
            MAGIC,
            np.uint32(VERSION).tobytes(),
            np.uint32(len(header)).tobytes(),
            header,
            net.flat_params().astype("<f8").tobytes(),
        ]
        return b"".join(parts)
    if fmt == "json":
        doc = {
            "magic": MAGIC.decode("ascii"),
            "version": VERSION,
            **_header_dict(net, standardization),
            "params": net.flat_params().tolist(),
        }
        return json.dumps(doc, indent=1).encode("utf-8")
    raise ValueError(f"fmt must be 'binary' or 'json', got {fmt!r}")


def save_weights(
    net: Network,
    path,
    standardization: Standardization | None = None,
    fmt: str | None = None,
) -> str:
    """Write the weights file and return its content hash (the model id).

    ``fmt`` defaults to JSON for ``.json`` paths and binary otherwise.
    """
    if fmt is None:
        fmt = "json" if str(path).endswith(".json") else "binary"
    blob = encode_weights(net, standardization, fmt)
    with open(path, "wb") as fh:
        fh.write(blob)
    return hashlib.sha256(blob).hexdigest()


def _restore(spec_dict: dict, flat: np.ndarray, expected: int) -> Network:
    spec = NetworkSpec.from_dict(spec_dict)
    net = init_network(spec)  # establishes shapes; values overwritten below
    if net.param_count() != expected or flat.size != expected:
        raise WeightsFormatError(
            f"parameter count mismatch: header says {expected}, spec needs "
            f"{net.param_count()}, file holds {flat.size}"
        )
    offset = 0
    for i, group in enumerate(net.params):
        new_group = []
        for p in group:
            chunk = flat[offset : offset + p.size]
            offset += p.size
            new_group.append(np.array(chunk, dtype=np.float64).reshape(p.shape))
        net.params[i] = tuple(new_group)
    return net


def decode_weights(blob: bytes) -> tuple[Network, Standardization | None]:
    if blob.startswith(MAGIC):
        pos = len(MAGIC)
        if len(blob) < pos + 8:
            raise WeightsFormatError("weights file truncated inside the fixed header")
        version = int(np.frombuffer(blob, "<u4", count=1, offset=pos)[0])
        if version != VERSION:
            raise WeightsFormatError(f"unsupported weights format version {version}")
        header_len = int(np.frombuffer(blob, "<u4", count=1, offset=pos + 4)[0])
        pos += 8
        if len(blob) < pos + header_len:
            raise WeightsFormatError("weights file truncated inside the JSON header")
        try:
            header = json.loads(blob[pos : pos + header_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise WeightsFormatError(f"unreadable weights header: {exc}") from exc
        pos += header_len
        expected = int(header["param_count"])
        body = blob[pos:]
        if len(body) != 8 * expected:
            raise WeightsFormatError(
                f"weights file holds {len(body)} parameter bytes, expected {8 * expected}"
            )
        flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    else:
        try:
            doc = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise WeightsFormatError(
                "not a weights file: bad magic and not JSON"
            ) from exc
        if doc.get("magic") != MAGIC.decode("ascii"):
            raise WeightsFormatError(f"bad magic string {doc.get('magic')!r}")
        if doc.get("version") != VERSION:
            raise WeightsFormatError(f"unsupported weights format version {doc.get('version')}")
        header = doc
        expected = int(doc["param_count"])
        flat = np.asarray(doc["params"], dtype=np.float64)
    net = _restore(header["spec"], flat, expected)
    return net, Standardization.from_dict(header.get("standardization"))


def load_weights(
    path, expected_spec: NetworkSpec | None = None
) -> tuple[Network, Standardization | None, str]:
    """Read a weights file; returns (network, standardization, model id)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    net, standardization = decode_weights(blob)
    if expected_spec is not None and net.spec != expected_spec:
        raise WeightsSpecMismatchError(
            f"weights file holds spec {net.spec.to_dict()}, expected {expected_spec.to_dict()}"
        )
    return net, standardization, hashlib.sha256(blob).hexdigest()


def file_model_id(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
