"""On-disk formats: TMNF feature files, TSV manifests, key=value configs,
checkpoints and JSON-lines metrics.

TMNF layout (little-endian): b"TMNF", u32 version (=1), u32 h, u32 d, then
h*d float32 values in row-major order.

Checkpoint layout: b"TMNC", u32 version (=1), u32 header length, a UTF-8
JSON header (metadata plus a tensor directory of name/rows/cols/offset),
then each tensor as a TMNF blob; offsets count from the end of the header.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataError, FormatError, ShapeError

TMNF_MAGIC = b"TMNF"
CKPT_MAGIC = b"TMNC"
VERSION = 1
_HEADER = struct.Struct("<4sIII")

ROLES = ("source", "target-train", "target-test")


# ----- TMNF -----

def encode_matrix(matrix: np.ndarray) -> bytes:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ShapeError(f"TMNF stores 2-D matrices, got shape {matrix.shape}")
    h, d = matrix.shape
    return _HEADER.pack(TMNF_MAGIC, VERSION, h, d) + np.ascontiguousarray(matrix, dtype="<f4").tobytes()


def decode_matrix(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Parse one TMNF blob starting at ``offset``; returns (matrix, end offset)."""
    if len(buf) - offset < _HEADER.size:
        raise FormatError("truncated TMNF header", offset + max(len(buf) - offset, 0))
    magic, version, h, d = _HEADER.unpack_from(buf, offset)
    if magic != TMNF_MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset)
    if version != VERSION:
        raise FormatError(f"unsupported TMNF version {version}", offset + 4)
    start = offset + _HEADER.size
    end = start + 4 * h * d
    if len(buf) < end:
        raise FormatError(f"truncated payload: need {end - start} bytes for {h}x{d}, have {len(buf) - start}", len(buf))
    data = np.frombuffer(buf, dtype="<f4", count=h * d, offset=start).reshape(h, d).astype(np.float32)
    return data, end


def write_features(path, frames: np.ndarray) -> None:
    Path(path).write_bytes(encode_matrix(frames))


def load_features(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    frames, end = decode_matrix(buf)
    if end != len(buf):
        raise FormatError(f"{len(buf) - end} trailing bytes after payload", end)
    return frames


# ----- manifests -----

@dataclass
class Manifest:
    n_classes: int
    records: list[tuple[str, int, str]]  # (feature path, label, domain)
    role: str = "source"
    base_dir: str = ""

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"unknown manifest role {self.role!r}")
        for path, label, _ in self.records:
            if label >= self.n_classes:
                raise DataError(f"label {label} >= class count {self.n_classes} for {path}")
            if self.role == "target-train" and label != -1:
                raise DataError("target-train manifests must not carry labels")
            if self.role != "target-train" and label < 0:
                raise DataError(f"{self.role} manifest record {path} has no label")

    @property
    def domains(self) -> list[str]:
        return sorted({d for _, _, d in self.records})

    @property
    def domain(self) -> str:
        names = self.domains
        return names[0] if len(names) == 1 else "+".join(names)

    @property
    def labels(self) -> np.ndarray:
        return np.array([lab for _, lab, _ in self.records], dtype=np.int64)

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def unlabeled(self) -> "Manifest":
        """Copy with labels stripped, for use as adaptation target."""
        return Manifest(self.n_classes, [(p, -1, d) for p, _, d in self.records], "target-train", self.base_dir)


def write_manifest(path, manifest: Manifest) -> None:
    lines = [f"#classes={manifest.n_classes}"]
    lines += [f"{p}\t{lab}\t{dom}" for p, lab, dom in manifest.records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path, role: str | None = None) -> Manifest:
    """Read a manifest; the role is inferred (all labels -1 means target-train) unless given."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("#classes="):
        raise FormatError(f"{path}: first line must be '#classes=<K>'", 0)
    try:
        k = int(text[0].split("=", 1)[1])
    except ValueError:
        raise FormatError(f"{path}: bad class count line {text[0]!r}", 0) from None
    records = []
    offset = len(text[0].encode()) + 1
    for line in text[1:]:
        if line.strip():
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}: expected path<TAB>label<TAB>domain, got {line!r}", offset)
            records.append((parts[0], int(parts[1]), parts[2]))
        offset += len(line.encode()) + 1
    if role is None:
        role = "target-train" if records and all(lab == -1 for _, lab, _ in records) else "source"
    return Manifest(k, records, role, str(Path(path).parent))


# ----- key=value config -----

def load_config_file(path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


# ----- checkpoints -----

@dataclass
class Checkpoint:
    arrays: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    blobs, directory, offset = [], [], 0
    for name, arr in ckpt.arrays.items():
        mat = arr.reshape(1, -1) if arr.ndim == 1 else arr
        blob = encode_matrix(mat)
        directory.append({"name": name, "rows": int(mat.shape[0]), "cols": int(mat.shape[1]),
                          "vector": arr.ndim == 1, "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"meta": ckpt.meta, "tensors": directory}, sort_keys=True).encode("utf-8")
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(CKPT_MAGIC + struct.pack("<II", VERSION, len(header)) + header)
        for blob in blobs:
            fh.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    buf = Path(path).read_bytes()
    if len(buf) < 12:
        raise FormatError("truncated checkpoint header", len(buf))
    if buf[:4] != CKPT_MAGIC:
        raise FormatError(f"bad checkpoint magic {buf[:4]!r}", 0)
    version, hlen = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)
    if len(buf) < 12 + hlen:
        raise FormatError("truncated checkpoint directory", len(buf))
    header = json.loads(buf[12:12 + hlen].decode("utf-8"))
    base = 12 + hlen
    arrays = {}
    for entry in header["tensors"]:
        mat, _ = decode_matrix(buf, base + entry["offset"])
        if mat.shape != (entry["rows"], entry["cols"]):
            raise FormatError(f"tensor {entry['name']} shape {mat.shape} disagrees with directory", base + entry["offset"])
        arrays[entry["name"]] = mat.reshape(-1) if entry["vector"] else mat
    return Checkpoint(arrays, header["meta"])


# ----- metrics -----

def write_metrics(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_metrics(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
