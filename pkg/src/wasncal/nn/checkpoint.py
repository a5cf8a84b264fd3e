"""Checkpoint format: JSON header plus a contiguous float64 LE block.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON
header, raw parameter bytes. The header records the format version, an
architecture spec sufficient to rebuild the network, arbitrary metadata
(seeds, training config), and the name/shape of every parameter in block
order.
"""

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"WNCKPT01"
VERSION = 1


def save_checkpoint(path, arch: dict, named_params, meta: dict | None = None) -> None:
    entries = []
    blobs = []
    for name, p in named_params:
        arr = np.ascontiguousarray(p.data, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = {"version": VERSION, "arch": arch, "meta": meta or {}, "params": entries}
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path):
    """Returns (arch, {param name: array}, meta)."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path} is not a checkpoint file")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    if header["version"] != VERSION:
        raise ValueError(f"unsupported checkpoint version {header['version']}")
    offset = 16 + hlen
    params = {}
    for entry in header["params"]:
        n = int(np.prod(entry["shape"])) if entry["shape"] else 1
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=offset)
        params[entry["name"]] = arr.reshape(entry["shape"]).astype(np.float64)
        offset += n * 8
    return header["arch"], params, header["meta"]


def assign_parameters(named_params, loaded: dict) -> None:
    for name, p in named_params:
        if name not in loaded:
            raise ValueError(f"checkpoint missing parameter {name}")
        if loaded[name].shape != p.data.shape:
            raise ValueError(f"{name}: checkpoint shape {loaded[name].shape} "
                             f"!= model shape {p.data.shape}")
        p.data[...] = loaded[name]
