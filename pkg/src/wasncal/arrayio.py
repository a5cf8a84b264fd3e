"""File formats: raw float32 tensors with JSON sidecars, WAV, JSON lines.

Raw tensor files hold little-endian IEEE-754 float32 values in C order; the
sidecar `<file>.json` records shape plus caller-supplied metadata (sample
rate, band bins, provenance). WAV support covers mono/multichannel float32
and PCM16 via scipy.
"""

import json
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ConfigurationError

_F32LE = np.dtype("<f4")


def save_f32(path, array, meta: dict | None = None) -> None:
    path = Path(path)
    arr = np.ascontiguousarray(array, dtype=_F32LE)
    path.write_bytes(arr.tobytes())
    sidecar = {"shape": list(arr.shape), "dtype": "float32-le", "order": "C"}
    if meta:
        sidecar.update(meta)
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True))


def load_f32(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    raw = np.frombuffer(path.read_bytes(), dtype=_F32LE)
    arr = raw.reshape(sidecar["shape"]).astype(np.float64)
    return arr, sidecar


def save_wav(path, data, fs: int) -> None:
    """Write float32 WAV; `data` is (samples,) or (channels, samples)."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr.T  # scipy expects (samples, channels)
    wavfile.write(str(path), int(fs), arr)


def load_wav(path) -> tuple[np.ndarray, int]:
    """Read WAV as float64 (channels, samples), scaling integer PCM to [-1, 1]."""
    fs, data = wavfile.read(str(path))
    if data.dtype.kind == "i":
        data = data.astype(np.float64) / float(np.iinfo(data.dtype).max)
    elif data.dtype.kind == "u":
        raise ConfigurationError(f"unsupported unsigned WAV sample format in {path}")
    else:
        data = data.astype(np.float64)
    if data.ndim == 1:
        data = data[None, :]
    else:
        data = data.T
    return data, int(fs)


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
