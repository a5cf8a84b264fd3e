"""Corpus builders: scenes to features to in-memory training datasets.

A distance corpus is a stream of single-node/single-source scenes; each
scene contributes three examples, one per opposite-microphone pair. The
expensive room simulation is shared across noise variants: every variant
(clean, fixed-SNR, training-range SNR) reuses the same rendered signals
with different sensor noise. Datasets can be persisted as float32 feature
files plus a JSON-lines manifest and reloaded bit-identically.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import arrayio
from .distance import quantize_distance
from .features import band_bin_indices, mfcc, pair_diffuseness
from .scenes import (
    OPPOSITE_PAIRS, DistanceSceneConfig, distance_estimator_config,
    room_embedding_config, sample_distance_scene, scene_to_dict,
)
from .seeding import substream
from .signals import RenderOptions, add_awgn, render_node_signals, training_snr


@dataclass
class DistanceDataset:
    """Per-pair feature rows; `feature_mode` picks the model input shape."""

    features: np.ndarray            # (N, F) time-averaged diffuseness
    labels: np.ndarray              # (N,) class indices incl. out-of-range
    distances: np.ndarray           # (N,) true source-node distance
    oor: np.ndarray                 # (N,) bool
    zeta: np.ndarray                # (N,) scalar averaged diffuseness
    scene_ids: np.ndarray           # (N,)
    pair_ids: np.ndarray            # (N,) 0..2
    maps: np.ndarray | None = None  # (N, F, T) full diffuseness maps
    mfccs: np.ndarray | None = None  # (N, 23, T)
    rvectors: np.ndarray | None = None  # (N, R) room embeddings
    meta: dict = field(default_factory=dict)
    feature_mode: str = "avg"       # "avg" (MLP) or "map" (CRNN)

    def __len__(self):
        return len(self.labels)

    def model_features(self, idx):
        if self.feature_mode == "avg":
            return self.features[idx]
        if self.maps is None:
            raise ValueError("dataset was built without full diffuseness maps")
        return self.maps[idx][:, None, :, :]  # (B, 1, F, T)

    def scene_groups(self):
        """Ordered mapping scene id -> row indices (the node's three pairs)."""
        groups = {}
        for row, sid in enumerate(self.scene_ids):
            groups.setdefault(int(sid), []).append(row)
        return groups


@dataclass(frozen=True)
class DistanceCorpusConfig:
    n_scenes: int
    n_oor_scenes: int = 0
    seed: int = 0
    signal_kind: str = "white-noise"
    scene: DistanceSceneConfig = distance_estimator_config()
    # variant name -> sensor noise: None (clean), "train-range", or SNR in dB
    variants: tuple = (("clean", None),)
    keep_maps: bool = False
    keep_mfccs: bool = False
    corpus_dir: str | None = None


def _variant_snr(mode, seed, name, index):
    if mode is None:
        return None
    if mode == "train-range":
        return float(training_snr(substream(seed, f"snr-{name}", index)))
    return float(mode)


def build_distance_corpus(config: DistanceCorpusConfig,
                          progress=None) -> dict[str, "DistanceDataset"]:
    """Simulate scenes and extract features for every noise variant."""
    total = config.n_scenes + config.n_oor_scenes
    fs = config.scene.sample_rate
    n_bins = len(band_bin_indices(fs))
    rows = {name: [] for name, _ in config.variants}
    opts = RenderOptions(corpus_dir=config.corpus_dir)
    scene_records = []
    for i in range(total):
        rng = substream(config.seed, "scene", i)
        scene_cfg = replace(config.scene, out_of_range=(i >= config.n_scenes),
                            signal_kind=config.signal_kind)
        scene = sample_distance_scene(rng, scene_cfg)
        clean = render_node_signals(scene, opts)[0]
        node = scene.nodes[0]
        dist = float(np.linalg.norm(np.asarray(node.center)
                                    - np.asarray(scene.sources[0].position)))
        scene_records.append({"scene": scene_to_dict(scene), "distance": dist})
        for name, mode in config.variants:
            snr = _variant_snr(mode, config.seed, name, i)
            buf = clean if snr is None else add_awgn(
                clean, snr, substream(config.seed, f"awgn-{name}", i))
            for pair_id, (a, b) in enumerate(OPPOSITE_PAIRS):
                dm = pair_diffuseness(buf.data[a], buf.data[b], fs)
                row = {
                    "avg": dm.time_averaged(), "zeta": dm.zeta,
                    "map": dm.values if config.keep_maps else None,
                    "mfcc": mfcc(buf.data[a], fs) if config.keep_mfccs else None,
                    "distance": dist, "oor": bool(i >= config.n_scenes),
                    "label": quantize_distance(dist), "scene_id": i,
                    "pair_id": pair_id, "snr": snr,
                }
                rows[name].append(row)
        if progress and (i + 1) % 100 == 0:
            progress(f"scenes {i + 1}/{total}")

    out = {}
    for name, mode in config.variants:
        r = rows[name]
        ds = DistanceDataset(
            features=np.array([x["avg"] for x in r]).reshape(len(r), n_bins),
            labels=np.array([x["label"] for x in r], dtype=np.int64),
            distances=np.array([x["distance"] for x in r]),
            oor=np.array([x["oor"] for x in r], dtype=bool),
            zeta=np.array([x["zeta"] for x in r]),
            scene_ids=np.array([x["scene_id"] for x in r], dtype=np.int64),
            pair_ids=np.array([x["pair_id"] for x in r], dtype=np.int64),
            maps=np.array([x["map"] for x in r]) if config.keep_maps else None,
            mfccs=np.array([x["mfcc"] for x in r]) if config.keep_mfccs else None,
            meta={"variant": name, "snr_mode": mode, "seed": config.seed,
                  "n_scenes": config.n_scenes, "n_oor_scenes": config.n_oor_scenes,
                  "signal_kind": config.signal_kind,
                  "snrs": [x["snr"] for x in r]},
        )
        out[name] = ds
    out["_scenes"] = scene_records
    return out


def attach_rvectors(dataset: DistanceDataset, extractor, batch_size=64) -> None:
    """Compute room embeddings from the stored MFCCs (frozen extractor)."""
    if dataset.mfccs is None:
        raise ValueError("dataset was built without MFCCs; rebuild with keep_mfccs")
    n = len(dataset)
    chunks = []
    for start in range(0, n, batch_size):
        chunks.append(extractor.extract(dataset.mfccs[start:start + batch_size]))
    dataset.rvectors = np.concatenate(chunks, axis=0)


@dataclass
class RoomClassDataset:
    """MFCC rows labeled by which simulated room produced them."""

    mfccs: np.ndarray       # (N, 23, T)
    labels: np.ndarray      # (N,) room cell index
    scene_ids: np.ndarray   # (N,)
    oor: np.ndarray | None = None
    distances: np.ndarray | None = None
    rvectors: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)

    def model_features(self, idx):
        return self.mfccs[idx]


def build_room_class_corpus(n_rooms: int, utts_per_room: int, seed: int = 0,
                            signal_kind: str = "white-noise",
                            progress=None) -> RoomClassDataset:
    """One class per simulated (room geometry, T60) cell."""
    base = room_embedding_config()
    mfccs, labels, scene_ids = [], [], []
    sid = 0
    for cell in range(n_rooms):
        cell_rng = substream(seed, "room-cell", cell)
        lx = float(cell_rng.uniform(*base.room_x))
        ly = float(cell_rng.uniform(*base.room_y))
        t60 = float(cell_rng.uniform(*base.t60))
        cfg = replace(base, room_x=(lx, lx), room_y=(ly, ly), t60=(t60, t60),
                      signal_kind=signal_kind)
        for u in range(utts_per_room):
            rng = substream(seed, "room-utt", cell * 100003 + u)
            scene = sample_distance_scene(rng, cfg)
            buf = render_node_signals(scene)[0]
            mfccs.append(mfcc(buf.data[0], scene.sample_rate))
            labels.append(cell)
            scene_ids.append(sid)
            sid += 1
        if progress:
            progress(f"room cells {cell + 1}/{n_rooms}")
    return RoomClassDataset(mfccs=np.array(mfccs),
                            labels=np.array(labels, dtype=np.int64),
                            scene_ids=np.array(scene_ids, dtype=np.int64),
                            meta={"n_rooms": n_rooms, "utts_per_room": utts_per_room,
                                  "seed": seed, "signal_kind": signal_kind})


# --- persistence -------------------------------------------------------------

def save_distance_dataset(dataset: DistanceDataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arrayio.save_f32(out / "features.f32", dataset.features,
                     meta={"kind": "avg-diffuseness"})
    if dataset.maps is not None:
        arrayio.save_f32(out / "maps.f32", dataset.maps,
                         meta={"kind": "diffuseness-maps"})
    if dataset.mfccs is not None:
        arrayio.save_f32(out / "mfccs.f32", dataset.mfccs, meta={"kind": "mfcc"})
    if dataset.rvectors is not None:
        arrayio.save_f32(out / "rvectors.f32", dataset.rvectors,
                         meta={"kind": "room-embedding"})
    records = []
    for i in range(len(dataset)):
        records.append({
            "label": int(dataset.labels[i]),
            "distance": float(dataset.distances[i]),
            "oor": bool(dataset.oor[i]),
            "zeta": float(dataset.zeta[i]),
            "scene_id": int(dataset.scene_ids[i]),
            "pair_id": int(dataset.pair_ids[i]),
        })
    arrayio.write_jsonl(out / "manifest.jsonl", records)
    (out / "meta.json").write_text(json.dumps(dataset.meta, sort_keys=True,
                                              default=str))


def load_distance_dataset(in_dir) -> DistanceDataset:
    src = Path(in_dir)
    features, _ = arrayio.load_f32(src / "features.f32")
    records = arrayio.read_jsonl(src / "manifest.jsonl")
    meta = json.loads((src / "meta.json").read_text())
    maps = mfccs = rvectors = None
    if (src / "maps.f32").exists():
        maps, _ = arrayio.load_f32(src / "maps.f32")
    if (src / "mfccs.f32").exists():
        mfccs, _ = arrayio.load_f32(src / "mfccs.f32")
    if (src / "rvectors.f32").exists():
        rvectors, _ = arrayio.load_f32(src / "rvectors.f32")
    return DistanceDataset(
        features=features,
        labels=np.array([r["label"] for r in records], dtype=np.int64),
        distances=np.array([r["distance"] for r in records]),
        oor=np.array([r["oor"] for r in records], dtype=bool),
        zeta=np.array([r["zeta"] for r in records]),
        scene_ids=np.array([r["scene_id"] for r in records], dtype=np.int64),
        pair_ids=np.array([r["pair_id"] for r in records], dtype=np.int64),
        maps=maps, mfccs=mfccs, rvectors=rvectors, meta=meta,
    )
