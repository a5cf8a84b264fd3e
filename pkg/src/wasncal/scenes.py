"""Scene domain types and random scene samplers.

A scene is a shoebox room with one or more six-microphone circular array
nodes and a sequence of point sources, all in the plane z = 1.5 m. Samplers
cover the two dataset styles used for distance-estimator training (single
node + single source, distance-controlled or uniform placement) and the
four-node calibration layout with corner placement regions.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import SamplingFailure

PLANE_Z = 1.5
ROOM_HEIGHT = 3.0
ARRAY_RADIUS = 0.025
NUM_MICS = 6
OPPOSITE_PAIRS = ((0, 3), (1, 4), (2, 5))
WALL_MARGIN = 0.5


@dataclass(frozen=True)
class RoomSpec:
    """Rectangular room, fixed height, scalar reverberation time."""

    length_x: float
    length_y: float
    height: float = ROOM_HEIGHT
    t60: float = 0.3
    sound_speed: float = 343.0

    def __post_init__(self):
        if not (self.length_x > 1.0 and self.length_y > 1.0):
            raise ValueError("room side lengths must exceed 1.0 m")
        if self.height != ROOM_HEIGHT:
            raise ValueError(f"room height is fixed at {ROOM_HEIGHT} m")
        if not (0.05 <= self.t60 <= 2.0):
            raise ValueError("t60 must lie in [0.05, 2.0] s")

    @property
    def dims(self) -> np.ndarray:
        return np.array([self.length_x, self.length_y, self.height])


def mic_offsets(orientation: float) -> np.ndarray:
    """Six 2D offsets on the array circle, at 60 degree increments."""
    angles = orientation + np.arange(NUM_MICS) * (math.pi / 3.0)
    return ARRAY_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)


@dataclass(frozen=True)
class ArrayNode:
    """Circular six-microphone array at z = 1.5 m."""

    center: tuple[float, float]
    orientation: float = 0.0

    def mic_positions(self) -> np.ndarray:
        """(6, 3) microphone positions in room coordinates."""
        xy = np.asarray(self.center) + mic_offsets(self.orientation)
        z = np.full((NUM_MICS, 1), PLANE_Z)
        return np.hstack([xy, z])

    def center3(self) -> np.ndarray:
        return np.array([self.center[0], self.center[1], PLANE_Z])


SIGNAL_KINDS = ("white-noise", "speech-file", "speech-surrogate", "impulse")


@dataclass(frozen=True)
class SourceEvent:
    """One temporally isolated point source at z = 1.5 m."""

    position: tuple[float, float]
    signal_kind: str = "white-noise"
    duration: float = 3.0
    start: float = 0.0

    def __post_init__(self):
        if self.signal_kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.signal_kind!r}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    def position3(self) -> np.ndarray:
        return np.array([self.position[0], self.position[1], PLANE_Z])


@dataclass(frozen=True)
class SceneSpec:
    room: RoomSpec
    nodes: tuple[ArrayNode, ...]
    sources: tuple[SourceEvent, ...]
    sample_rate: int = 16000
    rng_seed: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.nodes) < 1 or len(self.sources) < 1:
            raise ValueError("a scene needs at least one node and one source")
        validate_scene_geometry(self)


def _inside_margin(xy, room: RoomSpec, margin: float) -> bool:
    x, y = float(xy[0]), float(xy[1])
    return (margin <= x <= room.length_x - margin) and (margin <= y <= room.length_y - margin)


def validate_scene_geometry(scene: "SceneSpec", margin: float = WALL_MARGIN) -> None:
    """Re-check placement constraints; raises ValueError on violation."""
    for node in scene.nodes:
        if not _inside_margin(node.center, scene.room, margin):
            raise ValueError(f"node at {node.center} closer than {margin} m to a wall")
    events = sorted(scene.sources, key=lambda e: e.start)
    for a, b in zip(events, events[1:]):
        if a.start + a.duration > b.start + 1e-9:
            raise ValueError("overlapping source events: at most one may be active")
    for src in scene.sources:
        if not _inside_margin(src.position, scene.room, margin):
            raise ValueError(f"source at {src.position} closer than {margin} m to a wall")


@dataclass(frozen=True)
class DistanceSceneConfig:
    """Sampler configuration for single-node / single-source scenes."""

    room_x: tuple[float, float] = (6.0, 7.0)
    room_y: tuple[float, float] = (5.0, 6.0)
    t60: tuple[float, float] = (0.2, 0.5)
    distance: tuple[float, float] = (0.03, 3.0)
    out_of_range: bool = False
    oor_distance: tuple[float, float] = (3.0, 4.5)
    uniform_source: bool = False  # place source uniformly instead of distance-driven
    wall_margin: float = WALL_MARGIN
    signal_kind: str = "white-noise"
    duration: float = 3.0
    sample_rate: int = 16000
    max_retries: int = 10000


def distance_estimator_config(**overrides) -> DistanceSceneConfig:
    """Preset for the distance-estimator dataset rooms."""
    return replace(DistanceSceneConfig(), **overrides)


def room_embedding_config(**overrides) -> DistanceSceneConfig:
    """Preset for the room-embedding (RIR-classification) dataset rooms."""
    cfg = DistanceSceneConfig(
        room_x=(5.0, 8.0),
        room_y=(4.0, 7.0),
        t60=(0.1, 0.6),
        uniform_source=True,
    )
    return replace(cfg, **overrides)


def _uniform(rng, lo, hi):
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


def sample_distance_scene(rng: np.random.Generator, config: DistanceSceneConfig) -> SceneSpec:
    """One node + one source with the configured distance law.

    Rejection-samples placements until all wall-margin constraints hold;
    raises SamplingFailure after the retry budget.
    """
    m = config.wall_margin
    lx = _uniform(rng, *config.room_x)
    ly = _uniform(rng, *config.room_y)
    t60 = _uniform(rng, *config.t60)
    room = RoomSpec(lx, ly, t60=t60)
    d_lo, d_hi = config.oor_distance if config.out_of_range else config.distance
    for _ in range(config.max_retries):
        center = (rng.uniform(m, lx - m), rng.uniform(m, ly - m))
        orientation = float(rng.uniform(0.0, 2.0 * math.pi))
        if config.uniform_source:
            src_xy = (rng.uniform(m, lx - m), rng.uniform(m, ly - m))
        else:
            d = rng.uniform(d_lo, d_hi) if d_hi > d_lo else d_lo
            phi = rng.uniform(0.0, 2.0 * math.pi)
            src_xy = (center[0] + d * math.cos(phi), center[1] + d * math.sin(phi))
        if not _inside_margin(src_xy, room, m):
            continue
        node = ArrayNode(center=(float(center[0]), float(center[1])), orientation=orientation)
        src = SourceEvent(
            position=(float(src_xy[0]), float(src_xy[1])),
            signal_kind=config.signal_kind,
            duration=config.duration,
            start=0.0,
        )
        return SceneSpec(room=room, nodes=(node,), sources=(src,),
                         sample_rate=config.sample_rate,
                         rng_seed=int(rng.integers(0, 2**62)),
                         meta={"out_of_range": config.out_of_range})
    raise SamplingFailure(
        f"no valid placement after {config.max_retries} retries "
        f"(room {lx:.2f}x{ly:.2f}, distance [{d_lo}, {d_hi}], margin {m})")


@dataclass(frozen=True)
class CalibrationSceneConfig:
    """Sampler configuration for the four-corner calibration layout."""

    room_x: tuple[float, float] = (6.0, 7.0)
    room_y: tuple[float, float] = (5.0, 6.0)
    t60: tuple[float, float] = (0.2, 0.5)
    num_nodes: int = 4
    num_sources: int = 30
    wall_margin: float = WALL_MARGIN
    region_gap: float = 1.0
    signal_kind: str = "speech-surrogate"
    duration: float = 3.0
    sample_rate: int = 16000


def corner_regions(room: RoomSpec, margin: float = WALL_MARGIN,
                   gap: float = 1.0) -> list[tuple[float, float, float, float]]:
    """Four (x_lo, x_hi, y_lo, y_hi) node-placement regions.

    Regions are inset `margin` from the walls and separated by `gap` along
    each axis, which guarantees >= `gap` between nodes of different regions.
    """
    wx = (room.length_x - 2.0 * margin - gap) / 2.0
    wy = (room.length_y - 2.0 * margin - gap) / 2.0
    if wx <= 0 or wy <= 0:
        raise SamplingFailure("room too small for corner placement regions")
    xr = [(margin, margin + wx), (room.length_x - margin - wx, room.length_x - margin)]
    yr = [(margin, margin + wy), (room.length_y - margin - wy, room.length_y - margin)]
    return [(x0, x1, y0, y1) for (x0, x1) in xr for (y0, y1) in yr]


def sample_calibration_scene(rng: np.random.Generator,
                             config: CalibrationSceneConfig) -> SceneSpec:
    """K nodes (one per corner region) and N sequential sources."""
    if config.num_nodes != 4:
        raise ValueError("corner placement defines exactly 4 node regions")
    lx = _uniform(rng, *config.room_x)
    ly = _uniform(rng, *config.room_y)
    t60 = _uniform(rng, *config.t60)
    room = RoomSpec(lx, ly, t60=t60)
    m = config.wall_margin
    nodes = []
    for (x0, x1, y0, y1) in corner_regions(room, m, config.region_gap):
        center = (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
        nodes.append(ArrayNode(center=center,
                               orientation=float(rng.uniform(0.0, 2.0 * math.pi))))
    sources = []
    for i in range(config.num_sources):
        pos = (float(rng.uniform(m, lx - m)), float(rng.uniform(m, ly - m)))
        sources.append(SourceEvent(position=pos, signal_kind=config.signal_kind,
                                   duration=config.duration,
                                   start=i * config.duration))
    return SceneSpec(room=room, nodes=tuple(nodes), sources=tuple(sources),
                     sample_rate=config.sample_rate,
                     rng_seed=int(rng.integers(0, 2**62)))


# --- serialization -----------------------------------------------------------

def scene_to_dict(scene: SceneSpec) -> dict:
    return {
        "room": {"length_x": scene.room.length_x, "length_y": scene.room.length_y,
                 "height": scene.room.height, "t60": scene.room.t60,
                 "sound_speed": scene.room.sound_speed},
        "nodes": [{"center": list(n.center), "orientation": n.orientation}
                  for n in scene.nodes],
        "sources": [{"position": list(s.position), "signal_kind": s.signal_kind,
                     "duration": s.duration, "start": s.start}
                    for s in scene.sources],
        "sample_rate": scene.sample_rate,
        "rng_seed": scene.rng_seed,
        "meta": scene.meta,
    }


def scene_from_dict(d: dict) -> SceneSpec:
    room = RoomSpec(**d["room"])
    nodes = tuple(ArrayNode(center=tuple(n["center"]), orientation=n["orientation"])
                  for n in d["nodes"])
    sources = tuple(SourceEvent(position=tuple(s["position"]),
                                signal_kind=s["signal_kind"],
                                duration=s["duration"], start=s["start"])
                    for s in d["sources"])
    return SceneSpec(room=room, nodes=nodes, sources=sources,
                     sample_rate=d["sample_rate"], rng_seed=d["rng_seed"],
                     meta=d.get("meta", {}))


def save_scene_manifest(path, scenes, extra: dict | None = None) -> None:
    doc = {"scenes": [scene_to_dict(s) for s in scenes]}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1))


def load_scene_manifest(path) -> tuple[list[SceneSpec], dict]:
    doc = json.loads(Path(path).read_text())
    scenes = [scene_from_dict(d) for d in doc.pop("scenes")]
    return scenes, doc
