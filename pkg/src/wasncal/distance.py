"""Distance quantization, per-node fusion of pair estimates, and metrics.

Distances in [0.03, 3] m are linearly quantized into 31 classes; index 31
is the out-of-range class for anything beyond 3 m. A node's three
opposite-microphone pairs each yield one class decision; the node-level
rule keeps a class that at least two pairs agree on, reports out-of-range
if any pair says so, and discards the observation otherwise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetric

D_MIN = 0.03
R_MAX = 3.0
NUM_DISTANCE_CLASSES = 31
OOR_CLASS = 31
CLASS_WIDTH = (R_MAX - D_MIN) / NUM_DISTANCE_CLASSES


def quantize_distance(d: float) -> int:
    """Class index of a distance; values beyond R_MAX map to the OoR class."""
    if d <= 0.0:
        raise ValueError("distance must be positive")
    if d > R_MAX:
        return OOR_CLASS
    if d < D_MIN:
        return 0
    return min(int((d - D_MIN) / CLASS_WIDTH), NUM_DISTANCE_CLASSES - 1)


def class_to_distance(index: int):
    """Bin midpoint in meters; None for the out-of-range class."""
    if index == OOR_CLASS:
        return None
    if not 0 <= index < NUM_DISTANCE_CLASSES:
        raise ValueError(f"class index {index} out of range")
    return D_MIN + (index + 0.5) * CLASS_WIDTH


@dataclass
class DistanceEstimate:
    """Class posterior with its point estimate; one per source-mic-pair."""

    posterior: np.ndarray
    class_index: int
    point_estimate: float | None   # None when out of range
    source_pair_id: tuple | None = None

    @property
    def is_oor(self) -> bool:
        return self.class_index == OOR_CLASS


def estimate_from_posterior(post: np.ndarray,
                            source_pair_id=None) -> DistanceEstimate:
    post = np.asarray(post, dtype=np.float64)
    if post.ndim != 1 or len(post) != NUM_DISTANCE_CLASSES + 1:
        raise ValueError(f"posterior must have {NUM_DISTANCE_CLASSES + 1} entries")
    if not np.isclose(post.sum(), 1.0, atol=1e-6):
        raise ValueError("posterior does not sum to 1")
    idx = int(np.argmax(post))
    return DistanceEstimate(posterior=post, class_index=idx,
                            point_estimate=class_to_distance(idx),
                            source_pair_id=source_pair_id)


@dataclass
class FusedEstimate:
    kind: str                      # "estimate" | "oor" | "discard"
    class_index: int | None = None
    distance: float | None = None


def fuse_node_estimates(estimates) -> FusedEstimate:
    """Combine the three per-pair estimates of one node.

    Any out-of-range vote makes the node report out-of-range; otherwise a
    class held by at least two pairs wins, and disagreement discards the
    observation (its weight downstream becomes zero).
    """
    if len(estimates) != 3:
        raise ValueError(f"expected 3 pair estimates, got {len(estimates)}")
    classes = [e.class_index for e in estimates]
    if any(c == OOR_CLASS for c in classes):
        return FusedEstimate(kind="oor", class_index=OOR_CLASS)
    for c in set(classes):
        if classes.count(c) >= 2:
            return FusedEstimate(kind="estimate", class_index=c,
                                 distance=class_to_distance(c))
    return FusedEstimate(kind="discard")


def mae(estimates, ground_truths) -> float:
    """Mean absolute error in meters over pairs with numeric estimates.

    Pairs whose ground truth is out of range (> R_MAX) carry no numeric
    target and are excluded, as are pairs with an out-of-range estimate
    (None); use `oor_f1` to score those decisions.
    """
    est = list(estimates)
    truth = list(ground_truths)
    if len(est) != len(truth):
        raise ValueError("estimate and truth lengths differ")
    errors = [abs(e - t) for e, t in zip(est, truth)
              if e is not None and t is not None and t <= R_MAX]
    if not errors:
        raise ValueError("no comparable estimate/truth pairs")
    return float(np.mean(errors))


def oor_f1(predicted_flags, true_flags) -> float:
    """F1 score of out-of-range detection (OoR is the positive class)."""
    pred = np.asarray(predicted_flags, dtype=bool)
    true = np.asarray(true_flags, dtype=bool)
    if pred.shape != true.shape:
        raise ValueError("flag arrays must have equal shape")
    if not true.any():
        raise UndefinedMetric("F1 undefined: no out-of-range examples in the truth")
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)
