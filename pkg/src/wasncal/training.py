"""Mini-batch training loops for the distance classifiers and the
room-embedding extractor.

Training follows the fixed recipe: Adam, batch size 32, learning rate
3e-4, cross-entropy on the class labels. The distance loop tracks
validation MAE per epoch and restores the best-epoch parameters; the
embedding loop tracks validation accuracy.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .distance import OOR_CLASS, R_MAX, CLASS_WIDTH, class_to_distance
from .errors import TrainingDivergence
from .nn import adam_step, init_adam, softmax_cross_entropy
from .seeding import substream

BATCH_SIZE = 32
LEARNING_RATE = 3e-4

# pseudo-distance assigned to the out-of-range class when scoring validation
# MAE: just past the modeled range, half a class width out
_OOR_PSEUDO_DISTANCE = R_MAX + CLASS_WIDTH / 2.0


@dataclass
class TrainResult:
    loss_curve: list = field(default_factory=list)
    val_curve: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = math.inf


def _model_inputs(dataset, idx, model):
    if getattr(model, "use_rvector", False):
        return (dataset.model_features(idx), dataset.rvectors[idx])
    return dataset.model_features(idx)


def _val_mae(model, dataset, idx, batch_size):
    """Validation MAE with a fixed pseudo-distance for out-of-range picks.

    Out-of-range rows (truth or prediction) are scored against a point just
    beyond the last class edge so the selection metric stays defined when
    the dataset mixes in-range and out-of-range examples.
    """
    errors = []
    for start in range(0, len(idx), batch_size):
        batch = idx[start:start + batch_size]
        logits = model.forward(_model_inputs(dataset, batch, model), train=False)
        pred_class = logits.argmax(axis=1)
        for k, row in enumerate(batch):
            pred = pred_class[k]
            pred_d = (_OOR_PSEUDO_DISTANCE if pred == OOR_CLASS
                      else class_to_distance(int(pred)))
            true_d = (_OOR_PSEUDO_DISTANCE if dataset.oor[row]
                      else dataset.distances[row])
            errors.append(abs(pred_d - true_d))
    return float(np.mean(errors))


def _val_error_rate(model, dataset, idx, batch_size):
    wrong = 0
    for start in range(0, len(idx), batch_size):
        batch = idx[start:start + batch_size]
        logits = model.forward(_model_inputs(dataset, batch, model), train=False)
        wrong += int((logits.argmax(axis=1) != dataset.labels[batch]).sum())
    return wrong / len(idx)


def split_train_val(dataset, val_fraction=0.1):
    """Scene-grouped split: all pairs of a scene land on the same side."""
    scene_ids = np.unique(dataset.scene_ids)
    n_val = max(1, int(round(val_fraction * len(scene_ids))))
    val_scenes = set(scene_ids[-n_val:].tolist())
    val_mask = np.array([s in val_scenes for s in dataset.scene_ids])
    return np.nonzero(~val_mask)[0], np.nonzero(val_mask)[0]


def train_model(model, dataset, epochs, seed, train_idx=None, val_idx=None,
                batch_size=BATCH_SIZE, lr=LEARNING_RATE,
                val_metric="mae", log=None) -> TrainResult:
    """Train `model` on `dataset`; restores the best-validation parameters.

    `val_metric` is "mae" for distance models and "error" (classification
    error rate) for the embedding extractor. Deterministic given the seed.
    """
    if train_idx is None or val_idx is None:
        train_idx, val_idx = split_train_val(dataset)
    named = model.parameters()
    state = init_adam(named, lr=lr)
    result = TrainResult()
    best_params = None
    metric_fn = _val_mae if val_metric == "mae" else _val_error_rate
    for epoch in range(epochs):
        order = substream(seed, "shuffle", epoch).permutation(len(train_idx))
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            batch = train_idx[order[start:start + batch_size]]
            inputs = _model_inputs(dataset, batch, model)
            logits = model.forward(inputs, train=True)
            loss, dlogits = softmax_cross_entropy(logits, dataset.labels[batch])
            if not math.isfinite(loss):
                raise TrainingDivergence(f"non-finite loss at epoch {epoch}")
            model.zero_grad()
            model.backward(dlogits)
            adam_step(named, state)
            epoch_losses.append(loss)
        result.loss_curve.append(float(np.mean(epoch_losses)))
        val = metric_fn(model, dataset, val_idx, batch_size)
        result.val_curve.append(val)
        if val < result.best_val:
            result.best_val = val
            result.best_epoch = epoch
            best_params = [p.data.copy() for _, p in named]
        if log:
            log(f"epoch {epoch}: loss {result.loss_curve[-1]:.4f} val {val:.4f}")
    if best_params is not None:
        for (_, p), data in zip(named, best_params):
            p.data[...] = data
    return result


def predict_classes(model, dataset, idx=None, batch_size=256) -> np.ndarray:
    idx = np.arange(len(dataset.labels)) if idx is None else idx
    out = np.empty(len(idx), dtype=np.int64)
    for start in range(0, len(idx), batch_size):
        batch = idx[start:start + batch_size]
        logits = model.forward(_model_inputs(dataset, batch, model), train=False)
        out[start:start + len(batch)] = logits.argmax(axis=1)
    return out
