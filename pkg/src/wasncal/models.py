"""Distance classifier architectures and the room-embedding extractor.

Three networks:

* `DistanceMlp` - time-averaged diffuseness vector (optionally concatenated
  with a room-embedding vector) through three 1024-unit ReLU layers with
  dropout 0.5 after every hidden activation, into a softmax over the
  distance classes.
* `DistanceCrnn` - full diffuseness map through two conv2d blocks with
  pooling, a reshape folding frequency into channels, two conv1d layers,
  and a two-layer GRU whose last output vector (optionally concatenated
  with the room embedding) feeds the classifier head.
* `RVectorExtractor` - MFCC sequence through three conv1d layers and
  statistics pooling into two 512-unit layers; trained to classify which
  simulated room produced the recording. The output of the first fully
  connected layer (post-ReLU) is the embedding used by the distance models.

Every conv layer is followed by batch normalization and ReLU.
"""

import numpy as np

from .errors import ShapeError
from .nn import (
    BatchNorm, Conv1d, Conv2d, Dense, Dropout, FoldFreqIntoChannels, Gru,
    Layer, MaxPool2d, ReLU, Sequential, StatsPool, softmax,
)
from .nn.checkpoint import assign_parameters, load_checkpoint, save_checkpoint
from .seeding import substream

FEATURE_BINS = 109     # analysis-band bins at 16 kHz / 512-point FFT
RVECTOR_DIM = 512
NUM_CLASSES = 32       # 31 distance classes + out-of-range


def _split_input(inputs, use_rvector, name):
    if use_rvector:
        if not (isinstance(inputs, tuple) and len(inputs) == 2):
            raise ShapeError(f"{name}: expected (features, room embedding) tuple")
        return inputs
    if isinstance(inputs, tuple):
        raise ShapeError(f"{name}: model built without a room-embedding input")
    return inputs, None


class DistanceMlp(Layer):
    name = "distance_mlp"

    def __init__(self, feature_dim=FEATURE_BINS, use_rvector=False,
                 rvector_dim=RVECTOR_DIM, num_classes=NUM_CLASSES,
                 hidden=1024, dropout=0.5, seed=0):
        self.config = dict(kind="mlp", feature_dim=feature_dim,
                           use_rvector=use_rvector, rvector_dim=rvector_dim,
                           num_classes=num_classes, hidden=hidden,
                           dropout=dropout, seed=seed)
        self.use_rvector = use_rvector
        init = substream(seed, "model-init")
        drop = substream(seed, "dropout")
        in_dim = feature_dim + (rvector_dim if use_rvector else 0)
        layers = []
        d = in_dim
        for i in range(3):
            layers += [Dense(d, hidden, init, name=f"fc{i}"), ReLU(),
                       Dropout(dropout, drop, name=f"drop{i}")]
            d = hidden
        layers.append(Dense(d, num_classes, init, name="out"))
        self.net = Sequential(layers, name="mlp")

    def children(self):
        return [self.net]

    def parameters(self):
        return self.net.parameters()

    def forward(self, inputs, train=False):
        x, rvec = _split_input(inputs, self.use_rvector, self.name)
        if rvec is not None:
            x = np.concatenate([x, rvec], axis=1)
        return self.net.forward(x, train)

    def backward(self, grad_out):
        return self.net.backward(grad_out)


class DistanceCrnn(Layer):
    """Convolutional-recurrent distance classifier over (B, 1, F, T) maps.

    The published stage table lists the second conv block's output time
    extent as T even though its input time extent is already halved by the
    first pooling stage; we treat that as a typo and propagate the halved
    extent (`halve_time_in_first_pool=True`). Setting the flag to False
    instead skips time pooling in the first block so the second conv block
    really does see T frames.
    """

    name = "distance_crnn"

    def __init__(self, feature_bins=FEATURE_BINS, use_rvector=False,
                 rvector_dim=RVECTOR_DIM, num_classes=NUM_CLASSES,
                 conv_channels=(16, 32), conv1d_channels=(512, 256),
                 gru_hidden=256, head_hidden=256, dropout=0.0,
                 halve_time_in_first_pool=True, seed=0):
        self.config = dict(kind="crnn", feature_bins=feature_bins,
                           use_rvector=use_rvector, rvector_dim=rvector_dim,
                           num_classes=num_classes, conv_channels=list(conv_channels),
                           conv1d_channels=list(conv1d_channels),
                           gru_hidden=gru_hidden, head_hidden=head_hidden,
                           dropout=dropout,
                           halve_time_in_first_pool=halve_time_in_first_pool,
                           seed=seed)
        self.use_rvector = use_rvector
        init = substream(seed, "model-init")
        c1, c2 = conv_channels
        first_pool = (4, 2) if halve_time_in_first_pool else (4, 1)
        trunk = [
            Conv2d(1, c1, (7, 3), init, name="conv2d_0"), BatchNorm(c1, name="bn2d_0"), ReLU(),
            Conv2d(c1, c1, (7, 3), init, name="conv2d_1"), BatchNorm(c1, name="bn2d_1"), ReLU(),
            MaxPool2d(first_pool, name="pool_0"),
            Conv2d(c1, c2, (7, 3), init, name="conv2d_2"), BatchNorm(c2, name="bn2d_2"), ReLU(),
            Conv2d(c2, c2, (7, 3), init, name="conv2d_3"), BatchNorm(c2, name="bn2d_3"), ReLU(),
            MaxPool2d((4, 2), name="pool_1"),
            FoldFreqIntoChannels(),
        ]
        folded = c2 * (feature_bins // 16)
        k1, k2 = conv1d_channels
        trunk += [
            Conv1d(folded, k1, 3, init, name="conv1d_0"), BatchNorm(k1, name="bn1d_0"), ReLU(),
            Conv1d(k1, k2, 3, init, name="conv1d_1"), BatchNorm(k2, name="bn1d_1"), ReLU(),
            Gru(k2, gru_hidden, init, num_layers=2, name="gru"),
        ]
        self.trunk = Sequential(trunk, name="trunk")
        head_in = gru_hidden + (rvector_dim if use_rvector else 0)
        head = [Dense(head_in, head_hidden, init, name="head_fc"), ReLU()]
        if dropout > 0.0:
            head.append(Dropout(dropout, substream(seed, "dropout"), name="head_drop"))
        head.append(Dense(head_hidden, num_classes, init, name="out"))
        self.head = Sequential(head, name="head")
        self._rvec_dim = rvector_dim if use_rvector else 0

    def children(self):
        return [self.trunk, self.head]

    def parameters(self):
        return self.trunk.parameters() + self.head.parameters()

    def forward(self, inputs, train=False):
        x, rvec = _split_input(inputs, self.use_rvector, self.name)
        if x.ndim != 4 or x.shape[1] != 1:
            raise ShapeError(f"{self.name}: expected (B, 1, F, T), got {x.shape}")
        h = self.trunk.forward(x, train)
        if rvec is not None:
            h = np.concatenate([h, rvec], axis=1)
        return self.head.forward(h, train)

    def backward(self, grad_out):
        dh = self.head.backward(grad_out)
        if self._rvec_dim:
            dh = dh[:, :-self._rvec_dim]
        return self.trunk.backward(dh)


class RVectorExtractor(Layer):
    name = "rvector_extractor"

    def __init__(self, num_rir_classes, mfcc_dim=23, channels=128,
                 embed_dim=RVECTOR_DIM, seed=0):
        if num_rir_classes < 2:
            raise ValueError("room classification needs at least 2 classes")
        self.config = dict(kind="rvector", num_rir_classes=num_rir_classes,
                           mfcc_dim=mfcc_dim, channels=channels,
                           embed_dim=embed_dim, seed=seed)
        init = substream(seed, "model-init")
        self.body = Sequential([
            Conv1d(mfcc_dim, channels, 3, init, name="conv_0"),
            BatchNorm(channels, name="bn_0"), ReLU(),
            Conv1d(channels, channels, 5, init, name="conv_1"),
            BatchNorm(channels, name="bn_1"), ReLU(),
            Conv1d(channels, channels, 1, init, name="conv_2"),
            BatchNorm(channels, name="bn_2"), ReLU(),
            StatsPool(),
        ], name="body")
        self.embed = Sequential([Dense(2 * channels, embed_dim, init, name="fc_embed"),
                                 ReLU()], name="embed")
        self.head = Sequential([Dense(embed_dim, embed_dim, init, name="fc_1"), ReLU(),
                                Dense(embed_dim, num_rir_classes, init, name="out")],
                               name="head")

    def children(self):
        return [self.body, self.embed, self.head]

    def parameters(self):
        return (self.body.parameters() + self.embed.parameters()
                + self.head.parameters())

    def forward(self, x, train=False):
        if x.ndim != 3:
            raise ShapeError(f"{self.name}: expected (B, 23, T) MFCC input, got "
                             f"{getattr(x, 'shape', type(x))}")
        h = self.body.forward(x, train)
        h = self.embed.forward(h, train)
        return self.head.forward(h, train)

    def backward(self, grad_out):
        dh = self.head.backward(grad_out)
        dh = self.embed.backward(dh)
        return self.body.backward(dh)

    def extract(self, x) -> np.ndarray:
        """Room embedding: first fully connected layer output, eval mode."""
        return self.embed.forward(self.body.forward(x, train=False), train=False)


def build_distance_model(arch: str, use_rvector: bool, **kwargs) -> Layer:
    if arch == "mlp":
        return DistanceMlp(use_rvector=use_rvector, **kwargs)
    if arch == "crnn":
        return DistanceCrnn(use_rvector=use_rvector, **kwargs)
    raise ValueError(f"unknown architecture {arch!r}")


def build_rvector_extractor(num_rir_classes: int, **kwargs) -> RVectorExtractor:
    return RVectorExtractor(num_rir_classes, **kwargs)


def build_from_config(config: dict) -> Layer:
    cfg = dict(config)
    kind = cfg.pop("kind")
    if kind == "mlp":
        return DistanceMlp(**cfg)
    if kind == "crnn":
        cfg["conv_channels"] = tuple(cfg["conv_channels"])
        cfg["conv1d_channels"] = tuple(cfg["conv1d_channels"])
        return DistanceCrnn(**cfg)
    if kind == "rvector":
        return RVectorExtractor(**cfg)
    raise ValueError(f"unknown model kind {kind!r}")


def posterior(model: Layer, inputs) -> np.ndarray:
    return softmax(model.forward(inputs, train=False))


def save_model(path, model: Layer, meta: dict | None = None) -> None:
    save_checkpoint(path, model.config, model.parameters(), meta)


def load_model(path):
    arch, params, meta = load_checkpoint(path)
    model = build_from_config(arch)
    assign_parameters(model.parameters(), params)
    return model, meta
