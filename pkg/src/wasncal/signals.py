"""Source signals and multichannel scene rendering.

Providers turn a SourceEvent into a mono signal; `render_node_signals`
convolves each event with the image-method RIRs of every microphone and
places events on the scene timeline. An optional per-node constant sample
offset models nodes whose clocks are only roughly aligned.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from . import rir as rir_mod
from .arrayio import load_wav
from .errors import ConfigurationError
from .scenes import SceneSpec, SourceEvent

MAX_NODE_OFFSET_S = 0.032  # rough-synchronization model bound


def white_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(n)


def pink_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """1/f-shaped noise via spectral weighting of white noise."""
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n)
    weights = np.zeros_like(freqs)
    weights[1:] = 1.0 / np.sqrt(freqs[1:])
    shaped = np.fft.irfft(spec * weights, n)
    return shaped / (np.std(shaped) + 1e-12)


def speech_surrogate(n: int, fs: int, rng: np.random.Generator,
                     syllable_rate: float = 4.0) -> np.ndarray:
    """Corpus-free speech stand-in: pink noise with a syllabic envelope.

    Amplitude modulation at the given syllable rate plus randomly placed
    pauses with raised-cosine edges; roughly matches the temporal sparsity
    that distinguishes speech from stationary noise.
    """
    base = pink_noise(n, rng)
    t = np.arange(n) / fs
    phase = rng.uniform(0.0, 2.0 * math.pi)
    envelope = 0.35 + 0.65 * 0.5 * (1.0 + np.sin(2.0 * math.pi * syllable_rate * t + phase))
    mask = np.ones(n)
    pos = 0
    while pos < n:
        word = int(rng.uniform(0.25, 0.70) * fs)
        pause = int(rng.uniform(0.08, 0.30) * fs)
        mask[min(pos + word, n):min(pos + word + pause, n)] = 0.0
        pos += word + pause
    ramp = int(0.02 * fs)
    if ramp > 1:  # raised-cosine edges around pauses
        w = np.hanning(2 * ramp + 1)
        mask = np.convolve(mask, w / w.sum(), mode="same")
    sig = base * envelope * mask
    rms = np.sqrt(np.mean(sig ** 2))
    return sig / (rms + 1e-12)


class SpeechCorpus:
    """Pool of 16 kHz mono WAV files used as source material."""

    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise ConfigurationError(f"speech corpus directory {directory} not found")
        self.files = sorted(self.directory.glob("**/*.wav"))
        if not self.files:
            raise ConfigurationError(f"no WAV files under {directory}")

    def draw(self, n: int, fs: int, rng: np.random.Generator) -> np.ndarray:
        path = self.files[int(rng.integers(0, len(self.files)))]
        data, file_fs = load_wav(path)
        if file_fs != fs:
            raise ConfigurationError(
                f"{path} has sample rate {file_fs}, expected {fs} (no resampling)")
        mono = data[0]
        if len(mono) < n:
            reps = int(math.ceil(n / len(mono)))
            mono = np.tile(mono, reps)
        start = int(rng.integers(0, len(mono) - n + 1)) if len(mono) > n else 0
        seg = mono[start:start + n]
        rms = np.sqrt(np.mean(seg ** 2))
        return seg / (rms + 1e-12)


def source_signal(event: SourceEvent, fs: int, rng: np.random.Generator,
                  corpus: SpeechCorpus | None = None) -> np.ndarray:
    n = int(round(event.duration * fs))
    if event.signal_kind == "white-noise":
        return white_noise(n, rng)
    if event.signal_kind == "speech-surrogate":
        return speech_surrogate(n, fs, rng)
    if event.signal_kind == "speech-file":
        if corpus is None:
            raise ConfigurationError("speech-file source requires a corpus directory")
        return corpus.draw(n, fs, rng)
    if event.signal_kind == "impulse":
        sig = np.zeros(n)
        sig[0] = 1.0
        return sig
    raise ConfigurationError(f"unknown signal kind {event.signal_kind!r}")


@dataclass
class SignalBuffer:
    """Multichannel sample-synchronous audio: data is (channels, samples)."""

    data: np.ndarray
    sample_rate: int
    meta: dict = field(default_factory=dict)

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class RenderOptions:
    beta_override: float | None = None   # e.g. 0.0 for anechoic test scenes
    num_taps: int | None = None
    max_order: int | None = None
    node_offsets: bool = False           # rough-synchronization model
    corpus_dir: str | None = None


def render_node_signals(scene: SceneSpec,
                        options: RenderOptions = RenderOptions()) -> list[SignalBuffer]:
    """Per-node six-channel recordings of all scene source events.

    Each microphone channel is the sum over events of (source signal
    convolved with the source-to-mic RIR), with events placed at their start
    times. Channels of one node are sample-synchronous; when enabled, each
    node receives one constant offset drawn uniformly in +-32 ms.
    """
    fs = scene.sample_rate
    rng = np.random.default_rng(scene.rng_seed)
    corpus = SpeechCorpus(options.corpus_dir) if options.corpus_dir else None
    signals = [source_signal(ev, fs, rng, corpus) for ev in scene.sources]

    num_taps = options.num_taps
    if num_taps is None:
        num_taps = rir_mod.default_num_taps(scene.room, fs)
    end_times = [ev.start * fs + len(sig) + num_taps - 1
                 for ev, sig in zip(scene.sources, signals)]
    total = int(math.ceil(max(end_times)))

    offsets = np.zeros(len(scene.nodes), dtype=np.int64)
    if options.node_offsets:
        max_off = int(MAX_NODE_OFFSET_S * fs)
        offsets = rng.integers(-max_off, max_off + 1, size=len(scene.nodes))

    buffers = []
    for j, node in enumerate(scene.nodes):
        mics = node.mic_positions()
        out = np.zeros((len(mics), total))
        for ev, sig in zip(scene.sources, signals):
            h = rir_mod.simulate_rirs(scene.room, ev.position3(), mics, fs,
                                      num_taps=num_taps,
                                      beta=options.beta_override,
                                      max_order=options.max_order)
            start = int(round(ev.start * fs))
            wet = fftconvolve(sig[None, :], h, axes=1)
            seg = slice(start, start + wet.shape[1])
            out[:, seg] += wet
        if offsets[j]:
            out = np.roll(out, int(offsets[j]), axis=1)
            if offsets[j] > 0:
                out[:, :offsets[j]] = 0.0
            else:
                out[:, offsets[j]:] = 0.0
        buffers.append(SignalBuffer(out, fs, meta={"node": j, "offset": int(offsets[j])}))
    return buffers


def add_awgn(signal: SignalBuffer, snr_db: float,
             rng: np.random.Generator) -> SignalBuffer:
    """Additive white Gaussian sensor noise at the given buffer-wide SNR.

    Noise is drawn independently per channel; its variance is set from the
    signal power measured over the full buffer. `snr_db = inf` returns the
    input unchanged.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return SignalBuffer(signal.data.copy(), signal.sample_rate, dict(signal.meta))
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite or +inf")
    power = float(np.mean(signal.data ** 2))
    if power <= 0.0:
        raise ValueError("zero-power signal: SNR undefined")
    noise_var = power / (10.0 ** (snr_db / 10.0))
    noise = math.sqrt(noise_var) * rng.standard_normal(signal.data.shape)
    meta = dict(signal.meta)
    meta["snr_db"] = float(snr_db)
    return SignalBuffer(signal.data + noise, signal.sample_rate, meta)


def training_snr(rng: np.random.Generator) -> int:
    """Integer training SNR drawn uniformly from [5, 30] dB."""
    return int(rng.integers(5, 31))
