import math

import numpy as np
import pytest
from scipy.stats import kurtosis

from wasncal.errors import ConfigurationError
from wasncal.rir import simulate_rirs
from wasncal.scenes import ArrayNode, RoomSpec, SceneSpec, SourceEvent
from wasncal.signals import (
    RenderOptions, SignalBuffer, add_awgn, pink_noise, render_node_signals,
    source_signal, speech_surrogate, training_snr, white_noise,
)

FS = 16000


def make_scene(signal_kind="white-noise", n_sources=1, t60=0.3, seed=5):
    room = RoomSpec(6.0, 5.0, t60=t60)
    node = ArrayNode(center=(2.0, 2.0), orientation=0.4)
    sources = tuple(
        SourceEvent(position=(3.5 + 0.2 * i, 3.0), signal_kind=signal_kind,
                    duration=3.0, start=3.0 * i)
        for i in range(n_sources))
    return SceneSpec(room=room, nodes=(node,), sources=sources, rng_seed=seed)


class TestProviders:
    def test_white_noise_moments(self):
        x = white_noise(200000, np.random.default_rng(0))
        assert np.mean(x) == pytest.approx(0.0, abs=0.02)
        assert np.std(x) == pytest.approx(1.0, abs=0.02)

    def test_pink_noise_spectrum_slopes_down(self):
        x = pink_noise(1 << 16, np.random.default_rng(1))
        spec = np.abs(np.fft.rfft(x)) ** 2
        lo = spec[10:100].mean()
        hi = spec[5000:10000].mean()
        assert lo > 10 * hi

    def test_surrogate_has_pauses_and_unit_rms(self):
        x = speech_surrogate(FS * 3, FS, np.random.default_rng(2))
        assert np.sqrt(np.mean(x ** 2)) == pytest.approx(1.0, rel=1e-6)
        frame_rms = np.sqrt(np.mean(x[:FS * 3].reshape(-1, 160) ** 2, axis=1))
        assert (frame_rms < 0.05).mean() > 0.05  # some near-silent stretches

    def test_speech_file_without_corpus_errors(self):
        ev = SourceEvent(position=(3.0, 3.0), signal_kind="speech-file")
        with pytest.raises(ConfigurationError):
            source_signal(ev, FS, np.random.default_rng(0))


class TestRenderNodeSignals:
    def test_impulse_source_reproduces_rirs(self):
        scene = make_scene(signal_kind="impulse")
        opts = RenderOptions(beta_override=0.0, num_taps=600)
        buffers = render_node_signals(scene, opts)
        assert len(buffers) == 1
        out = buffers[0]
        assert out.num_channels == 6
        mics = scene.nodes[0].mic_positions()
        h = simulate_rirs(scene.room, scene.sources[0].position3(), mics, FS,
                          num_taps=600, beta=0.0)
        assert np.allclose(out.data[:, :600], h, atol=1e-12)

    def test_two_sequential_sources_length(self):
        scene = make_scene(n_sources=2)
        buffers = render_node_signals(scene)
        assert buffers[0].num_samples >= 6 * FS

    def test_reverberated_noise_stays_gaussian(self):
        scene = make_scene()
        out = render_node_signals(scene)[0]
        seg = out.data[:, FS // 2:2 * FS]  # steady-state portion
        for ch in range(6):
            assert abs(kurtosis(seg[ch])) < 0.5

    def test_fixed_seed_bit_identical(self):
        a = render_node_signals(make_scene())[0]
        b = render_node_signals(make_scene())[0]
        assert np.array_equal(a.data, b.data)

    def test_node_offsets_disabled_by_default(self):
        out = render_node_signals(make_scene())[0]
        assert out.meta["offset"] == 0

    def test_node_offsets_bounded(self):
        scene = make_scene()
        out = render_node_signals(scene, RenderOptions(node_offsets=True))[0]
        assert abs(out.meta["offset"]) <= int(0.032 * FS)


class TestAwgn:
    def test_measured_snr_30db(self):
        rng = np.random.default_rng(3)
        sig = SignalBuffer(rng.standard_normal((2, FS * 3)), FS)
        noisy = add_awgn(sig, 30.0, np.random.default_rng(4))
        noise = noisy.data - sig.data
        snr = 10 * np.log10(np.mean(sig.data ** 2) / np.mean(noise ** 2))
        assert snr == pytest.approx(30.0, abs=0.1)

    def test_infinite_snr_identity(self):
        rng = np.random.default_rng(5)
        sig = SignalBuffer(rng.standard_normal((1, 1000)), FS)
        out = add_awgn(sig, math.inf, np.random.default_rng(6))
        assert np.array_equal(out.data, sig.data)

    def test_zero_db_noise_power(self):
        rng = np.random.default_rng(7)
        data = rng.standard_normal((1, FS * 10))
        data /= np.sqrt(np.mean(data ** 2))  # unit power
        sig = SignalBuffer(data, FS)
        noisy = add_awgn(sig, 0.0, np.random.default_rng(8))
        noise_power = np.mean((noisy.data - sig.data) ** 2)
        assert noise_power == pytest.approx(1.0, rel=0.01)

    def test_zero_power_signal_rejected(self):
        sig = SignalBuffer(np.zeros((1, 100)), FS)
        with pytest.raises(ValueError):
            add_awgn(sig, 10.0, np.random.default_rng(0))


class TestTrainingSnr:
    def test_integer_range(self):
        rng = np.random.default_rng(9)
        draws = {training_snr(rng) for _ in range(2000)}
        assert draws <= set(range(5, 31))
        assert min(draws) == 5 and max(draws) == 30
