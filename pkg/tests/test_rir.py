import numpy as np
import pytest

from wasncal.errors import MeasurementUnavailable
from wasncal.rir import (
    RIR, eyring_coefficient, first_arrival_index, measure_t60,
    reflection_coefficient, simulate_rir, simulate_rirs,
)
from wasncal.scenes import RoomSpec

FS = 16000


class TestAnechoic:
    def test_free_field_green_function(self):
        room = RoomSpec(6.0, 5.0, t60=0.3)
        r = simulate_rir(room, (1.0, 1.0, 1.5), (4.0, 1.0, 1.5), FS,
                         num_taps=400, beta=0.0)
        peak = int(np.argmax(np.abs(r.taps)))
        assert peak == round(FS * 3.0 / 343.0)
        assert r.taps[peak] == pytest.approx(1.0 / (4.0 * np.pi * 3.0), rel=0.03)

    def test_first_arrival_threshold(self):
        room = RoomSpec(6.0, 5.0, t60=0.3)
        r = simulate_rir(room, (1.2, 2.2, 1.5), (4.7, 3.1, 1.5), FS,
                         num_taps=600, beta=0.0)
        d = np.linalg.norm(np.array([1.2, 2.2, 1.5]) - np.array([4.7, 3.1, 1.5]))
        assert abs(first_arrival_index(r.taps) - round(FS * d / 343.0)) <= 1


class TestReciprocity:
    def test_bit_for_bit(self):
        room = RoomSpec(6.0, 5.0, t60=0.25)
        a = simulate_rir(room, (1.1, 1.3, 1.5), (4.2, 3.9, 1.5), FS)
        b = simulate_rir(room, (4.2, 3.9, 1.5), (1.1, 1.3, 1.5), FS)
        assert np.array_equal(a.taps, b.taps)

    def test_determinism(self):
        room = RoomSpec(6.0, 5.0, t60=0.25)
        a = simulate_rir(room, (1.1, 1.3, 1.5), (4.2, 3.9, 1.5), FS)
        b = simulate_rir(room, (1.1, 1.3, 1.5), (4.2, 3.9, 1.5), FS)
        assert np.array_equal(a.taps, b.taps)


class TestArrivalDelays:
    def test_thousand_random_pairs(self):
        room = RoomSpec(6.5, 5.5, t60=0.3)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            src = rng.uniform([0.3, 0.3, 0.3], [6.2, 5.2, 2.7])
            mic = rng.uniform([0.3, 0.3, 0.3], [6.2, 5.2, 2.7])
            d = np.linalg.norm(src - mic)
            if d < 0.05:
                continue
            r = simulate_rir(room, src, mic, FS, num_taps=700, beta=0.0)
            assert abs(first_arrival_index(r.taps) - round(FS * d / 343.0)) <= 1


class TestPositions:
    def test_position_on_wall_rejected(self):
        room = RoomSpec(6.0, 5.0, t60=0.3)
        with pytest.raises(ValueError):
            simulate_rir(room, (0.0, 1.0, 1.5), (4.0, 1.0, 1.5), FS, num_taps=200)
        with pytest.raises(ValueError):
            simulate_rir(room, (1.0, 1.0, 1.5), (6.0, 1.0, 1.5), FS, num_taps=200)

    def test_num_taps_shorter_than_t60_rejected(self):
        room = RoomSpec(6.0, 5.0, t60=0.5)
        with pytest.raises(ValueError):
            simulate_rir(room, (1.0, 1.0, 1.5), (4.0, 1.0, 1.5), FS, num_taps=1000)


class TestDecay:
    def test_schroeder_t60_within_20_percent(self):
        room = RoomSpec(6.0, 5.0, t60=0.4)
        r = simulate_rir(room, (2.0, 1.7, 1.5), (4.0, 3.0, 1.5), FS)
        assert measure_t60(r) == pytest.approx(0.4, rel=0.2)

    def test_calibrated_beta_below_eyring(self):
        room = RoomSpec(6.0, 5.0, t60=0.4)
        assert 0.0 < reflection_coefficient(room) < eyring_coefficient(room) < 1.0


class TestMeasureT60:
    def test_synthetic_exponential_decay(self):
        t60 = 0.3
        n = np.arange(int(FS * 0.6))
        rng = np.random.default_rng(1)
        taps = 10.0 ** (-3.0 * n / (FS * t60)) * rng.standard_normal(len(n))
        assert measure_t60(RIR(taps, FS, None, None)) == pytest.approx(t60, rel=0.1)

    def test_anechoic_impulse_unavailable(self):
        taps = np.zeros(1000)
        taps[100] = 1.0
        with pytest.raises(MeasurementUnavailable):
            measure_t60(RIR(taps, FS, None, None))

    def test_amplitude_invariance(self):
        t60 = 0.25
        n = np.arange(int(FS * 0.5))
        rng = np.random.default_rng(2)
        taps = 10.0 ** (-3.0 * n / (FS * t60)) * rng.standard_normal(len(n))
        a = measure_t60(RIR(taps, FS, None, None))
        b = measure_t60(RIR(5.0 * taps, FS, None, None))
        assert a == pytest.approx(b, rel=1e-9)


class TestSharedImageSet:
    def test_multi_mic_matches_single(self):
        room = RoomSpec(6.0, 5.0, t60=0.2)
        src = (2.0, 2.0, 1.5)
        mics = np.array([[4.0, 3.0, 1.5], [4.05, 3.0, 1.5]])
        both = simulate_rirs(room, src, mics, FS)
        one = simulate_rirs(room, src, mics[:1], FS)
        assert np.array_equal(both[0], one[0])
