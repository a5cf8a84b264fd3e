"""Signal features: STFT, pair coherence, CDR-based diffuseness, MFCC.

Analysis setup: Blackman window of 25 ms (400 samples at 16 kHz), 10 ms
(160 sample) shift, 512-point FFT, one-sided spectra. Power spectral
densities are recursively averaged with forgetting factor 0.95. The
coherent-to-diffuse power ratio per time-frequency bin is mapped to the
diffuseness D = 1/(1 + CDR) in [0, 1]; its average over the 125 Hz-3.5 kHz
band and all frames gives the scalar feature used by the regression
baseline.
"""

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.signal import lfilter

WINDOW_LEN = 400
HOP = 160
NFFT = 512
FORGETTING = 0.95
BAND_HZ = (125.0, 3500.0)
CDR_MAX = 1e4
PSD_FLOOR = 1e-12
MIC_SPACING = 0.05

MFCC_COEFFS = 23
MEL_FILTERS = 40
PREEMPHASIS = 0.97
LOG_FLOOR = 1e-10


@dataclass
class Spectrogram:
    """Complex one-sided STFT, indexed (frequency bin, time frame)."""

    values: np.ndarray
    sample_rate: int
    window_len: int = WINDOW_LEN
    shift: int = HOP

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]

    def bin_freqs(self) -> np.ndarray:
        return np.arange(self.values.shape[0]) * self.sample_rate / NFFT


def num_frames(num_samples: int) -> int:
    return 1 + (num_samples - WINDOW_LEN) // HOP


def _frame(signal: np.ndarray) -> np.ndarray:
    n = len(signal)
    if n < WINDOW_LEN:
        raise ValueError(f"signal of {n} samples shorter than one {WINDOW_LEN} sample window")
    t = num_frames(n)
    idx = np.arange(WINDOW_LEN)[None, :] + HOP * np.arange(t)[:, None]
    return signal[idx]


def stft(signal: np.ndarray, fs: int = 16000) -> Spectrogram:
    frames = _frame(np.asarray(signal, dtype=np.float64))
    window = np.blackman(WINDOW_LEN)
    spec = np.fft.rfft(frames * window, NFFT, axis=1)
    return Spectrogram(values=spec.T, sample_rate=fs)


@dataclass
class PSDState:
    """Recursively averaged auto-/cross-power spectral densities."""

    auto_psd_1: np.ndarray
    auto_psd_2: np.ndarray
    cross_psd: np.ndarray
    forgetting: float = FORGETTING


def _recursive_average(x: np.ndarray, forgetting: float) -> np.ndarray:
    """First-order recursion y[l] = a y[l-1] + (1-a) x[l], y[0] = x[0]."""
    if forgetting == 0.0:
        return x.copy()
    zi = forgetting * x[:, :1]
    y, _ = lfilter([1.0 - forgetting], [1.0, -forgetting], x, axis=1, zi=zi)
    return y


def recursive_psd(spec_1: Spectrogram, spec_2: Spectrogram,
                  forgetting: float = FORGETTING) -> PSDState:
    """Auto- and cross-PSDs of a microphone pair, averaged over frames.

    The recursion starts from the first frame's instantaneous products, so
    there is no zero-initialization bias.
    """
    if spec_1.values.shape != spec_2.values.shape:
        raise ValueError(f"spectrogram shapes differ: "
                         f"{spec_1.values.shape} vs {spec_2.values.shape}")
    if not 0.0 <= forgetting < 1.0:
        raise ValueError("forgetting factor must lie in [0, 1)")
    x1, x2 = spec_1.values, spec_2.values
    return PSDState(
        auto_psd_1=_recursive_average(np.abs(x1) ** 2, forgetting),
        auto_psd_2=_recursive_average(np.abs(x2) ** 2, forgetting),
        cross_psd=_recursive_average(x1 * np.conj(x2), forgetting),
        forgetting=forgetting,
    )


def diffuse_coherence(bin_freq, mic_spacing: float = MIC_SPACING,
                      c: float = 343.0):
    """Coherence of a spherically isotropic field between two microphones."""
    if mic_spacing <= 0:
        raise ValueError("microphone spacing must be positive")
    return np.sinc(2.0 * np.asarray(bin_freq, dtype=np.float64) * mic_spacing / c)


def estimate_cdr(psd: PSDState, coherence: np.ndarray) -> np.ndarray:
    """DoA-independent coherent-to-diffuse power ratio per (bin, frame).

    Solves the diffuse-plus-coherent coherence model for the power ratio
    given only the magnitude of the observed coherence and the diffuse-field
    coherence per bin; the result is clamped to [0, CDR_MAX]. Bins with
    near-zero auto-PSD are treated as silence (CDR 0, fully diffuse).
    """
    denom_psd = psd.auto_psd_1 * psd.auto_psd_2
    silence = (psd.auto_psd_1 < PSD_FLOOR) | (psd.auto_psd_2 < PSD_FLOOR)
    with np.errstate(invalid="ignore", divide="ignore"):
        gx = psd.cross_psd / np.sqrt(denom_psd)
    gx = np.where(silence, 0.0, gx)
    mag2 = np.abs(gx) ** 2
    over = mag2 > 1.0  # estimation noise can push |coherence| past 1
    np.clip(mag2, 0.0, 1.0, out=mag2)
    gre = np.real(gx)
    gd = np.broadcast_to(np.asarray(coherence, dtype=np.float64)[:, None], gx.shape)

    arg = (gd ** 2 * gre ** 2 - gd ** 2 * mag2 + gd ** 2 - 2.0 * gd * gre + mag2)
    num = gd * gre - mag2 - np.sqrt(np.maximum(arg, 0.0))
    den = mag2 - 1.0
    # |coherence| -> 1 drives the ratio to +inf unless the numerator vanishes
    # too (observed == diffuse model, e.g. at DC where both are 1).
    degenerate = den > -1e-12
    coherent = over | (degenerate & (np.abs(num) > 1e-9))
    with np.errstate(invalid="ignore", divide="ignore"):
        cdr = num / den
    cdr = np.where(degenerate, 0.0, cdr)
    cdr = np.where(coherent, CDR_MAX, cdr)
    cdr = np.where(silence, 0.0, cdr)
    return np.clip(cdr, 0.0, CDR_MAX)


def band_bin_indices(fs: int = 16000, band: tuple[float, float] = BAND_HZ) -> np.ndarray:
    """One-sided FFT bins whose center frequency lies inside the band."""
    freqs = np.arange(NFFT // 2 + 1) * fs / NFFT
    return np.nonzero((freqs >= band[0]) & (freqs <= band[1]))[0]


@dataclass
class DiffusenessMap:
    """Per-bin diffuseness over the analysis band plus its scalar average."""

    values: np.ndarray          # (band bins, frames), each in [0, 1]
    band_bins: np.ndarray       # FFT bin indices of the rows
    zeta: float                 # mean over band bins and frames
    sample_rate: int = 16000

    def time_averaged(self) -> np.ndarray:
        return self.values.mean(axis=1)


def cdr_to_diffuseness(cdr: np.ndarray, fs: int = 16000,
                       band: tuple[float, float] = BAND_HZ) -> DiffusenessMap:
    """Diffuseness D = 1/(1 + CDR), restricted to the analysis band."""
    if np.any(cdr < 0):
        raise ValueError("CDR must be non-negative")
    bins_ = band_bin_indices(fs, band)
    values = 1.0 / (1.0 + cdr[bins_, :])
    return DiffusenessMap(values=values, band_bins=bins_,
                          zeta=float(values.mean()), sample_rate=fs)


def pair_diffuseness(sig_1: np.ndarray, sig_2: np.ndarray, fs: int = 16000,
                     mic_spacing: float = MIC_SPACING,
                     c: float = 343.0) -> DiffusenessMap:
    """Full chain from a microphone pair's time signals to diffuseness."""
    s1 = stft(sig_1, fs)
    s2 = stft(sig_2, fs)
    psd = recursive_psd(s1, s2)
    gd = diffuse_coherence(s1.bin_freqs(), mic_spacing, c)
    return cdr_to_diffuseness(estimate_cdr(psd, gd), fs)


# --- MFCC --------------------------------------------------------------------

def _mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_inv(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(fs: int = 16000, num_filters: int = MEL_FILTERS) -> np.ndarray:
    """(num_filters, NFFT/2+1) triangular filters spanning 0 to fs/2."""
    edges = _mel_inv(np.linspace(_mel(0.0), _mel(fs / 2.0), num_filters + 2))
    freqs = np.arange(NFFT // 2 + 1) * fs / NFFT
    bank = np.zeros((num_filters, len(freqs)))
    for i in range(num_filters):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        bank[i] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def mfcc(signal: np.ndarray, fs: int = 16000) -> np.ndarray:
    """23 mel-frequency cepstral coefficients per frame, shape (23, T).

    Same 25 ms / 10 ms Blackman framing as the coherence features, 0.97
    pre-emphasis, 40 mel filters over the full band, orthonormal DCT-II.
    """
    x = np.asarray(signal, dtype=np.float64)
    x = np.concatenate([x[:1], x[1:] - PREEMPHASIS * x[:-1]])
    spec = stft(x, fs)
    power = np.abs(spec.values) ** 2
    mel_energy = mel_filterbank(fs) @ power
    log_energy = np.log(np.maximum(mel_energy, LOG_FLOOR))
    cepstra = dct(log_energy, type=2, axis=0, norm="ortho")
    return cepstra[:MFCC_COEFFS, :]
