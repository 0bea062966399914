"""STFT and log-mel front end.

Fixed settings: 1024-sample Hann window, 256-sample hop, 64 mel bands,
power floored at -80 dB. Frames are taken without center padding, so
n_frames = floor((len - window) / hop) + 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sp_fft

from ..errors import DomainError
from .clip import DEFAULT_SAMPLE_RATE, AudioClip

WINDOW = 1024
HOP = 256
N_MELS = 64
LOG_FLOOR_DB = -80.0
_POWER_FLOOR = 10.0 ** (LOG_FLOOR_DB / 10.0)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges(
    n_mels: int = N_MELS,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    f_min: float = 0.0,
) -> np.ndarray:
    """n_mels + 2 edge frequencies in Hz, equally spaced on the mel scale."""
    return mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(sample_rate / 2.0), n_mels + 2))


def mel_filterbank(
    n_mels: int = N_MELS,
    n_fft: int = WINDOW,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> np.ndarray:
    """Triangular peak-one filters, shape [n_mels, n_fft // 2 + 1]."""
    edges = mel_band_edges(n_mels, sample_rate)
    fft_freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    bank = np.zeros((n_mels, len(fft_freqs)))
    for m in range(n_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (fft_freqs - lo) / max(center - lo, 1e-12)
        falling = (hi - fft_freqs) / max(hi - center, 1e-12)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, 1.0)
    return bank


def frame_count(n_samples: int, window: int = WINDOW, hop: int = HOP) -> int:
    if n_samples < window:
        return 0
    return (n_samples - window) // hop + 1


@lru_cache(maxsize=8)
def _hann(window: int, dtype: str = "float64") -> np.ndarray:
    return np.hanning(window).astype(dtype)


@lru_cache(maxsize=8)
def _hann_sq(window: int, dtype: str = "float64") -> np.ndarray:
    return (np.hanning(window) ** 2).astype(dtype)


def stft(samples: np.ndarray, window: int = WINDOW, hop: int = HOP) -> np.ndarray:
    """Complex STFT, shape [n_frames, window // 2 + 1]. No padding.

    Computes in the input's precision (float32 stays float32).
    """
    n = frame_count(len(samples), window, hop)
    if n == 0:
        raise DomainError(f"signal of {len(samples)} samples is shorter than the {window}-sample window")
    idx = hop * np.arange(n)[:, None] + np.arange(window)[None, :]
    win = _hann(window, samples.dtype.name if samples.dtype == np.float32 else "float64")
    return sp_fft.rfft(samples[idx] * win, axis=1)


def istft(spectrogram: np.ndarray, window: int = WINDOW, hop: int = HOP) -> np.ndarray:
    """Overlap-add inverse with the analysis window; length (n-1)*hop + window."""
    n_frames = spectrogram.shape[0]
    dtype = "float32" if spectrogram.dtype == np.complex64 else "float64"
    win = _hann(window, dtype)
    frames = sp_fft.irfft(spectrogram, n=window, axis=1) * win
    length = (n_frames - 1) * hop + window
    out = np.zeros(length, dtype=dtype)
    norm = np.zeros(length, dtype=dtype)
    win_sq = _hann_sq(window, dtype)
    if window % hop == 0:
        # overlap-add reduces to window//hop strided sums
        for k in range(window // hop):
            chunk = frames[:, k * hop : (k + 1) * hop]
            out[k * hop : k * hop + n_frames * hop].reshape(n_frames, hop)[:] += chunk
            norm[k * hop : k * hop + n_frames * hop].reshape(n_frames, hop)[:] += win_sq[
                k * hop : (k + 1) * hop
            ]
    else:
        for i in range(n_frames):
            out[i * hop : i * hop + window] += frames[i]
            norm[i * hop : i * hop + window] += win_sq
    return out / np.maximum(norm, 1e-12)


@dataclass
class MelSpectrogram:
    """Log-power mel frames, shape [n_frames, n_mels], floored at -80 dB."""

    frames: np.ndarray
    n_mels: int = N_MELS
    hop: int = HOP
    window: int = WINDOW
    sample_rate: int = DEFAULT_SAMPLE_RATE


class MelFrontend:
    """Shared analysis pipeline: clip -> power spectrogram -> log-mel."""

    def __init__(
        self,
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        window: int = WINDOW,
        hop: int = HOP,
        n_mels: int = N_MELS,
    ):
        self.sample_rate = sample_rate
        self.window = window
        self.hop = hop
        self.n_mels = n_mels
        self.filterbank = mel_filterbank(n_mels, window, sample_rate)
        # Uniform-spread initializer for the multiplicative inversion below.
        row_sums = np.maximum(self.filterbank.sum(axis=1, keepdims=True), 1e-12)
        self._spread = (self.filterbank / row_sums).T
        self._col_weight = np.maximum(self.filterbank.sum(axis=0), 1e-12)

    def power_spectrogram(self, samples: np.ndarray) -> np.ndarray:
        return np.abs(stft(samples, self.window, self.hop)) ** 2

    def log_mel(self, clip_or_samples) -> MelSpectrogram:
        samples = (
            clip_or_samples.samples
            if isinstance(clip_or_samples, AudioClip)
            else np.asarray(clip_or_samples, dtype=np.float64)
        )
        power = self.power_spectrogram(samples)
        mel_power = power @ self.filterbank.T
        frames = 10.0 * np.log10(np.maximum(mel_power, _POWER_FLOOR))
        return MelSpectrogram(frames, self.n_mels, self.hop, self.window, self.sample_rate)

    def mel_to_linear_power(self, mel_power: np.ndarray, iters: int = 10) -> np.ndarray:
        """Nonnegative inverse of the filterbank by multiplicative updates.

        Richardson-Lucy style: keeps quiet bands quiet (no ringing into the
        noise floor, unlike a pseudo-inverse) while matching loud bands.
        """
        mel_power = np.atleast_2d(mel_power)
        linear = mel_power @ self._spread.T
        for _ in range(iters):
            back = linear @ self.filterbank.T
            ratio = mel_power / np.maximum(back, 1e-30)
            linear = linear * ((ratio @ self.filterbank) / self._col_weight)
        return linear
