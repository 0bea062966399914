"""SNR-controlled additive mixing."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateInputError, DomainError
from .clip import AudioClip, normalize_if_clipping


def fit_length(noise: AudioClip, n_samples: int) -> AudioClip:
    """Crop or loop `noise` to exactly `n_samples`."""
    if len(noise) == 0:
        raise DegenerateInputError("noise clip is empty")
    reps = int(np.ceil(n_samples / len(noise)))
    samples = np.tile(noise.samples, reps)[:n_samples]
    return AudioClip(samples, noise.sample_rate)


def snr_gain(signal: AudioClip, noise: AudioClip, snr_db: float) -> float:
    """Gain for `noise` so that 10*log10(P_signal / P_scaled_noise) == snr_db."""
    rms_n = noise.rms()
    if rms_n == 0.0:
        raise DegenerateInputError("noise has zero power")
    rms_s = signal.rms()
    if rms_s == 0.0:
        raise DegenerateInputError("signal has zero power")
    return (rms_s / rms_n) * 10.0 ** (-snr_db / 20.0)


def mix_with_snr(
    signal: AudioClip,
    noise: AudioClip,
    snr_db: float,
    return_noise: bool = False,
):
    """Add noise at the requested signal-to-noise ratio.

    The noise is cropped or looped to the signal length, then scaled so the
    RMS power ratio matches `snr_db`. If the sum would clip, the mix is
    peak-normalized (both components scaled together, so the SNR holds).

    With `return_noise=True` returns `(mix, scaled_noise)` where `scaled_noise`
    is the exact additive component after any common normalization.
    """
    if signal.sample_rate != noise.sample_rate:
        raise DomainError(
            f"sample rates differ: {signal.sample_rate} vs {noise.sample_rate}"
        )
    noise = fit_length(noise, len(signal))
    g = snr_gain(signal, noise, snr_db)
    scaled = noise.samples * g
    mixed = AudioClip(signal.samples + scaled, signal.sample_rate)
    peak = mixed.peak()
    if peak > 1.0:
        mixed = AudioClip(mixed.samples / peak, signal.sample_rate)
        scaled = scaled / peak
    if return_noise:
        return mixed, AudioClip(scaled, signal.sample_rate)
    return mixed
