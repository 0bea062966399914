"""Mono audio clip container and amplitude helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError

DEFAULT_SAMPLE_RATE = 16000


@dataclass
class AudioClip:
    """Mono PCM audio. Samples are float64 in [-1, 1] once peak-normalized."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate <= 0:
            raise DomainError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("audio samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)

    def peak(self) -> float:
        if len(self.samples) == 0:
            return 0.0
        return float(np.max(np.abs(self.samples)))

    def rms(self) -> float:
        if len(self.samples) == 0:
            return 0.0
        return float(np.sqrt(np.mean(np.square(self.samples))))

    def copy(self) -> "AudioClip":
        return AudioClip(self.samples.copy(), self.sample_rate)


def peak_normalize(clip: AudioClip, headroom: float = 1.0) -> AudioClip:
    """Scale so the peak equals `headroom`. Silent clips pass through."""
    p = clip.peak()
    if p == 0.0:
        return clip.copy()
    return AudioClip(clip.samples * (headroom / p), clip.sample_rate)


def normalize_if_clipping(clip: AudioClip) -> AudioClip:
    """Peak-normalize only when samples exceed full scale."""
    if clip.peak() > 1.0:
        return peak_normalize(clip)
    return clip


def concatenate(clips: list[AudioClip]) -> AudioClip:
    if not clips:
        raise DomainError("cannot concatenate an empty clip list")
    rates = {c.sample_rate for c in clips}
    if len(rates) != 1:
        raise DomainError(f"sample rates differ: {sorted(rates)}")
    return AudioClip(np.concatenate([c.samples for c in clips]), clips[0].sample_rate)
