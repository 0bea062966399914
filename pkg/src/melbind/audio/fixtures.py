"""Synthetic audio fixtures with known ground truth.

Three families stand in for recorded material: click tracks with an exact
beat grid, tonal arpeggios in a known key and scale, and colored noise
textures. Everything is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DomainError
from .clip import DEFAULT_SAMPLE_RATE, AudioClip, peak_normalize

PITCH_CLASS_NAMES = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"]
_FLAT_SYNONYMS = {"DB": 1, "EB": 3, "GB": 6, "AB": 8, "BB": 10}

BPM_MIN, BPM_MAX = 40.0, 200.0

MAJOR_DEGREES = (0, 2, 4, 5, 7, 9, 11)
# Harmonic minor: the raised seventh keeps the fixtures unambiguous for
# correlation against both Temperley and Krumhansl minor profiles.
MINOR_DEGREES = (0, 2, 3, 5, 7, 8, 11)

_C4 = 261.6255653005986
_FIXTURE_PEAK = 0.9


def pitch_class_index(key: int | str) -> int:
    if isinstance(key, (int, np.integer)):
        idx = int(key)
        if not 0 <= idx <= 11:
            raise DomainError(f"pitch class index {idx} outside 0..11")
        return idx
    name = str(key).strip().upper()
    if name in PITCH_CLASS_NAMES:
        return PITCH_CLASS_NAMES.index(name)
    if name in _FLAT_SYNONYMS:
        return _FLAT_SYNONYMS[name]
    raise DomainError(f"unknown pitch class {key!r}")


def _check_bpm(bpm: float) -> float:
    if not BPM_MIN <= bpm <= BPM_MAX:
        raise DomainError(f"bpm {bpm} outside [{BPM_MIN}, {BPM_MAX}]")
    return float(bpm)


def beat_period_samples(bpm: float, sample_rate: int = DEFAULT_SAMPLE_RATE) -> int:
    """Beat period quantized to the sample grid."""
    return int(round(sample_rate * 60.0 / _check_bpm(bpm)))


def click_track(
    bpm: float,
    duration: float,
    seed: int = 0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> AudioClip:
    """Clicks at exact beat-period intervals on the sample grid."""
    period = beat_period_samples(bpm, sample_rate)
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    out = np.zeros(n)
    burst_len = int(0.008 * sample_rate)
    t = np.arange(burst_len) / sample_rate
    env = np.exp(-t / 0.002)
    for onset in range(0, n, period):
        f_click = 1500.0 * (1.0 + 0.05 * rng.uniform(-1, 1))
        tone = np.sin(2 * np.pi * f_click * t)
        burst = env * (0.75 * tone + 0.25 * rng.standard_normal(burst_len))
        amp = 1.0 + 0.1 * rng.uniform(-1, 1)
        stop = min(onset + burst_len, n)
        out[onset:stop] += amp * burst[: stop - onset]
    return peak_normalize(AudioClip(out, sample_rate), _FIXTURE_PEAK)


def _note(f0: float, length: int, sample_rate: int, phases: np.ndarray) -> np.ndarray:
    t = np.arange(length) / sample_rate
    harmonics = np.zeros(length)
    for k, amp in enumerate((1.0, 0.4, 0.2), start=1):
        harmonics += amp * np.sin(2 * np.pi * k * f0 * t + phases[k - 1])
    # 20 ms attack keeps onsets detectable without the pre-echo a hard edge
    # would force on the pooled-latent codec roundtrip
    attack = min(int(0.02 * sample_rate), length)
    env = np.exp(-t / 0.45)
    if attack > 0:
        env[:attack] *= np.linspace(0.0, 1.0, attack)
    return harmonics * env


def tonal(
    key: int | str,
    scale: str,
    bpm: float = 100.0,
    duration: float = 6.0,
    seed: int = 0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> AudioClip:
    """Arpeggiated triad plus scale run in the requested key, onsets on the beat grid.

    Triad notes carry roughly twice the level of passing scale notes so the
    strongest spectral peaks sit on the tonic chord.
    """
    tonic = pitch_class_index(key)
    scale = scale.lower()
    if scale == "major":
        degrees, third, sixth, seventh = MAJOR_DEGREES, 4, 9, 11
    elif scale == "minor":
        degrees, third, sixth, seventh = MINOR_DEGREES, 3, 8, 11
    else:
        raise DomainError(f"scale must be major or minor, got {scale!r}")

    period = beat_period_samples(bpm, sample_rate)
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)

    triad = {0, third, 7, 12}
    pattern = [0, third, 7, 12, 7, third, 0, 2, third, 5, 7, sixth, seventh, 12, 7, 0]
    note_len = min(int(1.5 * period), int(0.8 * sample_rate))

    out = np.zeros(n)
    beat = 0
    for onset in range(0, n, period):
        semis = pattern[beat % len(pattern)]
        beat += 1
        # tonic 0..11 plus pattern 0..12 keeps f0 in roughly 262..990 Hz
        f0 = _C4 * 2.0 ** ((tonic + semis) / 12.0)
        amp = (1.0 if semis % 12 in {d % 12 for d in triad} else 0.55)
        amp *= 1.0 + 0.05 * rng.uniform(-1, 1)
        phases = rng.uniform(0, 2 * np.pi, size=3)
        note = _note(f0, min(note_len, n - onset), sample_rate, phases)
        out[onset : onset + len(note)] += amp * note
    return peak_normalize(AudioClip(out, sample_rate), _FIXTURE_PEAK)


def noise_texture(
    color: str,
    duration: float = 6.0,
    seed: int = 0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> AudioClip:
    """Spectrally shaped noise: white, pink (1/f), or brown (1/f^2)."""
    alpha = {"white": 0.0, "pink": 1.0, "brown": 2.0}.get(color.lower())
    if alpha is None:
        raise DomainError(f"noise color must be white, pink, or brown, got {color!r}")
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    shaping = np.ones_like(freqs)
    shaping[1:] = freqs[1:] ** (-alpha / 2.0)
    shaping[0] = 0.0
    samples = np.fft.irfft(spectrum * shaping, n=n)
    return peak_normalize(AudioClip(samples, sample_rate), _FIXTURE_PEAK)


@dataclass
class FixtureSpec:
    """Declarative fixture description, as used by dataset manifests."""

    kind: str
    duration: float = 6.0
    seed: int = 0
    bpm: Optional[float] = None
    key: Optional[str] = None
    scale: Optional[str] = None
    color: Optional[str] = None

    def render(self, sample_rate: int = DEFAULT_SAMPLE_RATE) -> AudioClip:
        return synth_fixture(
            self.kind,
            duration=self.duration,
            seed=self.seed,
            sample_rate=sample_rate,
            bpm=self.bpm,
            key=self.key,
            scale=self.scale,
            color=self.color,
        )


def synth_fixture(
    kind: str,
    duration: float,
    seed: int = 0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    bpm: Optional[float] = None,
    key: Optional[str] = None,
    scale: Optional[str] = None,
    color: Optional[str] = None,
) -> AudioClip:
    kind = kind.lower()
    if kind == "click_track":
        if bpm is None:
            raise DomainError("click_track requires bpm")
        return click_track(bpm, duration, seed, sample_rate)
    if kind == "tonal":
        if key is None or scale is None:
            raise DomainError("tonal requires key and scale")
        return tonal(key, scale, bpm if bpm is not None else 100.0, duration, seed, sample_rate)
    if kind == "noise_texture":
        if color is None:
            raise DomainError("noise_texture requires color")
        return noise_texture(color, duration, seed, sample_rate)
    raise DomainError(f"unknown fixture kind {kind!r}")
