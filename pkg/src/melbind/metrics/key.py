"""Key and scale detection from harmonic pitch class profiles.

Spectral peaks vote for the pitch classes of their first four subharmonic
fundamental candidates with weights 0.8^k, giving a 12-bin HPCP per frame.
The time-averaged profile is correlated against 24 rotated major/minor key
profiles (Temperley by default, Krumhansl selectable).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..audio.clip import AudioClip
from ..audio.fixtures import PITCH_CLASS_NAMES
from ..audio.mel import stft
from ..errors import DomainError

MIN_SECONDS = 2.0
N_HARMONICS = 4
HARMONIC_DECAY = 0.8
PEAK_FLOOR_REL = 0.01
FREQ_LO, FREQ_HI = 60.0, 5000.0
CORRELATION_SPREAD_MIN = 0.05

KEY_PROFILES = {
    "temperley": {
        "major": np.array([5.0, 2.0, 3.5, 2.0, 4.5, 4.0, 2.0, 4.5, 2.0, 3.5, 1.5, 4.0]),
        "minor": np.array([5.0, 2.0, 3.5, 4.5, 2.0, 4.0, 2.0, 4.5, 3.5, 2.0, 1.5, 4.0]),
    },
    "krumhansl": {
        "major": np.array([6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88]),
        "minor": np.array([6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17]),
    },
}


@dataclass
class KeyEstimate:
    key: Optional[int]  # pitch class 0..11
    scale: Optional[str]  # "major" / "minor"

    @property
    def found(self) -> bool:
        return self.key is not None

    @property
    def key_name(self) -> Optional[str]:
        return None if self.key is None else PITCH_CLASS_NAMES[self.key]


def _frame_peaks(magnitude: np.ndarray, freqs: np.ndarray) -> list[tuple[float, float]]:
    """Local spectral maxima as (hz, amplitude), parabolic-refined."""
    floor = magnitude.max() * PEAK_FLOOR_REL
    if floor <= 0:
        return []
    peaks = []
    interior = np.flatnonzero(
        (magnitude[1:-1] > magnitude[:-2])
        & (magnitude[1:-1] >= magnitude[2:])
        & (magnitude[1:-1] > floor)
    ) + 1
    bin_hz = freqs[1] - freqs[0]
    for i in interior:
        if not FREQ_LO <= freqs[i] <= FREQ_HI:
            continue
        denom = magnitude[i - 1] - 2.0 * magnitude[i] + magnitude[i + 1]
        delta = 0.0 if denom == 0 else 0.5 * (magnitude[i - 1] - magnitude[i + 1]) / denom
        peaks.append((freqs[i] + delta * bin_hz, float(magnitude[i])))
    return peaks


def hpcp(clip: AudioClip) -> np.ndarray:
    """Time-averaged 12-bin harmonic pitch class profile, max-normalized."""
    spectrum = np.abs(stft(clip.samples))
    freqs = np.fft.rfftfreq(1024, d=1.0 / clip.sample_rate)
    profile = np.zeros(12)
    for frame in spectrum:
        for hz, amp in _frame_peaks(frame, freqs):
            for k in range(1, N_HARMONICS + 1):
                fundamental = hz / k
                if fundamental < 27.5:
                    break
                pc = int(round(12.0 * np.log2(fundamental / 440.0) + 69.0)) % 12
                profile[pc] += amp * HARMONIC_DECAY ** (k - 1)
    peak = profile.max()
    return profile / peak if peak > 0 else profile


def detect_key(clip: AudioClip, profile_set: str = "temperley") -> KeyEstimate:
    """Best-correlated key/scale; no-key when the correlations are near-uniform.

    Ties break toward the lower pitch class, then major over minor.
    """
    if clip.duration < MIN_SECONDS:
        raise DomainError(f"key detection needs >= {MIN_SECONDS} s, got {clip.duration:.2f} s")
    if profile_set not in KEY_PROFILES:
        raise DomainError(f"unknown profile set {profile_set!r}")
    chroma = hpcp(clip)
    if chroma.max() <= 0 or np.std(chroma) < 1e-12:
        return KeyEstimate(None, None)

    profiles = KEY_PROFILES[profile_set]
    candidates = []  # (corr, pitch class, scale order, scale)
    for order, scale in enumerate(("major", "minor")):
        base = profiles[scale]
        for pc in range(12):
            corr = np.corrcoef(chroma, np.roll(base, pc))[0, 1]
            candidates.append((float(corr), pc, order, scale))

    corrs = [c[0] for c in candidates]
    if max(corrs) - min(corrs) < CORRELATION_SPREAD_MIN:
        return KeyEstimate(None, None)
    best = sorted(candidates, key=lambda c: (-c[0], c[1], c[2]))[0]
    return KeyEstimate(best[1], best[3])


def key_scale_match(
    gen: KeyEstimate | tuple, ref: KeyEstimate | tuple
) -> tuple[bool, bool]:
    """Componentwise equality of (key, scale) against the reference mode."""
    g_key, g_scale = (gen.key, gen.scale) if isinstance(gen, KeyEstimate) else gen
    r_key, r_scale = (ref.key, ref.scale) if isinstance(ref, KeyEstimate) else ref
    key_ok = g_key is not None and r_key is not None and g_key == r_key
    scale_ok = g_scale is not None and r_scale is not None and g_scale == r_scale
    return key_ok, scale_ok
