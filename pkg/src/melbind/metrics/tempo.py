"""Tempo estimation from a spectral-flux onset envelope.

The envelope is the half-wave-rectified frame difference of the log-mel
spectrogram, autocorrelated over lags covering 40..200 BPM. The best lag is
refined by parabolic interpolation; peaks near half and double the period
are reported as octave candidates instead of being silently folded in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..audio.clip import AudioClip
from ..audio.mel import MelFrontend
from ..errors import DomainError

BPM_LO, BPM_HI = 40.0, 200.0
BPM_TOLERANCE = 5.0
MIN_SECONDS = 4.0

_frontend = MelFrontend()


@dataclass
class TempoEstimate:
    bpm: Optional[float]
    octave_candidates: list[float] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.bpm is not None


def onset_envelope(clip: AudioClip) -> tuple[np.ndarray, float]:
    """Half-wave rectified log-mel flux and its frame rate in Hz.

    Log magnitudes make the envelope invariant to overall gain.
    """
    frames = _frontend.log_mel(clip).frames
    flux = np.maximum(np.diff(frames, axis=0), 0.0).sum(axis=1)
    return flux, clip.sample_rate / _frontend.hop


def _parabolic(ys: np.ndarray, i: int) -> float:
    if i <= 0 or i >= len(ys) - 1:
        return float(i)
    denom = ys[i - 1] - 2.0 * ys[i] + ys[i + 1]
    if denom == 0.0:
        return float(i)
    return i + 0.5 * (ys[i - 1] - ys[i + 1]) / denom


def estimate_bpm(clip: AudioClip) -> TempoEstimate:
    if clip.duration < MIN_SECONDS:
        raise DomainError(f"tempo estimation needs >= {MIN_SECONDS} s, got {clip.duration:.2f} s")
    env, frame_rate = onset_envelope(clip)
    if env.size == 0 or np.ptp(env) < 1e-10:
        return TempoEstimate(None)

    env = env - env.mean()
    ac = np.correlate(env, env, mode="full")[len(env) - 1 :]
    if ac[0] <= 0:
        return TempoEstimate(None)
    ac = ac / ac[0]

    lag_lo = max(2, int(np.floor(frame_rate * 60.0 / BPM_HI)))
    lag_hi = min(len(ac) - 2, int(np.ceil(frame_rate * 60.0 / BPM_LO)))
    if lag_hi <= lag_lo:
        return TempoEstimate(None)

    window = ac[lag_lo : lag_hi + 1]
    peak = lag_lo + int(np.argmax(window))
    best_lag = _parabolic(ac, peak)
    bpm = 60.0 * frame_rate / best_lag

    candidates = []
    for factor in (0.5, 2.0):
        lag = best_lag * factor
        idx = int(round(lag))
        if lag_lo <= idx <= lag_hi and ac[idx] >= 0.5 * ac[peak]:
            candidates.append(60.0 * frame_rate / _parabolic(ac, idx))
    return TempoEstimate(float(bpm), candidates)


def bpm_match(gen_bpm: Optional[float], ref_bpm: Optional[float],
              tolerance: float = BPM_TOLERANCE) -> bool:
    """Boundary-inclusive tempo agreement within `tolerance` BPM."""
    if gen_bpm is None or ref_bpm is None:
        return False
    return abs(gen_bpm - ref_bpm) <= tolerance
