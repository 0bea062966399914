"""Integrated loudness per the broadcast R 128 / BS.1770 recipe.

K-weighting is a high-shelf plus high-pass biquad pair designed from the
standard's analog prototype at the clip's sample rate. Loudness integrates
mean-square energy over 400 ms blocks at 75% overlap, with the -70 LUFS
absolute gate followed by the -10 LU relative gate.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import signal

from ..audio.clip import AudioClip
from ..errors import DomainError

BLOCK_SECONDS = 0.4
OVERLAP = 0.75
ABSOLUTE_GATE_LUFS = -70.0
RELATIVE_GATE_LU = -10.0
LOUDNESS_TOLERANCE_LUFS = 2.5
_OFFSET = -0.691  # calibration constant: a 997 Hz sine reads its unweighted level


def k_weighting_sos(sample_rate: int) -> np.ndarray:
    """Second-order sections for the two K-weighting stages at any rate."""
    # Stage 1: +4 dB high shelf (analog prototype per the standard).
    f0, gain_db, q = 1681.9744509555319, 3.99984385397, 0.7071752369554193
    k = math.tan(math.pi * f0 / sample_rate)
    vh = 10.0 ** (gain_db / 20.0)
    vb = vh**0.499666774155
    a0 = 1.0 + k / q + k * k
    shelf_b = [
        (vh + vb * k / q + k * k) / a0,
        2.0 * (k * k - vh) / a0,
        (vh - vb * k / q + k * k) / a0,
    ]
    shelf_a = [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0]

    # Stage 2: high-pass at 38 Hz.
    f0, q = 38.13547087613982, 0.5003270373253953
    k = math.tan(math.pi * f0 / sample_rate)
    a0 = 1.0 + k / q + k * k
    hp_b = [1.0, -2.0, 1.0]
    hp_a = [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0]

    return np.array([shelf_b + shelf_a, hp_b + hp_a])


def integrated_loudness(clip: AudioClip) -> float:
    """Gated integrated loudness in LUFS; -inf when every block is gated out."""
    if clip.duration < BLOCK_SECONDS:
        raise DomainError(
            f"loudness needs >= {BLOCK_SECONDS} s of audio, got {clip.duration:.2f} s"
        )
    weighted = signal.sosfilt(k_weighting_sos(clip.sample_rate), clip.samples)

    block = int(round(BLOCK_SECONDS * clip.sample_rate))
    hop = int(round(block * (1.0 - OVERLAP)))
    n_blocks = (len(weighted) - block) // hop + 1
    if n_blocks < 1:
        return float("-inf")
    idx = hop * np.arange(n_blocks)[:, None] + np.arange(block)[None, :]
    energies = np.mean(weighted[idx] ** 2, axis=1)

    with np.errstate(divide="ignore"):
        block_loudness = _OFFSET + 10.0 * np.log10(energies)
    kept = energies[block_loudness > ABSOLUTE_GATE_LUFS]
    if kept.size == 0:
        return float("-inf")
    relative_gate = _OFFSET + 10.0 * np.log10(kept.mean()) + RELATIVE_GATE_LU
    final = energies[
        (block_loudness > ABSOLUTE_GATE_LUFS) & (block_loudness > relative_gate)
    ]
    if final.size == 0:
        return float("-inf")
    return float(_OFFSET + 10.0 * np.log10(final.mean()))


def loudness_match(gen_lufs: float, ref_mean_lufs: float,
                   tolerance: float = LOUDNESS_TOLERANCE_LUFS) -> bool:
    """Boundary-inclusive loudness agreement within `tolerance` LUFS."""
    if not (math.isfinite(gen_lufs) and math.isfinite(ref_mean_lufs)):
        return False
    return abs(gen_lufs - ref_mean_lufs) <= tolerance
