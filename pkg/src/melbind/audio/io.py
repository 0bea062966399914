"""WAV read/write with resampling to the canonical 16 kHz mono format.

Accepts 16-bit integer and 32-bit float PCM; stereo is averaged to mono.
Anything else is rejected rather than guessed at.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from ..errors import AudioFormatError, UnsupportedAudioError
from .clip import DEFAULT_SAMPLE_RATE, AudioClip

_INT16_SCALE = 32768.0


def read_wav(path: str | Path, target_rate: int = DEFAULT_SAMPLE_RATE) -> AudioClip:
    """Load a PCM WAV file as a mono clip at `target_rate`."""
    path = Path(path)
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise
    except ValueError as exc:
        msg = str(exc)
        if "Unknown wave file format" in msg or "Unsupported" in msg:
            raise UnsupportedAudioError(f"{path}: {msg}") from exc
        raise AudioFormatError(f"{path}: {msg}") from exc
    except Exception as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / _INT16_SCALE
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise UnsupportedAudioError(
            f"{path}: unsupported sample format {data.dtype}; expected int16 or float32"
        )

    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    elif samples.ndim != 1:
        raise AudioFormatError(f"{path}: unexpected channel layout with shape {data.shape}")

    if rate != target_rate:
        g = math.gcd(int(rate), int(target_rate))
        samples = resample_poly(samples, target_rate // g, rate // g)

    return AudioClip(samples, target_rate)


def write_wav(clip: AudioClip, path: str | Path, subtype: str = "int16") -> None:
    """Write a clip as 16-bit integer (default) or 32-bit float PCM."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    samples = np.clip(clip.samples, -1.0, 1.0)
    if subtype == "int16":
        # Symmetric scale keeps the roundtrip error within one quantization step.
        data = np.clip(np.round(samples * _INT16_SCALE), -32768, 32767).astype(np.int16)
    elif subtype == "float32":
        data = samples.astype(np.float32)
    else:
        raise UnsupportedAudioError(f"unsupported write subtype {subtype!r}")
    wavfile.write(str(path), clip.sample_rate, data)
