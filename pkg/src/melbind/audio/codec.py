"""Analytic latent codec standing in for a learned autoencoder.

Encoding pools the log-mel of each one-second segment down to a 16x16 patch
and standardizes it with corpus statistics. Decoding inverts the pooling,
maps mel back to a linear spectrum, and reconstructs phase with Griffin-Lim
from a zero-phase start, so both directions are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import DomainError
from .clip import DEFAULT_SAMPLE_RATE, AudioClip, concatenate, normalize_if_clipping
from .mel import LOG_FLOOR_DB, MelFrontend, frame_count, istft, stft

LATENT_GRID = 16
LATENT_DIM = LATENT_GRID * LATENT_GRID
GRIFFIN_LIM_ITERS = 32
SEGMENT_SECONDS = 1.0

# Per-dimension std is floored at 1 dB so near-constant (silent) mel cells
# cannot explode under standardization.
_STD_FLOOR_DB = 1.0


@dataclass
class NormStats:
    """Per-dimension standardization constants for pooled log-mel patches."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.std = np.asarray(self.std, dtype=np.float64).reshape(-1)
        if self.mean.shape != self.std.shape:
            raise DomainError("norm stats mean/std shapes differ")
        if np.any(self.std <= 0):
            raise DomainError("norm stats std must be positive")

    @classmethod
    def identity(cls, dim: int = LATENT_DIM) -> "NormStats":
        return cls(np.zeros(dim), np.ones(dim))

    def standardize(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def destandardize(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean


@dataclass
class Latent:
    """Flattened standardized 16x16 log-mel patch."""

    values: np.ndarray
    norm_stats: NormStats

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)

    @property
    def dim(self) -> int:
        return len(self.values)


def _bucket_sizes(n: int, k: int) -> np.ndarray:
    # Same partition as np.array_split: the first n % k buckets get one extra.
    base, extra = divmod(n, k)
    return np.array([base + 1] * extra + [base] * (k - extra))


def pool_to_grid(frames: np.ndarray, grid: int = LATENT_GRID) -> np.ndarray:
    """Average-pool [n_frames, n_mels] to [grid, grid] by bucket means."""
    pooled_rows = np.stack([b.mean(axis=0) for b in np.array_split(frames, grid, axis=0)])
    return np.stack(
        [b.mean(axis=1) for b in np.array_split(pooled_rows, grid, axis=1)], axis=1
    )


def unpool_from_grid(patch: np.ndarray, n_frames: int, n_mels: int) -> np.ndarray:
    """Exact right-inverse of pool_to_grid: repeat each cell across its bucket."""
    grid = patch.shape[0]
    rows = np.repeat(patch, _bucket_sizes(n_frames, grid), axis=0)
    return np.repeat(rows, _bucket_sizes(n_mels, grid), axis=1)


class MelCodec:
    """Fixed encoder/decoder pair over one-second latent segments."""

    def __init__(
        self,
        frontend: MelFrontend | None = None,
        norm_stats: NormStats | None = None,
        gl_iters: int = GRIFFIN_LIM_ITERS,
        segment_seconds: float = SEGMENT_SECONDS,
    ):
        self.frontend = frontend or MelFrontend()
        self.norm_stats = norm_stats or NormStats.identity()
        self.gl_iters = gl_iters
        self.segment_samples = int(round(segment_seconds * self.frontend.sample_rate))
        self.frames_per_segment = frame_count(
            self.segment_samples, self.frontend.window, self.frontend.hop
        )

    # ---- encoding -------------------------------------------------------

    def split_segments(self, clip: AudioClip) -> list[np.ndarray]:
        if clip.sample_rate != self.frontend.sample_rate:
            raise DomainError(
                f"clip rate {clip.sample_rate} != codec rate {self.frontend.sample_rate}"
            )
        n = len(clip) // self.segment_samples
        if n == 0:
            raise DomainError(
                f"clip of {clip.duration:.3f}s is shorter than the "
                f"{self.segment_samples / self.frontend.sample_rate:.1f}s analysis window"
            )
        return [
            clip.samples[i * self.segment_samples : (i + 1) * self.segment_samples]
            for i in range(n)
        ]

    def pooled_log_mel(self, samples: np.ndarray) -> np.ndarray:
        return pool_to_grid(self.frontend.log_mel(samples).frames)

    def encode_segment(self, samples: np.ndarray) -> Latent:
        patch = self.pooled_log_mel(samples)
        return Latent(self.norm_stats.standardize(patch.reshape(-1)), self.norm_stats)

    def encode(self, clip: AudioClip) -> list[Latent]:
        """One latent per full one-second segment; a shorter tail is dropped."""
        return [self.encode_segment(seg) for seg in self.split_segments(clip)]

    # ---- decoding -------------------------------------------------------

    def _griffin_lim(self, mel_power: np.ndarray, out_len: int) -> np.ndarray:
        """Griffin-Lim phase reconstruction from a zero-phase start, with a
        mel-domain gain correction each iteration.

        Plain magnitude projection minimizes a linear-scale error, which lets
        energy smear into quiet mel cells (inaudible linearly, large in dB).
        Rescaling each frame's bands toward the target mel power keeps quiet
        cells quiet. Frames are padded with silence on both sides so the
        returned region lies where the overlap-add norm is exactly COLA; the
        unstable outermost window tails are zeroed each iteration.
        """
        win, hop = self.frontend.window, self.frontend.hop
        # float32 internals: deterministic and ~2x faster, and far below the
        # dB-domain error floor of the pooled representation
        bank = self.frontend.filterbank.astype(np.float32)
        col_weight = self.frontend._col_weight.astype(np.float32)
        pad = 4
        target = np.vstack(
            [np.zeros((pad, mel_power.shape[1])), mel_power, np.zeros((pad, mel_power.shape[1]))]
        ).astype(np.float32)
        magnitude = np.sqrt(self.frontend.mel_to_linear_power(target)).astype(np.float32)
        edge = win - hop
        start = pad * hop

        def synth(spec: np.ndarray) -> np.ndarray:
            samples = istft(spec, win, hop)
            samples[:edge] = 0.0
            samples[-edge:] = 0.0
            return samples

        samples = synth(magnitude.astype(np.complex64))  # zero-phase init
        previous = None
        for _ in range(self.gl_iters):
            rebuilt = stft(samples, win, hop)
            # Accelerated update (momentum 0.9) escapes the zero-phase basin faster.
            accel = rebuilt if previous is None else rebuilt + 0.9 * (rebuilt - previous)
            previous = rebuilt
            current_mel = (accel.real**2 + accel.imag**2) @ bank.T
            band_gain = np.sqrt(target / np.maximum(current_mel, np.float32(1e-30)))
            bin_gain = np.clip((band_gain @ bank) / col_weight, 0.0, 10.0)
            samples = synth(accel * bin_gain)
        return np.asarray(samples[start : start + out_len], dtype=np.float64)

    def decode_segment(self, latent: Latent) -> np.ndarray:
        if latent.dim != LATENT_DIM:
            raise DomainError(f"latent dim {latent.dim} != {LATENT_DIM}")
        if not np.all(np.isfinite(latent.values)):
            raise DomainError("latent has non-finite entries")
        patch = self.norm_stats.destandardize(latent.values).reshape(LATENT_GRID, LATENT_GRID)
        log_mel = unpool_from_grid(patch, self.frames_per_segment, self.frontend.n_mels)
        log_mel = np.maximum(log_mel, LOG_FLOOR_DB)
        mel_power = 10.0 ** (log_mel / 10.0)
        return self._griffin_lim(mel_power, self.segment_samples)

    def decode(self, latents: Latent | Sequence[Latent]) -> AudioClip:
        if isinstance(latents, Latent):
            latents = [latents]
        if len(latents) == 0:
            raise DomainError("nothing to decode")
        clips = [
            AudioClip(self.decode_segment(z), self.frontend.sample_rate) for z in latents
        ]
        return normalize_if_clipping(concatenate(clips))

    # ---- corpus statistics ----------------------------------------------

    def fit_norm_stats(self, clips: Iterable[AudioClip]) -> NormStats:
        """Fit per-dimension stats over all one-second segments of the corpus."""
        patches = []
        for clip in clips:
            for seg in self.split_segments(clip):
                patches.append(self.pooled_log_mel(seg).reshape(-1))
        if not patches:
            raise DomainError("no segments to fit norm stats on")
        stack = np.stack(patches)
        mean = stack.mean(axis=0)
        std = np.maximum(stack.std(axis=0), _STD_FLOOR_DB)
        self.norm_stats = NormStats(mean, std)
        return self.norm_stats
