from .clip import DEFAULT_SAMPLE_RATE, AudioClip, concatenate, normalize_if_clipping, peak_normalize
from .codec import LATENT_DIM, LATENT_GRID, Latent, MelCodec, NormStats
from .fixtures import FixtureSpec, click_track, noise_texture, synth_fixture, tonal
from .io import read_wav, write_wav
from .mel import MelFrontend, MelSpectrogram, mel_band_edges, mel_filterbank
from .mixing import mix_with_snr, snr_gain

__all__ = [
    "DEFAULT_SAMPLE_RATE",
    "AudioClip",
    "concatenate",
    "normalize_if_clipping",
    "peak_normalize",
    "LATENT_DIM",
    "LATENT_GRID",
    "Latent",
    "MelCodec",
    "NormStats",
    "FixtureSpec",
    "click_track",
    "noise_texture",
    "synth_fixture",
    "tonal",
    "read_wav",
    "write_wav",
    "MelFrontend",
    "MelSpectrogram",
    "mel_band_edges",
    "mel_filterbank",
    "mix_with_snr",
    "snr_gain",
]
