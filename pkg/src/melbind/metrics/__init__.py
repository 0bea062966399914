from .embedder import (
    ContrastiveEmbedder,
    ToyFeatureEmbedder,
    audio_features,
    embed_audio,
    embed_set,
    load_embedding_file,
    save_embedding_file,
    train_contrastive,
)
from .key import KeyEstimate, detect_key, hpcp, key_scale_match
from .loudness import integrated_loudness, loudness_match
from .similarity import EmbeddingSet, clap_a, clap_t, fad, self_similarity
from .tempo import TempoEstimate, bpm_match, estimate_bpm, onset_envelope

__all__ = [
    "ContrastiveEmbedder",
    "ToyFeatureEmbedder",
    "audio_features",
    "embed_audio",
    "embed_set",
    "load_embedding_file",
    "save_embedding_file",
    "train_contrastive",
    "KeyEstimate",
    "detect_key",
    "hpcp",
    "key_scale_match",
    "integrated_loudness",
    "loudness_match",
    "EmbeddingSet",
    "clap_a",
    "clap_t",
    "fad",
    "self_similarity",
    "TempoEstimate",
    "bpm_match",
    "estimate_bpm",
    "onset_envelope",
]
