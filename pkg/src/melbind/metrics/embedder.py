"""Audio embedding backends for the similarity metrics.

Three interchangeable backends stand in for large pretrained embedders:
a deterministic feature projection (default), a small contrastive
audio-to-label head trained on the synthetic corpus (adds a text side for
prompt similarity), and precomputed embedding files so externally computed
vectors can be scored with the exact same metric code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..audio.clip import AudioClip
from ..audio.mel import MelFrontend, stft
from ..errors import DomainError, FileFormatError
from ..seeds import derive_seed
from ..text import _WORD_RE, UNK_ID, Vocab, tokenize
from .tempo import onset_envelope

MIN_SECONDS = 1.0
FEATURE_DIM = 143  # 64 mel means + 64 mel stds + centroid mean/std + onset rate + 12 chroma
DEFAULT_DIM = 32
_PROJECTION_SEED = 0x7A3D01
EMBEDDING_FILE_TAG = "melbind-embeddings v1"
EMBEDDER_FORMAT = "melbind-embedder-v1"

_frontend = MelFrontend()
_FFT_FREQS = np.fft.rfftfreq(_frontend.window, d=1.0 / _frontend.sample_rate)


def _chroma_matrix() -> np.ndarray:
    """[12, n_bins] indicator mapping FFT bins to pitch classes."""
    m = np.zeros((12, len(_FFT_FREQS)))
    for i, f in enumerate(_FFT_FREQS):
        if 27.5 <= f <= 5000.0:
            pc = int(round(12.0 * np.log2(f / 440.0) + 69.0)) % 12
            m[pc, i] = 1.0
    return m


_CHROMA = _chroma_matrix()


def audio_features(clip: AudioClip) -> np.ndarray:
    """Fixed 143-dim feature vector; scales chosen so groups carry similar weight."""
    if clip.duration < MIN_SECONDS:
        raise DomainError(f"embedding needs >= {MIN_SECONDS} s of audio, got {clip.duration:.2f} s")
    log_mel = _frontend.log_mel(clip).frames
    mel_mean = (log_mel.mean(axis=0) + 40.0) / 40.0
    mel_std = log_mel.std(axis=0) / 20.0

    magnitude = np.abs(stft(clip.samples))
    frame_energy = magnitude.sum(axis=1)
    safe = np.maximum(frame_energy, 1e-12)
    centroids = (magnitude @ _FFT_FREQS) / safe
    centroid_mean = centroids.mean() / 4000.0
    centroid_std = centroids.std() / 2000.0

    env, _ = onset_envelope(clip)
    peaks = 0
    if env.size >= 3 and env.max() > 0:
        thresh = 0.3 * env.max()
        interior = (env[1:-1] > env[:-2]) & (env[1:-1] >= env[2:]) & (env[1:-1] > thresh)
        peaks = int(np.count_nonzero(interior))
    onset_rate = peaks / clip.duration / 10.0

    chroma = _CHROMA @ magnitude.mean(axis=0)
    total = chroma.sum()
    chroma = 4.0 * chroma / total if total > 0 else chroma

    return np.concatenate(
        [mel_mean, mel_std, [centroid_mean, centroid_std, onset_rate], chroma]
    )


def _unit(v: np.ndarray, what: str = "embedding") -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        raise DomainError(f"{what} collapsed to a zero vector")
    return v / n


class ToyFeatureEmbedder:
    """Deterministic audio embedder: features through a fixed projection."""

    kind = "toy_audio_features"

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim
        rng = np.random.default_rng(_PROJECTION_SEED)
        self.projection = rng.normal(0.0, 1.0 / np.sqrt(FEATURE_DIM), size=(dim, FEATURE_DIM))

    def embed_audio(self, clip: AudioClip) -> np.ndarray:
        return _unit(self.projection @ audio_features(clip))


class ContrastiveEmbedder:
    """Joint audio/label space trained contrastively on labeled clips."""

    kind = "contrastive_trained"

    def __init__(self, wa: np.ndarray, wt: np.ndarray, vocab_tokens: list[str],
                 temperature: float = 0.07):
        self.wa = wa
        self.wt = wt
        self.vocab_tokens = list(vocab_tokens)
        self._index = {t: i for i, t in enumerate(vocab_tokens)}
        self.temperature = temperature
        self.dim = wa.shape[0]

    def _bag(self, prompt: str) -> np.ndarray:
        bag = np.zeros(len(self.vocab_tokens))
        for word in _WORD_RE.findall(prompt.lower()):
            idx = self._index.get(word)
            if idx is not None and idx != UNK_ID:
                bag[idx] += 1.0
        return bag

    def embed_audio(self, clip: AudioClip) -> np.ndarray:
        return _unit(self.wa @ audio_features(clip))

    def embed_text(self, prompt: str) -> np.ndarray:
        bag = self._bag(prompt)
        if bag.sum() == 0:
            raise DomainError(f"prompt {prompt!r} has no in-vocabulary words")
        return _unit(self.wt @ bag, f"text embedding of {prompt!r}")

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            path,
            format=np.array(EMBEDDER_FORMAT),
            wa=self.wa,
            wt=self.wt,
            vocab_json=np.array(json.dumps(self.vocab_tokens)),
            temperature=np.array(self.temperature),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ContrastiveEmbedder":
        with np.load(Path(path), allow_pickle=False) as data:
            if str(data["format"]) != EMBEDDER_FORMAT:
                raise FileFormatError(f"{path}: not a {EMBEDDER_FORMAT} file")
            return cls(
                data["wa"],
                data["wt"],
                json.loads(str(data["vocab_json"])),
                float(data["temperature"]),
            )


def train_contrastive(
    pairs: Sequence[tuple[AudioClip, str]],
    vocab: Vocab,
    dim: int = DEFAULT_DIM,
    steps: int = 400,
    lr: float = 0.5,
    temperature: float = 0.07,
    seed: int = 0,
) -> ContrastiveEmbedder:
    """Fit the audio and text projections with a symmetric InfoNCE loss."""
    if len(pairs) < 2:
        raise DomainError("contrastive training needs at least two labeled clips")
    feats = np.stack([audio_features(clip) for clip, _ in pairs])
    bags = np.zeros((len(pairs), vocab.size))
    for i, (_, label) in enumerate(pairs):
        for token_id in tokenize(label, vocab):
            if token_id != UNK_ID:
                bags[i, token_id] += 1.0
        if bags[i].sum() == 0:
            raise DomainError(f"label {label!r} has no in-vocabulary words")

    rng = np.random.default_rng(derive_seed(seed, "contrastive"))
    wa = rng.normal(0.0, 1.0 / np.sqrt(feats.shape[1]), size=(dim, feats.shape[1]))
    wt = rng.normal(0.0, 1.0 / np.sqrt(vocab.size), size=(dim, vocab.size))
    n = len(pairs)
    eye = np.eye(n)

    for _ in range(steps):
        ah = feats @ wa.T
        th = bags @ wt.T
        na = np.linalg.norm(ah, axis=1, keepdims=True)
        nt = np.linalg.norm(th, axis=1, keepdims=True)
        a = ah / np.maximum(na, 1e-12)
        t = th / np.maximum(nt, 1e-12)
        s = (a @ t.T) / temperature

        s_shift = s - s.max(axis=1, keepdims=True)
        p_row = np.exp(s_shift)
        p_row /= p_row.sum(axis=1, keepdims=True)
        s_shift_c = s - s.max(axis=0, keepdims=True)
        p_col = np.exp(s_shift_c)
        p_col /= p_col.sum(axis=0, keepdims=True)

        d_s = ((p_row - eye) + (p_col - eye)) / (2.0 * n)
        d_a = (d_s @ t) / temperature
        d_t = (d_s.T @ a) / temperature
        d_ah = (d_a - (d_a * a).sum(axis=1, keepdims=True) * a) / np.maximum(na, 1e-12)
        d_th = (d_t - (d_t * t).sum(axis=1, keepdims=True) * t) / np.maximum(nt, 1e-12)
        wa -= lr * (d_ah.T @ feats)
        wt -= lr * (d_th.T @ bags)

    return ContrastiveEmbedder(wa, wt, list(vocab.tokens), temperature)


# ---------------------------------------------------------------------------
# precomputed embedding files


def save_embedding_file(vectors: np.ndarray, path: str | Path, tag: str = "") -> None:
    """Write the documented text layout: a 4-line header, then one row of
    17-significant-digit decimal floats per vector."""
    m = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        EMBEDDING_FILE_TAG,
        f"dim {m.shape[1]}",
        f"count {m.shape[0]}",
        f"tag {tag}",
    ]
    for row in m:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


def load_embedding_file(path: str | Path):
    from .similarity import EmbeddingSet

    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    if len(lines) < 4 or lines[0].strip() != EMBEDDING_FILE_TAG:
        raise FileFormatError(f"{path}: missing '{EMBEDDING_FILE_TAG}' header")
    try:
        dim = int(lines[1].split()[1])
        count = int(lines[2].split()[1])
    except (IndexError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed dim/count header") from exc
    tag = lines[3].partition(" ")[2] if lines[3].startswith("tag") else ""
    rows = [ln for ln in lines[4:] if ln.strip()]
    if len(rows) != count:
        raise FileFormatError(f"{path}: header says {count} rows, found {len(rows)}")
    try:
        vectors = np.array([[float(v) for v in ln.split()] for ln in rows])
    except ValueError as exc:
        raise FileFormatError(f"{path}: non-numeric embedding row") from exc
    if vectors.shape != (count, dim):
        raise FileFormatError(f"{path}: rows are not uniformly {dim}-dimensional")
    return EmbeddingSet(vectors, tag=tag)


def embed_audio(embedder, clip: AudioClip) -> np.ndarray:
    """Uniform entry point over the embedder backends."""
    return embedder.embed_audio(clip)


def embed_set(embedder, clips: Sequence[AudioClip], tag: str = ""):
    from .similarity import EmbeddingSet

    return EmbeddingSet(np.stack([embedder.embed_audio(c) for c in clips]), tag=tag)
