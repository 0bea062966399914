"""Model state, generation, style transfer, and checkpoint I/O.

A model bundles the analytic codec (with its corpus statistics), the
vocabulary and embedding table, the text encoder, the denoiser, and the
noise schedule. Checkpoints carry all of it in one npz with a format tag.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .audio.clip import AudioClip
from .audio.codec import LATENT_DIM, Latent, MelCodec, NormStats
from .audio.mel import MelFrontend
from .diffusion import (
    DenoiserParams,
    NoiseSchedule,
    ancestral_sample,
    denoise_predict,
    forward_noise,
    make_schedule,
)
from .errors import AudioFormatError, DomainError
from .seeds import derive_seed
from .text import (
    UNK_ID,
    EmbeddingTable,
    TextEncoderParams,
    Vocab,
    encode_text,
    tokenize,
)

CHECKPOINT_FORMAT = "melbind-ckpt-v1"


@dataclass
class ModelState:
    """All trainable and fixed state of one text-to-audio model."""

    codec: MelCodec
    vocab: Vocab
    table: EmbeddingTable
    text: TextEncoderParams
    denoiser: DenoiserParams
    sched: NoiseSchedule

    @classmethod
    def init(cls, vocab: Vocab, seed: int = 0, n_steps: int | None = None) -> "ModelState":
        sched = make_schedule() if n_steps is None else make_schedule(n_steps)
        return cls(
            codec=MelCodec(),
            vocab=vocab,
            table=EmbeddingTable.init(vocab.size, seed=derive_seed(seed, "embeddings")),
            text=TextEncoderParams.init(seed=derive_seed(seed, "text")),
            denoiser=DenoiserParams.init(seed=derive_seed(seed, "denoiser")),
            sched=sched,
        )

    def copy(self) -> "ModelState":
        codec = MelCodec(
            frontend=self.codec.frontend,
            norm_stats=NormStats(self.codec.norm_stats.mean.copy(), self.codec.norm_stats.std.copy()),
            gl_iters=self.codec.gl_iters,
        )
        return ModelState(
            codec=codec,
            vocab=self.vocab.copy(),
            table=self.table.copy(),
            text=self.text.copy(),
            denoiser=self.denoiser.copy(),
            sched=NoiseSchedule(self.sched.beta.copy(), self.sched.alpha_bar.copy()),
        )

    # ---- prompts ----------------------------------------------------------

    def prompt_ids(self, prompt: str) -> list[int]:
        ids = tokenize(prompt, self.vocab)
        if not ids:
            raise DomainError(f"prompt {prompt!r} tokenizes to nothing")
        return ids

    def encode_prompt(self, prompt: str) -> np.ndarray:
        return encode_text(self.text, self.table, self.prompt_ids(prompt))

    # ---- generation -------------------------------------------------------

    def _denoise_fn(self, cond: np.ndarray, guidance_scale: Optional[float]):
        if guidance_scale is None:
            return lambda z, n: denoise_predict(self.denoiser, z, n, cond, self.sched.n)
        uncond = encode_text(self.text, self.table, [UNK_ID])

        def guided(z, n):
            base = denoise_predict(self.denoiser, z, n, uncond, self.sched.n)
            full = denoise_predict(self.denoiser, z, n, cond, self.sched.n)
            return base + guidance_scale * (full - base)

        return guided

    def sample(
        self,
        prompt: str,
        n_segments: int = 4,
        seed: int = 0,
        deterministic: bool = False,
        guidance_scale: Optional[float] = None,
    ) -> AudioClip:
        """Generate audio; one independent latent chain per one-second segment."""
        if n_segments < 1:
            raise DomainError("n_segments must be >= 1")
        denoise_fn = self._denoise_fn(self.encode_prompt(prompt), guidance_scale)
        latents = []
        for i in range(n_segments):
            rng = np.random.default_rng(derive_seed(seed, "segment", i))
            z0 = ancestral_sample(denoise_fn, self.sched, LATENT_DIM, rng, deterministic)
            latents.append(Latent(z0, self.codec.norm_stats))
        return self.codec.decode(latents)

    def style_transfer(
        self,
        clip: AudioClip,
        strength: float,
        prompt: str,
        seed: int = 0,
    ) -> AudioClip:
        """Re-noise the input to step round(strength * N) and denoise back under
        the prompt. strength 0 is the plain codec roundtrip; strength 1 replaces
        the latent with a pure Gaussian draw, so the output ignores the input."""
        if not 0.0 <= strength <= 1.0:
            raise DomainError(f"strength {strength} outside [0, 1]")
        in_latents = self.codec.encode(clip)
        t = int(round(strength * self.sched.n))
        if t == 0:
            return self.codec.decode(in_latents)
        denoise_fn = self._denoise_fn(self.encode_prompt(prompt), None)
        out = []
        for i, latent in enumerate(in_latents):
            rng = np.random.default_rng(derive_seed(seed, "transfer", i))
            eps = rng.standard_normal(LATENT_DIM)
            if t == self.sched.n:
                z_start = eps
            else:
                z_start = forward_noise(latent.values, t, eps, self.sched)
            z0 = ancestral_sample(
                denoise_fn, self.sched, LATENT_DIM, rng, init=z_start, start_step=t
            )
            out.append(Latent(z0, self.codec.norm_stats))
        return self.codec.decode(out)

    # ---- identity ---------------------------------------------------------

    def tensor_map(self) -> dict[str, np.ndarray]:
        tensors = {
            "table": self.table.vectors,
            "sched_beta": self.sched.beta,
            "norm_mean": self.codec.norm_stats.mean,
            "norm_std": self.codec.norm_stats.std,
        }
        tensors.update({f"text_{k}": v for k, v in self.text.tensors().items()})
        tensors.update({f"den_{k}": v for k, v in self.denoiser.tensors().items()})
        return tensors

    def fingerprint(self) -> dict[str, str]:
        """sha256 per tensor, plus one per embedding row for subset checks."""
        prints = {
            name: hashlib.sha256(np.ascontiguousarray(t).tobytes()).hexdigest()
            for name, t in self.tensor_map().items()
        }
        for i in range(self.table.vectors.shape[0]):
            prints[f"table_row_{i}"] = hashlib.sha256(
                np.ascontiguousarray(self.table.vectors[i]).tobytes()
            ).hexdigest()
        return prints

    def param_counts(self) -> dict[str, int]:
        return {
            "denoiser": self.denoiser.param_count(),
            "text_encoder": self.text.param_count(),
            "embedding_table": self.table.vectors.size,
        }


def save_model(model: ModelState, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vocab_meta = {
        "tokens": model.vocab.tokens,
        "rare_tokens": model.vocab.rare_tokens,
        "base_size": model.vocab.base_size,
        "placeholder_ids": model.vocab.placeholder_ids,
    }
    codec_meta = {
        "gl_iters": model.codec.gl_iters,
        "sample_rate": model.codec.frontend.sample_rate,
        "window": model.codec.frontend.window,
        "hop": model.codec.frontend.hop,
        "n_mels": model.codec.frontend.n_mels,
    }
    np.savez_compressed(
        path,
        format=np.array(CHECKPOINT_FORMAT),
        vocab_json=np.array(json.dumps(vocab_meta)),
        codec_json=np.array(json.dumps(codec_meta)),
        table_vectors=model.table.vectors,
        table_mask=model.table.trainable_mask,
        text_w1=model.text.w1,
        text_b1=model.text.b1,
        text_w2=model.text.w2,
        text_b2=model.text.b2,
        den_a1=model.denoiser.a1,
        den_c1=model.denoiser.c1,
        den_a2=model.denoiser.a2,
        den_c2=model.denoiser.c2,
        den_a3=model.denoiser.a3,
        sched_beta=model.sched.beta,
        sched_alpha_bar=model.sched.alpha_bar,
        norm_mean=model.codec.norm_stats.mean,
        norm_std=model.codec.norm_stats.std,
    )


def load_model(path: str | Path) -> ModelState:
    path = Path(path)
    with np.load(path, allow_pickle=False) as data:
        tag = str(data["format"])
        if tag != CHECKPOINT_FORMAT:
            raise AudioFormatError(f"{path}: unsupported checkpoint format {tag!r}")
        vocab_meta = json.loads(str(data["vocab_json"]))
        codec_meta = json.loads(str(data["codec_json"]))

        vocab = Vocab.__new__(Vocab)
        vocab.tokens = list(vocab_meta["tokens"])
        vocab.rare_tokens = list(vocab_meta["rare_tokens"])
        vocab.base_size = int(vocab_meta["base_size"])
        vocab.placeholder_ids = {k: int(v) for k, v in vocab_meta["placeholder_ids"].items()}
        vocab._index = {t: i for i, t in enumerate(vocab.tokens)}

        frontend = MelFrontend(
            sample_rate=int(codec_meta["sample_rate"]),
            window=int(codec_meta["window"]),
            hop=int(codec_meta["hop"]),
            n_mels=int(codec_meta["n_mels"]),
        )
        codec = MelCodec(
            frontend=frontend,
            norm_stats=NormStats(data["norm_mean"], data["norm_std"]),
            gl_iters=int(codec_meta["gl_iters"]),
        )
        return ModelState(
            codec=codec,
            vocab=vocab,
            table=EmbeddingTable(data["table_vectors"], data["table_mask"]),
            text=TextEncoderParams(
                data["text_w1"], data["text_b1"], data["text_w2"], data["text_b2"]
            ),
            denoiser=DenoiserParams(
                data["den_a1"], data["den_c1"], data["den_a2"], data["den_c2"], data["den_a3"]
            ),
            sched=NoiseSchedule(data["sched_beta"], data["sched_alpha_bar"]),
        )
