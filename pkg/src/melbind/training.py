"""Pretraining and few-shot personalization trainers.

Two personalization routes share one sampling protocol and differ only in
which parameters receive gradients: textual inversion trains the new
embedding row alone, while the DreamBooth-style route fine-tunes the
denoiser (optionally the text encoder) under a rare-token prompt and never
touches the embedding table.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .audio.clip import AudioClip
from .audio.fixtures import noise_texture
from .audio.mixing import mix_with_snr
from .diffusion import GradientSet, LossBatchItem, TrainableSelection, ldm_loss_and_grads
from .errors import ConfigError, DomainError, NumericsError
from .model import ModelState
from .seeds import derive_seed
from .text import _WORD_RE, UNK_ID, Vocab, add_placeholder, tokenize

logger = logging.getLogger(__name__)

MIX_SNR_DB = 20.0
PROMPT_TEMPLATES = ("a recording of a {subject}", "a {subject}")


@dataclass
class Concept:
    """A few-shot musical concept: clips, a class noun, and its placeholder."""

    name: str
    class_noun: str
    clips: list[AudioClip]
    placeholder: str = ""

    def __post_init__(self):
        if not self.placeholder:
            self.placeholder = f"<{self.name.lower().replace(' ', '-')}>"
        if not 1 <= len(self.clips) <= 5:
            raise DomainError(f"concept {self.name!r} needs 1..5 clips, has {len(self.clips)}")
        for clip in self.clips:
            if clip.duration < 1.0:
                raise DomainError(f"concept {self.name!r} has a clip shorter than 1 s")


@dataclass
class PersonalizationConfig:
    method: str  # "TI" or "DB"
    n_clips: int = 5
    mix: bool = False
    init: str = "BL"  # TI only: BL or MW
    train_text_encoder: bool = False  # DB only
    lr: float = 0.0
    steps: int = 0
    batch: int = 4
    seed: int = 0
    mix_prob: float = 0.5
    momentum: float = 0.0
    prior_weight: float = 0.0  # DB prior preservation, off by default
    prior_samples: int = 4
    identifier: str = ""  # DB rare token; first reserved one when empty

    def validate(self) -> "PersonalizationConfig":
        if self.method not in ("TI", "DB"):
            raise ConfigError(f"method must be TI or DB, got {self.method!r}")
        if self.n_clips not in (1, 3, 5):
            raise ConfigError(f"n_clips must be 1, 3, or 5, got {self.n_clips}")
        if self.method == "TI" and self.init not in ("BL", "MW"):
            raise ConfigError(f"TI init must be BL or MW, got {self.init!r}")
        if self.method == "TI" and self.train_text_encoder:
            raise ConfigError("train_text_encoder applies to DB only")
        if self.method == "DB" and self.prior_weight < 0:
            raise ConfigError("prior_weight must be >= 0")
        return self


def ti_config(**overrides) -> PersonalizationConfig:
    """Textual-inversion defaults: lr 2e-2, 150 steps, batch 4."""
    cfg = PersonalizationConfig(method="TI", lr=2e-2, steps=150, batch=4)
    return replace(cfg, **overrides).validate()


def db_config(**overrides) -> PersonalizationConfig:
    """DreamBooth defaults: lr 4e-6, 1500 steps, batch 4."""
    cfg = PersonalizationConfig(method="DB", lr=4e-6, steps=1500, batch=4)
    return replace(cfg, **overrides).validate()


@dataclass
class PretrainConfig:
    steps: int = 8000
    lr: float = 2e-3
    batch: int = 16
    seed: int = 0
    eval_size: int = 64
    eval_every: int = 100
    extra_vocab_words: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# mixing and batch sampling


@dataclass
class SampleTrace:
    """Diagnostic record of one drawn training segment."""

    clip_index: int
    segment_index: int
    mixed: bool
    measured_snr_db: Optional[float] = None


def default_noise_pool(seed: int = 0, duration: float = 2.0) -> list[AudioClip]:
    """Synthetic textures standing in for environmental recordings."""
    return [
        noise_texture(color, duration, derive_seed(seed, "noise-pool", color, k))
        for color in ("white", "pink", "brown")
        for k in range(2)
    ]


def apply_mix(
    segment: AudioClip,
    noise_pool: Sequence[AudioClip],
    rng: np.random.Generator,
    prob: float = 0.5,
    snr_db: float = MIX_SNR_DB,
    trace: Optional[list] = None,
) -> AudioClip:
    """With probability `prob`, mix a random pool clip in at `snr_db`."""
    if not noise_pool:
        raise DomainError("noise pool is empty")
    if rng.uniform() >= prob:
        if trace is not None:
            trace.append(SampleTrace(-1, -1, mixed=False))
        return segment
    noise = noise_pool[int(rng.integers(len(noise_pool)))]
    mixed, scaled_noise = mix_with_snr(segment, noise, snr_db, return_noise=True)
    if trace is not None:
        signal_part = mixed.samples - scaled_noise.samples
        measured = 10.0 * np.log10(
            np.mean(signal_part**2) / np.mean(scaled_noise.samples**2)
        )
        trace.append(SampleTrace(-1, -1, mixed=True, measured_snr_db=float(measured)))
    return mixed


class SegmentSampler:
    """Draws (latent, prompt, t, eps) training tuples from a concept's clips.

    Only the first `n_clips` clips are ever touched; the trace records which
    clip and segment each draw used, plus the measured SNR of any mix.
    """

    def __init__(
        self,
        model: ModelState,
        clips: Sequence[AudioClip],
        prompt_ids: Sequence[list[int]],
        rng: np.random.Generator,
        mix: bool = False,
        mix_prob: float = 0.5,
        noise_pool: Optional[Sequence[AudioClip]] = None,
        trace: Optional[list] = None,
    ):
        self.model = model
        self.codec = model.codec
        self.prompt_ids = list(prompt_ids)
        self.rng = rng
        self.mix = mix
        self.mix_prob = mix_prob
        self.noise_pool = list(noise_pool) if noise_pool else None
        self.trace = trace
        self.segments = []  # (clip_index, segment_index, raw samples)
        self.clean_latents = {}
        for ci, clip in enumerate(clips):
            for si, seg in enumerate(self.codec.split_segments(clip)):
                self.segments.append((ci, si, seg))
        if not self.segments:
            raise DomainError("no usable one-second segments")

    def draw(self) -> LossBatchItem:
        ci, si, seg = self.segments[int(self.rng.integers(len(self.segments)))]
        entry = SampleTrace(ci, si, mixed=False)
        if self.mix and self.noise_pool:
            local: list[SampleTrace] = []
            clip = apply_mix(
                AudioClip(seg, self.codec.frontend.sample_rate),
                self.noise_pool,
                self.rng,
                self.mix_prob,
                trace=local,
            )
            entry = SampleTrace(ci, si, local[0].mixed, local[0].measured_snr_db)
            if entry.mixed:
                z0 = self.codec.encode_segment(clip.samples).values
            else:
                z0 = self._clean_latent(ci, si, seg)
        else:
            z0 = self._clean_latent(ci, si, seg)
        if self.trace is not None:
            self.trace.append(entry)
        ids = self.prompt_ids[int(self.rng.integers(len(self.prompt_ids)))]
        t = int(self.rng.integers(1, self.model.sched.n + 1))
        eps = self.rng.standard_normal(len(z0))
        return LossBatchItem(z0=z0, ids=ids, t=t, eps=eps)

    def _clean_latent(self, ci: int, si: int, seg: np.ndarray) -> np.ndarray:
        if (ci, si) not in self.clean_latents:
            self.clean_latents[(ci, si)] = self.codec.encode_segment(seg).values
        return self.clean_latents[(ci, si)]

    def draw_batch(self, size: int) -> list[LossBatchItem]:
        return [self.draw() for _ in range(size)]


# ---------------------------------------------------------------------------
# optimizer


class Sgd:
    """Plain SGD over a GradientSet; optional momentum, off by default."""

    def __init__(self, lr: float, momentum: float = 0.0):
        self.lr = lr
        self.momentum = momentum
        self._velocity: dict[str, np.ndarray] = {}

    def _step_tensor(self, key: str, param: np.ndarray, grad: np.ndarray) -> None:
        if self.momentum > 0.0:
            v = self._velocity.setdefault(key, np.zeros_like(param))
            v *= self.momentum
            v += grad
            grad = v
        param -= self.lr * grad

    def apply(self, model: ModelState, grads: GradientSet) -> None:
        if grads.denoiser is not None:
            for k, g in grads.denoiser.items():
                self._step_tensor(f"den_{k}", getattr(model.denoiser, k), g)
        if grads.text is not None:
            for k, g in grads.text.items():
                self._step_tensor(f"text_{k}", getattr(model.text, k), g)
        for row, g in grads.rows.items():
            self._step_tensor(f"row_{row}", model.table.vectors[row], g)


# ---------------------------------------------------------------------------
# pretraining


@dataclass
class PretrainResult:
    model: ModelState
    train_losses: list[float]
    eval_steps: list[int]
    eval_losses: list[float]

    @property
    def initial_eval_loss(self) -> float:
        return self.eval_losses[0]

    @property
    def final_eval_loss(self) -> float:
        return self.eval_losses[-1]


def build_vocab(labels: Sequence[str], extra_words: Sequence[str] = ()) -> Vocab:
    words: list[str] = []
    for label in list(labels) + list(extra_words):
        words.extend(_WORD_RE.findall(label.lower()))
    return Vocab(words)


def _eval_loss(model: ModelState, items: list[LossBatchItem]) -> float:
    loss, _ = ldm_loss_and_grads(
        items, model.denoiser, model.text, model.table, model.sched, TrainableSelection()
    )
    return loss


def pretrain(
    corpus: Sequence[tuple[AudioClip, str]],
    config: PretrainConfig,
    vocab: Optional[Vocab] = None,
) -> PretrainResult:
    """Train the denoiser and text encoder jointly on labeled clips.

    Fits codec norm stats on the corpus first, then runs SGD on the
    denoising loss. A fixed held-out tuple set gives a deterministic eval
    curve; divergence raises with the offending step index.
    """
    if len(corpus) == 0:
        raise DomainError("empty corpus")
    if vocab is None:
        vocab = build_vocab([label for _, label in corpus], config.extra_vocab_words)
    model = ModelState.init(vocab, seed=config.seed)
    model.codec.fit_norm_stats([clip for clip, _ in corpus])

    pool: list[tuple[np.ndarray, list[int]]] = []
    for clip, label in corpus:
        ids = tokenize(label, vocab)
        if not ids or all(i == UNK_ID for i in ids):
            raise DomainError(f"label {label!r} does not tokenize")
        for seg in model.codec.split_segments(clip):
            pool.append((model.codec.encode_segment(seg).values, ids))

    n = model.sched.n
    dim = pool[0][0].shape[0]

    eval_rng = np.random.default_rng(derive_seed(config.seed, "pretrain-eval"))
    eval_items = []
    for _ in range(config.eval_size):
        z0, ids = pool[int(eval_rng.integers(len(pool)))]
        eval_items.append(
            LossBatchItem(z0, ids, int(eval_rng.integers(1, n + 1)), eval_rng.standard_normal(dim))
        )

    select = TrainableSelection(denoiser=True, text=True)
    opt = Sgd(config.lr)
    rng = np.random.default_rng(derive_seed(config.seed, "pretrain"))
    train_losses: list[float] = []
    eval_steps = [0]
    eval_losses = [_eval_loss(model, eval_items)]

    for step in range(config.steps):
        batch = []
        for _ in range(config.batch):
            z0, ids = pool[int(rng.integers(len(pool)))]
            batch.append(
                LossBatchItem(z0, ids, int(rng.integers(1, n + 1)), rng.standard_normal(dim))
            )
        try:
            loss, grads = ldm_loss_and_grads(
                batch, model.denoiser, model.text, model.table, model.sched, select
            )
        except NumericsError as exc:
            raise NumericsError(f"pretraining diverged at step {step}: {exc}") from exc
        opt.apply(model, grads)
        train_losses.append(loss)
        if (step + 1) % config.eval_every == 0:
            eval_steps.append(step + 1)
            eval_losses.append(_eval_loss(model, eval_items))

    if eval_steps[-1] != config.steps:
        eval_steps.append(config.steps)
        eval_losses.append(_eval_loss(model, eval_items))
    logger.info(
        "pretrain: %d steps, eval loss %.2f -> %.2f",
        config.steps,
        eval_losses[0],
        eval_losses[-1],
    )
    return PretrainResult(model, train_losses, eval_steps, eval_losses)


# ---------------------------------------------------------------------------
# personalization


def register_concept(model: ModelState, concept: Concept, cfg: PersonalizationConfig) -> int:
    """Add the concept's placeholder row (TI route) with the configured init."""
    return add_placeholder(
        model.table, model.vocab, concept.placeholder, cfg.init, concept.class_noun
    )


def db_subject(model: ModelState, concept: Concept, cfg: PersonalizationConfig) -> str:
    """'[identifier] [class noun]' with a reserved rare vocabulary token."""
    identifier = cfg.identifier or model.vocab.rare_tokens[0]
    if identifier not in model.vocab.rare_tokens:
        raise ConfigError(f"identifier {identifier!r} is not a reserved rare token")
    return f"{identifier} {concept.class_noun}"


def _prompt_id_sets(model: ModelState, subject: str) -> list[list[int]]:
    id_sets = []
    for template in PROMPT_TEMPLATES:
        ids = tokenize(template.format(subject=subject), model.vocab)
        if ids:
            id_sets.append(ids)
    return id_sets


def _run_training(
    model: ModelState,
    concept: Concept,
    cfg: PersonalizationConfig,
    subject: str,
    select: TrainableSelection,
    noise_pool: Optional[Sequence[AudioClip]],
    trace: Optional[list],
    prior_pool: Optional[list[tuple[np.ndarray, list[int]]]] = None,
) -> ModelState:
    rng = np.random.default_rng(derive_seed(cfg.seed, "personalize", cfg.method, concept.name))
    if cfg.mix and noise_pool is None:
        noise_pool = default_noise_pool(derive_seed(cfg.seed, "mix-pool"))
    sampler = SegmentSampler(
        model,
        concept.clips[: cfg.n_clips],
        _prompt_id_sets(model, subject),
        rng,
        mix=cfg.mix,
        mix_prob=cfg.mix_prob,
        noise_pool=noise_pool,
        trace=trace,
    )
    opt = Sgd(cfg.lr, cfg.momentum)
    dim = model.denoiser.latent_dim
    for step in range(cfg.steps):
        batch = sampler.draw_batch(cfg.batch)
        try:
            _, grads = ldm_loss_and_grads(
                batch, model.denoiser, model.text, model.table, model.sched, select
            )
            if prior_pool and cfg.prior_weight > 0:
                prior_batch = []
                for _ in range(cfg.batch):
                    z0, ids = prior_pool[int(rng.integers(len(prior_pool)))]
                    prior_batch.append(
                        LossBatchItem(
                            z0, ids, int(rng.integers(1, model.sched.n + 1)),
                            rng.standard_normal(dim),
                        )
                    )
                _, prior_grads = ldm_loss_and_grads(
                    prior_batch, model.denoiser, model.text, model.table, model.sched, select
                )
                _add_scaled(grads, prior_grads, cfg.prior_weight)
        except NumericsError as exc:
            raise NumericsError(
                f"{cfg.method} training diverged at step {step} for {concept.name!r}: {exc}"
            ) from exc
        opt.apply(model, grads)
    return model


def _add_scaled(into: GradientSet, other: GradientSet, weight: float) -> None:
    if into.denoiser is not None and other.denoiser is not None:
        for k in into.denoiser:
            into.denoiser[k] += weight * other.denoiser[k]
    if into.text is not None and other.text is not None:
        for k in into.text:
            into.text[k] += weight * other.text[k]
    for row in into.rows:
        if row in other.rows:
            into.rows[row] += weight * other.rows[row]


def train_ti(
    model: ModelState,
    concept: Concept,
    cfg: PersonalizationConfig,
    noise_pool: Optional[Sequence[AudioClip]] = None,
    trace: Optional[list] = None,
) -> ModelState:
    """Textual inversion: only the placeholder's embedding row is optimized.

    The placeholder must already be registered (see register_concept). The
    input model is left untouched; a trained copy is returned.
    """
    cfg.validate()
    if cfg.method != "TI":
        raise ConfigError(f"train_ti got a {cfg.method} config")
    key = concept.placeholder.lower()
    if key not in model.vocab.placeholder_ids:
        raise DomainError(
            f"placeholder {concept.placeholder!r} is not registered; call register_concept first"
        )
    work = model.copy()
    row = work.vocab.placeholder_ids[key]
    select = TrainableSelection(rows=(row,))
    return _run_training(work, concept, cfg, concept.placeholder, select, noise_pool, trace)


def train_db(
    model: ModelState,
    concept: Concept,
    cfg: PersonalizationConfig,
    noise_pool: Optional[Sequence[AudioClip]] = None,
    trace: Optional[list] = None,
) -> ModelState:
    """DreamBooth route: fine-tune the denoiser (and optionally the text
    encoder) under '[identifier] [class noun]'. No embedding row is added or
    modified."""
    cfg.validate()
    if cfg.method != "DB":
        raise ConfigError(f"train_db got a {cfg.method} config")
    work = model.copy()
    subject = db_subject(work, concept, cfg)
    noun_ids = [i for i in tokenize(concept.class_noun, work.vocab) if i != UNK_ID]
    if not noun_ids:
        raise DomainError(f"class noun {concept.class_noun!r} has no known tokens")
    select = TrainableSelection(denoiser=True, text=cfg.train_text_encoder)

    prior_pool = None
    if cfg.prior_weight > 0:
        prior_pool = []
        prior_prompt = f"a recording of a {concept.class_noun}"
        prior_ids = tokenize(prior_prompt, work.vocab)
        for k in range(cfg.prior_samples):
            clip = model.sample(
                prior_prompt, n_segments=1, seed=derive_seed(cfg.seed, "prior", k)
            )
            for seg in work.codec.split_segments(clip):
                prior_pool.append((work.codec.encode_segment(seg).values, prior_ids))

    return _run_training(work, concept, cfg, subject, select, noise_pool, trace, prior_pool)


def personalize(
    model: ModelState,
    concept: Concept,
    cfg: PersonalizationConfig,
    noise_pool: Optional[Sequence[AudioClip]] = None,
    trace: Optional[list] = None,
) -> tuple[ModelState, str]:
    """Run the configured personalization route on a fresh copy.

    Returns the trained model and the prompt subject bound to the concept
    (the placeholder string for TI, '[identifier] [class noun]' for DB).
    """
    cfg.validate()
    if cfg.method == "TI":
        work = model.copy()
        register_concept(work, concept, cfg)
        return train_ti(work, concept, cfg, noise_pool, trace), concept.placeholder
    return train_db(model, concept, cfg, noise_pool, trace), db_subject(model, concept, cfg)


def changed_tensors(before: ModelState, after: ModelState) -> set[str]:
    """Names of tensors (embedding rows individually) that are not bit-identical."""
    fp_before = before.fingerprint()
    fp_after = after.fingerprint()
    keys = set(fp_before) | set(fp_after)
    return {k for k in keys if fp_before.get(k) != fp_after.get(k)}
