"""Experiment orchestration: personalize, generate, score, aggregate.

Every cell of the concept x config grid personalizes a private model copy,
generates four clips per prompt (the reconstruction prompt plus each
editability prompt), and scores the similarity and music metrics. All child
seeds derive from one root seed via the documented splitting rule, so a
whole run is reproducible bit for bit.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .. import __version__
from ..audio.clip import AudioClip
from ..errors import MelbindError
from ..metrics.embedder import ContrastiveEmbedder, ToyFeatureEmbedder, embed_set, train_contrastive
from ..metrics.key import detect_key, key_scale_match
from ..metrics.loudness import integrated_loudness, loudness_match
from ..metrics.similarity import EmbeddingSet, clap_a, clap_t, fad, self_similarity
from ..metrics.tempo import bpm_match, estimate_bpm
from ..model import ModelState
from ..seeds import derive_seed
from ..training import (
    PROMPT_TEMPLATES,
    PersonalizationConfig,
    PretrainConfig,
    PretrainResult,
    db_config,
    personalize,
    pretrain,
    ti_config,
)
from .manifest import SUBJECT_SLOT, DatasetManifest, ManifestConcept, fill_subject

logger = logging.getLogger(__name__)

RECONSTRUCTION_TEMPLATE = "a recording of a {subject}"
REPORT_FORMAT_VERSION = "melbind-report-v1"
CLIPS_PER_PROMPT = 4
SEGMENTS_PER_CLIP = 4
# Editability generations only feed CLAP-T, whose embedder needs one second;
# two-second clips halve the dominant decode cost of a full run.
EDIT_SEGMENTS_PER_CLIP = 2

HARMONIC_CATEGORIES = ("melodic", "multi-instrument")


def pretrain_from_manifest(
    manifest: DatasetManifest, config: Optional[PretrainConfig] = None
) -> PretrainResult:
    """Pretrain on a manifest's labeled clips; the vocabulary is closed over
    the manifest labels, class nouns, editability prompts, and the neutral
    prompt templates."""
    import re

    config = config or PretrainConfig()
    words = manifest.vocabulary_words()
    for template in PROMPT_TEMPLATES:
        words.extend(re.findall(r"[a-z0-9']+", template.replace(SUBJECT_SLOT, " ").lower()))
    extra = tuple(words) + tuple(config.extra_vocab_words)
    config = replace(config, extra_vocab_words=extra)
    return pretrain(manifest.labeled_clips(), config)


def default_config_table() -> dict[str, PersonalizationConfig]:
    """The ten shipped training configurations (method x setup grid)."""
    return {
        "TI-BL": ti_config(init="BL"),
        "TI-MW": ti_config(init="MW"),
        "TI-1AC": ti_config(init="MW", n_clips=1),
        "TI-3AC": ti_config(init="MW", n_clips=3),
        "TI-MIX": ti_config(init="MW", mix=True),
        "DB-BL": db_config(),
        "DB-1AC": db_config(n_clips=1),
        "DB-3AC": db_config(n_clips=3),
        "DB-TE": db_config(train_text_encoder=True),
        "DB-MIX": db_config(mix=True),
    }


@dataclass
class EmbedderBundle:
    """audio: embedder for CLAP-A / FAD; joint: adds the text side for CLAP-T."""

    audio: ToyFeatureEmbedder
    joint: ContrastiveEmbedder

    @classmethod
    def build(
        cls,
        corpus_pairs,
        vocab,
        model: Optional[ModelState] = None,
        prompts: Optional[Sequence[str]] = None,
        seed: int = 0,
        gens_per_prompt: int = 2,
        segments: int = 2,
    ) -> "EmbedderBundle":
        """Train the joint space on the labeled corpus. When a model and
        prompt templates are given, subject-stripped prompt texts are paired
        with base-model generations so the text side covers prompt wording
        (the desk-scale stand-in for a broadly trained audio-text space)."""
        pairs = list(corpus_pairs)
        if model is not None and prompts:
            for pi, template in enumerate(prompts):
                stripped = fill_subject(template, "")
                for k in range(gens_per_prompt):
                    clip = model.sample(
                        stripped,
                        n_segments=segments,
                        seed=derive_seed(seed, "embedder-prompt", pi, k),
                    )
                    pairs.append((clip, stripped))
        return cls(
            audio=ToyFeatureEmbedder(),
            joint=train_contrastive(pairs, vocab, seed=seed),
        )


@dataclass
class CellResult:
    concept: str
    config: str
    clap_a: Optional[float] = None
    fad: Optional[float] = None
    clap_t: Optional[float] = None
    bpm_match_rate: Optional[float] = None
    loudness_match_rate: Optional[float] = None
    key_match_rate: Optional[float] = None
    scale_match_rate: Optional[float] = None
    clips_generated: int = 0
    error: Optional[str] = None


@dataclass
class ReferenceLines:
    ceil_a: Optional[float]
    ceil_t: Optional[float]
    floor_t: Optional[float]


@dataclass
class ExperimentReport:
    cells: list[CellResult]
    reference: ReferenceLines
    meta: dict

    def pareto_series(self) -> list[dict]:
        """Per-config mean (clap_a, clap_t) plus match-rate bar data."""
        by_config: dict[str, list[CellResult]] = {}
        for cell in self.cells:
            by_config.setdefault(cell.config, []).append(cell)
        series = []
        for config, cells in by_config.items():
            entry = {"config": config}
            for metric in (
                "clap_a",
                "clap_t",
                "fad",
                "bpm_match_rate",
                "loudness_match_rate",
                "key_match_rate",
                "scale_match_rate",
            ):
                values = [getattr(c, metric) for c in cells if getattr(c, metric) is not None]
                entry[metric] = statistics.fmean(values) if values else None
            series.append(entry)
        return series


@dataclass
class ConceptReference:
    """Per-concept ground truth computed from the training clips."""

    bpm: Optional[float]
    loudness: Optional[float]
    key: Optional[int]
    scale: Optional[str]


def _concept_reference(mc: ManifestConcept) -> ConceptReference:
    bpms = []
    for clip in mc.concept.clips:
        if clip.duration >= 4.0:
            est = estimate_bpm(clip)
            if est.found:
                bpms.append(est.bpm)
    loud = [
        v
        for v in (integrated_loudness(c) for c in mc.concept.clips)
        if np.isfinite(v)
    ]
    key = scale = None
    if mc.category in HARMONIC_CATEGORIES:
        votes = [detect_key(c) for c in mc.concept.clips if c.duration >= 2.0]
        keys = [e.key for e in votes if e.found]
        scales = [e.scale for e in votes if e.found]
        if keys:
            key = statistics.mode(keys)
        if scales:
            scale = statistics.mode(scales)
    return ConceptReference(
        bpm=statistics.median(bpms) if bpms else None,
        loudness=statistics.fmean(loud) if loud else None,
        key=key,
        scale=scale,
    )


def _generate(
    model: ModelState, prompt: str, count: int, segments: int, seed: int
) -> list[AudioClip]:
    return [
        model.sample(prompt, n_segments=segments, seed=derive_seed(seed, "clip", k))
        for k in range(count)
    ]


def _personalize(
    model: ModelState, mc: ManifestConcept, config: PersonalizationConfig, seed: int
) -> tuple[ModelState, str]:
    return personalize(model, mc.concept, replace(config, seed=seed))


def _music_rates(
    gens: Sequence[AudioClip], ref: ConceptReference
) -> tuple[Optional[float], Optional[float], Optional[float], Optional[float]]:
    bpm_rate = loud_rate = key_rate = scale_rate = None
    if ref.bpm is not None:
        hits = [bpm_match(estimate_bpm(g).bpm, ref.bpm) for g in gens if g.duration >= 4.0]
        bpm_rate = float(np.mean(hits)) if hits else None
    if ref.loudness is not None:
        hits = [loudness_match(integrated_loudness(g), ref.loudness) for g in gens]
        loud_rate = float(np.mean(hits))
    if ref.key is not None or ref.scale is not None:
        key_hits, scale_hits = [], []
        for g in gens:
            est = detect_key(g)
            k_ok, s_ok = key_scale_match(est, (ref.key, ref.scale))
            key_hits.append(k_ok)
            scale_hits.append(s_ok)
        if ref.key is not None:
            key_rate = float(np.mean(key_hits))
        if ref.scale is not None:
            scale_rate = float(np.mean(scale_hits))
    return bpm_rate, loud_rate, key_rate, scale_rate


def run_cell(
    model: ModelState,
    mc: ManifestConcept,
    config_name: str,
    config: PersonalizationConfig,
    prompts: Sequence[str],
    embedders: EmbedderBundle,
    root_seed: int,
    clips_per_prompt: int = CLIPS_PER_PROMPT,
    segments: int = SEGMENTS_PER_CLIP,
    edit_segments: int = EDIT_SEGMENTS_PER_CLIP,
    train_sets: Optional[dict] = None,
    references: Optional[dict] = None,
) -> CellResult:
    cell = CellResult(concept=mc.name, config=config_name)
    try:
        seed = derive_seed(root_seed, "cell", mc.name, config_name)
        trained, subject = _personalize(model, mc, config, seed)

        recon_prompt = RECONSTRUCTION_TEMPLATE.format(subject=subject)
        recon_gens = _generate(
            trained, recon_prompt, clips_per_prompt, segments, derive_seed(seed, "gen", "recon")
        )
        cell.clips_generated = len(recon_gens)

        train_set = (
            train_sets[mc.name]
            if train_sets is not None
            else embed_set(embedders.audio, mc.concept.clips)
        )
        gen_set = embed_set(embedders.audio, recon_gens)
        cell.clap_a = clap_a(gen_set, train_set)
        cell.fad = fad(gen_set, train_set)

        clap_t_values = []
        for pi, template in enumerate(prompts):
            prompt = fill_subject(template, subject)
            gens = _generate(
                trained, prompt, clips_per_prompt, edit_segments, derive_seed(seed, "gen", pi)
            )
            cell.clips_generated += len(gens)
            text_vec = embedders.joint.embed_text(fill_subject(template, ""))
            clap_t_values.append(clap_t(embed_set(embedders.joint, gens), text_vec))
        if clap_t_values:
            cell.clap_t = float(np.mean(clap_t_values))

        ref = references[mc.name] if references is not None else _concept_reference(mc)
        rates = _music_rates(recon_gens, ref)
        cell.bpm_match_rate, cell.loudness_match_rate, cell.key_match_rate, cell.scale_match_rate = rates
    except MelbindError as exc:
        logger.warning("cell (%s, %s) failed: %s", mc.name, config_name, exc)
        cell.error = str(exc)
    return cell


def reference_lines(
    manifest: DatasetManifest,
    model: ModelState,
    embedders: EmbedderBundle,
    root_seed: int,
    clips_per_prompt: int = CLIPS_PER_PROMPT,
    edit_segments: int = EDIT_SEGMENTS_PER_CLIP,
) -> ReferenceLines:
    """Audio ceiling, text ceiling, and text floor for the report axes.

    ceil_a: mean over concepts of the training clips' distinct-pair cosine.
    ceil_t: prompt-audio similarity of base-model generations from prompts
    with the subject slot stripped. floor_t: prompt-audio similarity of the
    training clips themselves.
    """
    ceils = []
    for mc in manifest.concepts:
        value = self_similarity(embed_set(embedders.audio, mc.concept.clips))
        if value is not None:
            ceils.append(value)
    ceil_a = float(np.mean(ceils)) if ceils else None

    ceil_t_values = []
    for pi, template in enumerate(manifest.editability_prompts):
        stripped = fill_subject(template, "")
        gens = _generate(
            model, stripped, clips_per_prompt, edit_segments,
            derive_seed(root_seed, "ceilT", pi),
        )
        text_vec = embedders.joint.embed_text(stripped)
        ceil_t_values.append(clap_t(embed_set(embedders.joint, gens), text_vec))
    ceil_t = float(np.mean(ceil_t_values)) if ceil_t_values else None

    floor_t_values = []
    for mc in manifest.concepts:
        train_joint = embed_set(embedders.joint, mc.concept.clips)
        for template in manifest.editability_prompts:
            text_vec = embedders.joint.embed_text(fill_subject(template, ""))
            floor_t_values.append(clap_t(train_joint, text_vec))
    floor_t = float(np.mean(floor_t_values)) if floor_t_values else None

    return ReferenceLines(ceil_a=ceil_a, ceil_t=ceil_t, floor_t=floor_t)


def run_experiment(
    manifest: DatasetManifest,
    model: ModelState,
    configs: Optional[dict[str, PersonalizationConfig]] = None,
    root_seed: int = 0,
    embedders: Optional[EmbedderBundle] = None,
    clips_per_prompt: int = CLIPS_PER_PROMPT,
    segments: int = SEGMENTS_PER_CLIP,
    edit_segments: int = EDIT_SEGMENTS_PER_CLIP,
) -> ExperimentReport:
    """Evaluate every concept under every config; failures stay per-cell."""
    if configs is None:
        configs = default_config_table()
    if embedders is None:
        embedders = EmbedderBundle.build(
            manifest.labeled_clips(),
            model.vocab,
            model=model,
            prompts=manifest.editability_prompts,
            seed=derive_seed(root_seed, "embedder"),
        )

    train_sets = {
        mc.name: embed_set(embedders.audio, mc.concept.clips) for mc in manifest.concepts
    }
    references = {mc.name: _concept_reference(mc) for mc in manifest.concepts}

    cells = []
    for mc in manifest.concepts:
        for config_name, config in configs.items():
            cells.append(
                run_cell(
                    model, mc, config_name, config,
                    manifest.editability_prompts, embedders, root_seed,
                    clips_per_prompt, segments, edit_segments, train_sets, references,
                )
            )
            logger.info("cell (%s, %s) done", mc.name, config_name)

    reference = reference_lines(
        manifest, model, embedders, root_seed, clips_per_prompt, edit_segments
    )
    meta = {
        "report_format": REPORT_FORMAT_VERSION,
        "package_version": __version__,
        "root_seed": root_seed,
        "manifest": manifest.name,
        "concepts": [mc.name for mc in manifest.concepts],
        "configs": list(configs.keys()),
        "prompts": len(manifest.editability_prompts),
        "clips_per_prompt": clips_per_prompt,
        "segments_per_clip": segments,
    }
    return ExperimentReport(cells=cells, reference=reference, meta=meta)
