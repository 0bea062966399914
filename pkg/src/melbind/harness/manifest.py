"""Dataset manifests: named concepts plus editability prompts.

A manifest is a YAML file. Each concept lists 1..5 clips, given either as
WAV paths (resolved relative to the manifest) or as fixture specs expanded
through the synthesizer; a clip may also be a layered mix of fixtures.
Editability prompts are templates with a literal "{subject}" slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from ..audio.clip import AudioClip, peak_normalize
from ..audio.fixtures import FixtureSpec
from ..audio.io import read_wav
from ..errors import DomainError, ManifestError
from ..training import Concept

CATEGORIES = ("percussion", "melodic", "multi-instrument")
SUBJECT_SLOT = "{subject}"


@dataclass
class ManifestConcept:
    concept: Concept
    category: str
    label: str

    @property
    def name(self) -> str:
        return self.concept.name

    @property
    def class_noun(self) -> str:
        return self.concept.class_noun


@dataclass
class DatasetManifest:
    name: str
    concepts: list[ManifestConcept]
    editability_prompts: list[str]
    description: str = ""

    def labeled_clips(self) -> list[tuple[AudioClip, str]]:
        """(clip, label) pairs for pretraining and embedder fitting."""
        return [(clip, mc.label) for mc in self.concepts for clip in mc.concept.clips]

    def vocabulary_words(self) -> list[str]:
        """Every word the manifest's labels, nouns, and prompts can produce."""
        import re

        words = []
        for mc in self.concepts:
            words.extend(re.findall(r"[a-z0-9']+", mc.label.lower()))
            words.extend(re.findall(r"[a-z0-9']+", mc.class_noun.lower()))
        for prompt in self.editability_prompts:
            words.extend(re.findall(r"[a-z0-9']+", prompt.replace(SUBJECT_SLOT, " ").lower()))
        return words


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ManifestError(f"{where}: missing required field {key!r}")
    return mapping[key]


def _fixture_from_spec(spec: dict, where: str) -> FixtureSpec:
    if not isinstance(spec, dict):
        raise ManifestError(f"{where}: fixture spec must be a mapping")
    kind = _require(spec, "kind", where)
    try:
        return FixtureSpec(
            kind=str(kind),
            duration=float(spec.get("duration", 6.0)),
            seed=int(spec.get("seed", 0)),
            bpm=spec.get("bpm"),
            key=spec.get("key"),
            scale=spec.get("scale"),
            color=spec.get("color"),
        )
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: {exc}") from exc


def _render_clip(entry: dict, base_dir: Path, where: str) -> AudioClip:
    if not isinstance(entry, dict):
        raise ManifestError(f"{where}: clip entry must be a mapping")
    kinds = [k for k in ("path", "fixture", "mix") if k in entry]
    if len(kinds) != 1:
        raise ManifestError(f"{where}: exactly one of path/fixture/mix required, got {kinds}")
    if "path" in entry:
        wav = base_dir / str(entry["path"])
        if not wav.exists():
            raise ManifestError(f"{where}.path: file not found: {wav}")
        return read_wav(wav)
    if "fixture" in entry:
        try:
            return _fixture_from_spec(entry["fixture"], f"{where}.fixture").render()
        except DomainError as exc:
            raise ManifestError(f"{where}.fixture: {exc}") from exc
    parts = entry["mix"]
    if not isinstance(parts, list) or not parts:
        raise ManifestError(f"{where}.mix: needs a nonempty list of fixture specs")
    weights = entry.get("weights", [1.0] * len(parts))
    if len(weights) != len(parts):
        raise ManifestError(f"{where}.weights: length {len(weights)} != {len(parts)} parts")
    rendered = []
    for i, part in enumerate(parts):
        try:
            rendered.append(_fixture_from_spec(part, f"{where}.mix[{i}]").render())
        except DomainError as exc:
            raise ManifestError(f"{where}.mix[{i}]: {exc}") from exc
    n = max(len(c) for c in rendered)
    out = np.zeros(n)
    for w, clip in zip(weights, rendered):
        out[: len(clip)] += float(w) * clip.samples
    return peak_normalize(AudioClip(out, rendered[0].sample_rate), 0.9)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a manifest; errors name the offending field path."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ManifestError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ManifestError(f"{path}: top level must be a mapping")

    concepts_raw = _require(raw, "concepts", str(path))
    prompts = _require(raw, "editability_prompts", str(path))
    if not isinstance(concepts_raw, list) or not concepts_raw:
        raise ManifestError("concepts: must be a nonempty list")
    if not isinstance(prompts, list) or not prompts:
        raise ManifestError("editability_prompts: must be a nonempty list")
    for i, prompt in enumerate(prompts):
        if SUBJECT_SLOT not in str(prompt):
            raise ManifestError(f"editability_prompts[{i}]: missing the {SUBJECT_SLOT} slot")

    base_dir = path.parent
    concepts: list[ManifestConcept] = []
    seen_names = set()
    for i, entry in enumerate(concepts_raw):
        where = f"concepts[{i}]"
        if not isinstance(entry, dict):
            raise ManifestError(f"{where}: must be a mapping")
        name = str(_require(entry, "name", where))
        if name in seen_names:
            raise ManifestError(f"{where}.name: duplicate concept name {name!r}")
        seen_names.add(name)
        noun = str(_require(entry, "class_noun", where))
        category = str(entry.get("category", "melodic"))
        if category not in CATEGORIES:
            raise ManifestError(f"{where}.category: {category!r} not in {CATEGORIES}")
        clips_raw = _require(entry, "clips", where)
        if not isinstance(clips_raw, list) or not 1 <= len(clips_raw) <= 5:
            raise ManifestError(f"{where}.clips: needs 1..5 entries")
        clips = [
            _render_clip(c, base_dir, f"{where}.clips[{j}]") for j, c in enumerate(clips_raw)
        ]
        label = str(entry.get("label", name.replace("-", " ")))
        placeholder = str(entry.get("placeholder", "")) or f"<{name.lower()}>"
        try:
            concept = Concept(name=name, class_noun=noun, clips=clips, placeholder=placeholder)
        except DomainError as exc:
            raise ManifestError(f"{where}: {exc}") from exc
        concepts.append(ManifestConcept(concept=concept, category=category, label=label))

    return DatasetManifest(
        name=str(raw.get("name", path.stem)),
        concepts=concepts,
        editability_prompts=[str(p) for p in prompts],
        description=str(raw.get("description", "")),
    )


def fill_subject(prompt_template: str, subject: str) -> str:
    """Fill (or strip, with subject='') the {subject} slot; collapses spaces."""
    return " ".join(prompt_template.replace(SUBJECT_SLOT, subject).split())


def packaged_manifest_path(name: str) -> Path:
    """Path of a manifest shipped inside the package (corpus16, heldout4)."""
    from importlib import resources

    candidate = resources.files("melbind.data") / f"{name}.yaml"
    path = Path(str(candidate))
    if not path.exists():
        raise ManifestError(f"no packaged manifest named {name!r}")
    return path
