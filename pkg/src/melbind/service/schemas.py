"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class FixtureSpecModel(BaseModel):
    kind: Literal["click_track", "tonal", "noise_texture"]
    duration: float = 6.0
    seed: int = 0
    bpm: Optional[float] = None
    key: Optional[str] = None
    scale: Optional[str] = None
    color: Optional[str] = None


class AudioPayload(BaseModel):
    wav_base64: str
    sample_rate: int
    duration: float


class SynthFixtureRequest(BaseModel):
    spec: FixtureSpecModel


class RenderFixturesRequest(BaseModel):
    manifest_path: str
    out_dir: str


class RenderFixturesResponse(BaseModel):
    files: list[str]


class PretrainRequest(BaseModel):
    manifest_path: str
    steps: Optional[int] = None
    lr: Optional[float] = None
    batch: Optional[int] = None
    seed: int = 0
    build_embedder: bool = True


class PretrainResponse(BaseModel):
    model_id: str
    embedder_id: Optional[str]
    initial_eval_loss: float
    final_eval_loss: float
    vocab_size: int


class LoadModelRequest(BaseModel):
    path: str


class ModelRef(BaseModel):
    model_id: str


class SaveModelRequest(BaseModel):
    path: str


class SavePathResponse(BaseModel):
    path: str


class ModelInfo(BaseModel):
    model_id: str
    vocab_size: int
    placeholders: list[str]
    param_counts: dict[str, int]


class ModelListResponse(BaseModel):
    models: list[ModelInfo]


class ClipSource(BaseModel):
    """One audio clip, provided as a WAV path, a fixture spec, or raw base64."""

    path: Optional[str] = None
    fixture: Optional[FixtureSpecModel] = None
    wav_base64: Optional[str] = None


class ConceptSpec(BaseModel):
    name: str
    class_noun: str
    clips: list[ClipSource] = Field(min_length=1, max_length=5)
    placeholder: Optional[str] = None


class PersonalizationConfigModel(BaseModel):
    method: Literal["TI", "DB"]
    n_clips: Literal[1, 3, 5] = 5
    mix: bool = False
    init: Literal["BL", "MW"] = "BL"
    train_text_encoder: bool = False
    lr: Optional[float] = None
    steps: Optional[int] = None
    batch: int = 4
    seed: int = 0
    mix_prob: float = 0.5
    momentum: float = 0.0
    prior_weight: float = 0.0
    identifier: str = ""


class PersonalizeRequest(BaseModel):
    """Concept given inline, or by (manifest_path, concept_name) reference."""

    concept: Optional[ConceptSpec] = None
    manifest_path: Optional[str] = None
    concept_name: Optional[str] = None
    config: PersonalizationConfigModel


class PersonalizeResponse(BaseModel):
    model_id: str
    subject: str
    changed_tensors: list[str]


class GenerateRequest(BaseModel):
    prompt: str
    n_segments: int = 4
    count: int = 1
    seed: int = 0
    deterministic: bool = False
    guidance_scale: Optional[float] = None


class GenerateResponse(BaseModel):
    clips: list[AudioPayload]


class TransferRequest(BaseModel):
    audio: ClipSource
    strength: float
    prompt: str
    seed: int = 0


class EvaluateRequest(BaseModel):
    manifest_path: str
    configs: Optional[list[str]] = None
    root_seed: int = 0
    embedder_path: Optional[str] = None
    corpus_manifest_path: Optional[str] = None
    clips_per_prompt: int = 4
    segments_per_clip: int = 4


class EvaluateResponse(BaseModel):
    report: dict
    cells_failed: int


class ScoreEmbeddingsRequest(BaseModel):
    metric: Literal["clap_a", "clap_t", "fad"]
    a_path: str
    b_path: str


class ScoreResponse(BaseModel):
    score: float


class ConvertReportRequest(BaseModel):
    report_path: str
    format: Literal["csv", "json"]
    out_path: str


class ReferenceLinesResponse(BaseModel):
    ceil_a: Optional[float]
    ceil_t: Optional[float]
    floor_t: Optional[float]
