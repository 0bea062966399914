"""FastAPI service wrapping the core package.

The service holds loaded models (and their evaluation embedders) in an
in-memory registry so several clients can personalize, generate, and
evaluate against the same pretrained checkpoint. File paths in requests
refer to the server's filesystem; the bundled CLI runs the app in-process,
where that distinction disappears.
"""

from __future__ import annotations

import base64
import io
import itertools
import tempfile
import threading
from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..audio.clip import AudioClip
from ..audio.fixtures import FixtureSpec
from ..audio.io import read_wav, write_wav
from ..errors import MelbindError
from ..harness.experiment import (
    EmbedderBundle,
    default_config_table,
    pretrain_from_manifest,
    run_experiment,
)
from ..harness.manifest import load_manifest
from ..harness.report import emit_report, parse_report, report_from_dict
from ..metrics.embedder import ContrastiveEmbedder, ToyFeatureEmbedder, load_embedding_file
from ..metrics.similarity import clap_a, clap_t, fad
from ..model import ModelState, load_model, save_model
from ..seeds import derive_seed
from ..training import Concept, PersonalizationConfig, PretrainConfig, changed_tensors, personalize
from . import schemas as S


class ModelRegistry:
    """Thread-safe id -> state maps for models and embedder bundles."""

    def __init__(self):
        self._lock = threading.Lock()
        self._models: dict[str, ModelState] = {}
        self._embedders: dict[str, EmbedderBundle] = {}
        self._counter = itertools.count(1)

    def add_model(self, model: ModelState) -> str:
        with self._lock:
            model_id = f"m{next(self._counter):04d}"
            self._models[model_id] = model
            return model_id

    def add_embedder(self, bundle: EmbedderBundle) -> str:
        with self._lock:
            bundle_id = f"e{next(self._counter):04d}"
            self._embedders[bundle_id] = bundle
            return bundle_id

    def model(self, model_id: str) -> ModelState:
        with self._lock:
            if model_id not in self._models:
                raise HTTPException(404, f"unknown model id {model_id!r}")
            return self._models[model_id]

    def embedder(self, bundle_id: str) -> EmbedderBundle:
        with self._lock:
            if bundle_id not in self._embedders:
                raise HTTPException(404, f"unknown embedder id {bundle_id!r}")
            return self._embedders[bundle_id]

    def list_models(self) -> dict[str, ModelState]:
        with self._lock:
            return dict(self._models)


def _clip_to_payload(clip: AudioClip) -> S.AudioPayload:
    buf = io.BytesIO()
    with tempfile.NamedTemporaryFile(suffix=".wav") as tmp:
        write_wav(clip, tmp.name)
        buf.write(Path(tmp.name).read_bytes())
    return S.AudioPayload(
        wav_base64=base64.b64encode(buf.getvalue()).decode(),
        sample_rate=clip.sample_rate,
        duration=clip.duration,
    )


def _clip_from_source(source: S.ClipSource) -> AudioClip:
    provided = [source.path, source.fixture, source.wav_base64]
    if sum(p is not None for p in provided) != 1:
        raise HTTPException(422, "clip source needs exactly one of path/fixture/wav_base64")
    if source.path is not None:
        if not Path(source.path).exists():
            raise HTTPException(404, f"audio file not found: {source.path}")
        return read_wav(source.path)
    if source.fixture is not None:
        return FixtureSpec(**source.fixture.model_dump()).render()
    data = base64.b64decode(source.wav_base64)
    with tempfile.NamedTemporaryFile(suffix=".wav") as tmp:
        Path(tmp.name).write_bytes(data)
        return read_wav(tmp.name)


def _to_config(model: S.PersonalizationConfigModel) -> PersonalizationConfig:
    from ..training import db_config, ti_config

    base = ti_config if model.method == "TI" else db_config
    overrides = model.model_dump()
    overrides.pop("method")
    if overrides["lr"] is None:
        overrides.pop("lr")
    if overrides["steps"] is None:
        overrides.pop("steps")
    return base(**overrides)


def create_app() -> FastAPI:
    app = FastAPI(title="melbind", version=__version__)
    registry = ModelRegistry()
    app.state.registry = registry

    @app.exception_handler(MelbindError)
    async def melbind_error_handler(request, exc: MelbindError):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health", response_model=S.HealthResponse)
    def health():
        return S.HealthResponse(status="ok", version=__version__)

    # ---- fixtures --------------------------------------------------------

    @app.post("/fixtures/synth", response_model=S.AudioPayload)
    def synth_fixture(req: S.SynthFixtureRequest):
        clip = FixtureSpec(**req.spec.model_dump()).render()
        return _clip_to_payload(clip)

    @app.post("/fixtures/render", response_model=S.RenderFixturesResponse)
    def render_fixtures(req: S.RenderFixturesRequest):
        manifest = load_manifest(req.manifest_path)
        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        files = []
        for mc in manifest.concepts:
            for i, clip in enumerate(mc.concept.clips):
                path = out_dir / f"{mc.name}-{i}.wav"
                write_wav(clip, path)
                files.append(str(path))
        return S.RenderFixturesResponse(files=files)

    # ---- models ----------------------------------------------------------

    @app.post("/models/pretrain", response_model=S.PretrainResponse)
    def pretrain_endpoint(req: S.PretrainRequest):
        manifest = load_manifest(req.manifest_path)
        config = PretrainConfig(seed=req.seed)
        if req.steps is not None:
            config = replace(config, steps=req.steps)
        if req.lr is not None:
            config = replace(config, lr=req.lr)
        if req.batch is not None:
            config = replace(config, batch=req.batch)
        result = pretrain_from_manifest(manifest, config)
        model_id = registry.add_model(result.model)
        embedder_id = None
        if req.build_embedder:
            bundle = EmbedderBundle.build(
                manifest.labeled_clips(),
                result.model.vocab,
                model=result.model,
                prompts=manifest.editability_prompts,
                seed=derive_seed(req.seed, "embedder"),
            )
            embedder_id = registry.add_embedder(bundle)
        return S.PretrainResponse(
            model_id=model_id,
            embedder_id=embedder_id,
            initial_eval_loss=result.initial_eval_loss,
            final_eval_loss=result.final_eval_loss,
            vocab_size=result.model.vocab.size,
        )

    @app.post("/models/load", response_model=S.ModelRef)
    def load_endpoint(req: S.LoadModelRequest):
        if not Path(req.path).exists():
            raise HTTPException(404, f"checkpoint not found: {req.path}")
        return S.ModelRef(model_id=registry.add_model(load_model(req.path)))

    @app.post("/models/{model_id}/save", response_model=S.SavePathResponse)
    def save_endpoint(model_id: str, req: S.SaveModelRequest):
        save_model(registry.model(model_id), req.path)
        return S.SavePathResponse(path=req.path)

    @app.get("/models", response_model=S.ModelListResponse)
    def list_models():
        infos = []
        for model_id, model in registry.list_models().items():
            infos.append(
                S.ModelInfo(
                    model_id=model_id,
                    vocab_size=model.vocab.size,
                    placeholders=sorted(model.vocab.placeholder_ids),
                    param_counts=model.param_counts(),
                )
            )
        return S.ModelListResponse(models=infos)

    # ---- personalization and generation ----------------------------------

    @app.post("/models/{model_id}/personalize", response_model=S.PersonalizeResponse)
    def personalize_endpoint(model_id: str, req: S.PersonalizeRequest):
        base = registry.model(model_id)
        if req.concept is not None:
            clips = [_clip_from_source(c) for c in req.concept.clips]
            concept = Concept(
                name=req.concept.name,
                class_noun=req.concept.class_noun,
                clips=clips,
                placeholder=req.concept.placeholder or "",
            )
        elif req.manifest_path and req.concept_name:
            manifest = load_manifest(req.manifest_path)
            matches = [mc for mc in manifest.concepts if mc.name == req.concept_name]
            if not matches:
                raise HTTPException(404, f"no concept named {req.concept_name!r} in manifest")
            concept = matches[0].concept
        else:
            raise HTTPException(
                422, "provide either an inline concept or manifest_path + concept_name"
            )
        config = _to_config(req.config)
        trained, subject = personalize(base, concept, config)
        new_id = registry.add_model(trained)
        compare_base = base
        if config.method == "TI":
            compare_base = base.copy()
            from ..training import register_concept

            register_concept(compare_base, concept, config)
        changed = sorted(changed_tensors(compare_base, trained))
        return S.PersonalizeResponse(model_id=new_id, subject=subject, changed_tensors=changed)

    @app.post("/models/{model_id}/generate", response_model=S.GenerateResponse)
    def generate_endpoint(model_id: str, req: S.GenerateRequest):
        model = registry.model(model_id)
        clips = []
        for k in range(req.count):
            clip = model.sample(
                req.prompt,
                n_segments=req.n_segments,
                seed=derive_seed(req.seed, "clip", k),
                deterministic=req.deterministic,
                guidance_scale=req.guidance_scale,
            )
            clips.append(_clip_to_payload(clip))
        return S.GenerateResponse(clips=clips)

    @app.post("/models/{model_id}/transfer", response_model=S.AudioPayload)
    def transfer_endpoint(model_id: str, req: S.TransferRequest):
        model = registry.model(model_id)
        clip = _clip_from_source(req.audio)
        out = model.style_transfer(clip, req.strength, req.prompt, seed=req.seed)
        return _clip_to_payload(out)

    # ---- evaluation ------------------------------------------------------

    @app.post("/models/{model_id}/evaluate", response_model=S.EvaluateResponse)
    def evaluate_endpoint(model_id: str, req: S.EvaluateRequest):
        model = registry.model(model_id)
        manifest = load_manifest(req.manifest_path)
        table = default_config_table()
        if req.configs is not None:
            unknown = [c for c in req.configs if c not in table]
            if unknown:
                raise HTTPException(422, f"unknown config names: {unknown}")
            table = {name: table[name] for name in req.configs}

        embedders = None
        if req.embedder_path:
            embedders = EmbedderBundle(
                audio=ToyFeatureEmbedder(),
                joint=ContrastiveEmbedder.load(req.embedder_path),
            )
        elif req.corpus_manifest_path:
            corpus = load_manifest(req.corpus_manifest_path)
            embedders = EmbedderBundle.build(
                corpus.labeled_clips(),
                model.vocab,
                model=model,
                prompts=manifest.editability_prompts,
                seed=derive_seed(req.root_seed, "embedder"),
            )
        report = run_experiment(
            manifest,
            model,
            configs=table,
            root_seed=req.root_seed,
            embedders=embedders,
            clips_per_prompt=req.clips_per_prompt,
            segments=req.segments_per_clip,
        )
        from ..harness.report import report_to_dict

        failed = sum(1 for c in report.cells if c.error)
        return S.EvaluateResponse(report=report_to_dict(report), cells_failed=failed)

    @app.post("/models/{model_id}/reference-lines", response_model=S.ReferenceLinesResponse)
    def reference_endpoint(model_id: str, req: S.EvaluateRequest):
        from ..harness.experiment import reference_lines

        model = registry.model(model_id)
        manifest = load_manifest(req.manifest_path)
        if req.embedder_path:
            embedders = EmbedderBundle(
                audio=ToyFeatureEmbedder(),
                joint=ContrastiveEmbedder.load(req.embedder_path),
            )
        else:
            corpus_path = req.corpus_manifest_path or req.manifest_path
            corpus = load_manifest(corpus_path)
            embedders = EmbedderBundle.build(
                corpus.labeled_clips(),
                model.vocab,
                model=model,
                prompts=manifest.editability_prompts,
                seed=derive_seed(req.root_seed, "embedder"),
            )
        lines = reference_lines(manifest, model, embedders, req.root_seed)
        return S.ReferenceLinesResponse(
            ceil_a=lines.ceil_a, ceil_t=lines.ceil_t, floor_t=lines.floor_t
        )

    @app.post("/embedders/{embedder_id}/save", response_model=S.SavePathResponse)
    def save_embedder(embedder_id: str, req: S.SaveModelRequest):
        bundle = registry.embedder(embedder_id)
        bundle.joint.save(req.path)
        return S.SavePathResponse(path=req.path)

    # ---- embedding files and reports --------------------------------------

    @app.post("/embeddings/score", response_model=S.ScoreResponse)
    def score_embeddings(req: S.ScoreEmbeddingsRequest):
        a = load_embedding_file(req.a_path)
        b = load_embedding_file(req.b_path)
        if req.metric == "clap_a":
            value = clap_a(a, b)
        elif req.metric == "clap_t":
            value = clap_t(a, b.vectors[0])
        else:
            value = fad(a, b)
        return S.ScoreResponse(score=float(value))

    @app.post("/reports/convert", response_model=S.SavePathResponse)
    def convert_report(req: S.ConvertReportRequest):
        if not Path(req.report_path).exists():
            raise HTTPException(404, f"report not found: {req.report_path}")
        data = parse_report(req.report_path)
        emit_report(report_from_dict(data), req.format, req.out_path)
        return S.SavePathResponse(path=req.out_path)

    return app
