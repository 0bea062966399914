"""Command-line interface: a thin client over the service API.

With --server the commands talk to a running instance; otherwise the app is
mounted in-process, so everything works standalone. Any option can also come
from a YAML config file (--config); explicit flags win over the file.

Exit codes: 0 success, 1 partial failures during a run, 2 configuration or
input errors.
"""

from __future__ import annotations

import argparse
import base64
import hashlib
import json
import sys
import time
from pathlib import Path

import yaml

from . import __version__
from .errors import MelbindError
from .service.client import ServiceClient, ServiceError

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2

SIDECAR_FORMAT = "melbind-sidecar-v1"


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise MelbindError(f"config file not found: {p}")
    data = yaml.safe_load(p.read_text()) or {}
    if not isinstance(data, dict):
        raise MelbindError(f"{p}: config file must be a mapping")
    return data


def _resolve(args: argparse.Namespace, config: dict, key: str, default=None):
    """CLI flag beats config file beats default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _write_sidecar(out_path: Path, command: str, params: dict, outputs: list[str]) -> None:
    canonical = json.dumps(params, sort_keys=True, default=str)
    sidecar = {
        "format": SIDECAR_FORMAT,
        "package_version": __version__,
        "command": command,
        "parameters": params,
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": params.get("seed"),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "outputs": outputs,
    }
    path = out_path.with_suffix(out_path.suffix + ".meta.json")
    path.write_text(json.dumps(sidecar, indent=2) + "\n")


def _client(args) -> ServiceClient:
    return ServiceClient(base_url=args.server, timeout=None)


def _save_b64_wav(b64: str, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(base64.b64decode(b64))


# ---------------------------------------------------------------------------
# subcommands


def cmd_serve(args, config):
    import uvicorn

    from .service.app import create_app

    host = _resolve(args, config, "host", "127.0.0.1")
    port = int(_resolve(args, config, "port", 8321))
    uvicorn.run(create_app(), host=host, port=port)
    return EXIT_OK


def cmd_fixtures(args, config):
    manifest = _resolve(args, config, "manifest")
    out_dir = _resolve(args, config, "out")
    if not manifest or not out_dir:
        raise MelbindError("fixtures requires --manifest and --out")
    with _client(args) as client:
        result = client.render_fixtures(str(Path(manifest).resolve()), str(Path(out_dir).resolve()))
    params = {"manifest": manifest, "out": out_dir}
    _write_sidecar(Path(out_dir) / "fixtures", "fixtures", params, result["files"])
    print(f"rendered {len(result['files'])} fixture clips into {out_dir}")
    return EXIT_OK


def cmd_pretrain(args, config):
    manifest = _resolve(args, config, "manifest")
    out = _resolve(args, config, "out")
    if not manifest or not out:
        raise MelbindError("pretrain requires --manifest and --out")
    seed = int(_resolve(args, config, "seed", 0))
    embedder_out = _resolve(args, config, "embedder-out")
    payload = {
        "manifest_path": str(Path(manifest).resolve()),
        "seed": seed,
        "build_embedder": bool(embedder_out),
    }
    for key in ("steps", "lr", "batch"):
        value = _resolve(args, config, key)
        if value is not None:
            payload[key] = value
    with _client(args) as client:
        result = client.pretrain(**payload)
        client.save_model(result["model_id"], str(Path(out).resolve()))
        outputs = [out]
        if embedder_out:
            client.save_embedder(result["embedder_id"], str(Path(embedder_out).resolve()))
            outputs.append(embedder_out)
    params = {**payload, "out": out, "embedder_out": embedder_out}
    _write_sidecar(Path(out), "pretrain", params, outputs)
    print(
        f"pretrained: eval loss {result['initial_eval_loss']:.2f} -> "
        f"{result['final_eval_loss']:.2f}; saved {out}"
    )
    return EXIT_OK


def cmd_personalize(args, config):
    model = _resolve(args, config, "model")
    manifest = _resolve(args, config, "manifest")
    concept = _resolve(args, config, "concept")
    out = _resolve(args, config, "out")
    method = _resolve(args, config, "method")
    if not all([model, manifest, concept, out, method]):
        raise MelbindError("personalize requires --model, --manifest, --concept, --method, --out")
    cfg = {
        "method": method,
        "n_clips": int(_resolve(args, config, "n-clips", 5)),
        "mix": bool(_resolve(args, config, "mix", False)),
        "init": _resolve(args, config, "init", "BL"),
        "train_text_encoder": bool(_resolve(args, config, "train-text-encoder", False)),
        "seed": int(_resolve(args, config, "seed", 0)),
    }
    for key in ("lr", "steps"):
        value = _resolve(args, config, key)
        if value is not None:
            cfg[key] = value
    with _client(args) as client:
        loaded = client.load_model(str(Path(model).resolve()))
        result = client.personalize(
            loaded["model_id"],
            cfg,
            manifest_path=str(Path(manifest).resolve()),
            concept_name=concept,
        )
        client.save_model(result["model_id"], str(Path(out).resolve()))
    params = {"model": model, "manifest": manifest, "concept": concept, **cfg, "out": out}
    _write_sidecar(Path(out), "personalize", params, [out])
    print(f"personalized {concept!r} ({method}); prompt subject: {result['subject']!r}")
    print(f"changed tensors: {', '.join(result['changed_tensors'])}")
    print(f"saved {out}")
    return EXIT_OK


def cmd_generate(args, config):
    model = _resolve(args, config, "model")
    prompt = _resolve(args, config, "prompt")
    out = _resolve(args, config, "out")
    if not all([model, prompt, out]):
        raise MelbindError("generate requires --model, --prompt, --out")
    payload = {
        "prompt": prompt,
        "n_segments": int(_resolve(args, config, "segments", 4)),
        "count": int(_resolve(args, config, "count", 1)),
        "seed": int(_resolve(args, config, "seed", 0)),
        "deterministic": bool(_resolve(args, config, "deterministic", False)),
    }
    guidance = _resolve(args, config, "guidance-scale")
    if guidance is not None:
        payload["guidance_scale"] = float(guidance)
    out_dir = Path(out)
    with _client(args) as client:
        loaded = client.load_model(str(Path(model).resolve()))
        result = client.generate(loaded["model_id"], **payload)
    outputs = []
    for i, clip in enumerate(result["clips"]):
        path = out_dir / f"gen-{i:03d}.wav"
        _save_b64_wav(clip["wav_base64"], path)
        outputs.append(str(path))
    params = {"model": model, **payload, "out": out}
    _write_sidecar(out_dir / "generate", "generate", params, outputs)
    print(f"wrote {len(outputs)} clips to {out_dir}")
    return EXIT_OK


def cmd_transfer(args, config):
    model = _resolve(args, config, "model")
    input_path = _resolve(args, config, "input")
    prompt = _resolve(args, config, "prompt")
    out = _resolve(args, config, "out")
    strength = _resolve(args, config, "strength")
    if not all([model, input_path, prompt, out]) or strength is None:
        raise MelbindError("transfer requires --model, --input, --prompt, --strength, --out")
    wav_b64 = base64.b64encode(Path(input_path).read_bytes()).decode()
    payload = {
        "audio": {"wav_base64": wav_b64},
        "strength": float(strength),
        "prompt": prompt,
        "seed": int(_resolve(args, config, "seed", 0)),
    }
    with _client(args) as client:
        loaded = client.load_model(str(Path(model).resolve()))
        result = client.transfer(loaded["model_id"], **payload)
    out_path = Path(out)
    _save_b64_wav(result["wav_base64"], out_path)
    params = {"model": model, "input": input_path, "strength": strength,
              "prompt": prompt, "seed": payload["seed"], "out": out}
    _write_sidecar(out_path, "transfer", params, [out])
    print(f"wrote {out} ({result['duration']:.1f} s)")
    return EXIT_OK


def cmd_evaluate(args, config):
    model = _resolve(args, config, "model")
    manifest = _resolve(args, config, "manifest")
    out = _resolve(args, config, "out")
    if not all([model, manifest, out]):
        raise MelbindError("evaluate requires --model, --manifest, --out")
    payload = {
        "manifest_path": str(Path(manifest).resolve()),
        "root_seed": int(_resolve(args, config, "seed", 0)),
        "clips_per_prompt": int(_resolve(args, config, "clips-per-prompt", 4)),
        "segments_per_clip": int(_resolve(args, config, "segments", 4)),
    }
    configs = _resolve(args, config, "configs")
    if configs:
        payload["configs"] = configs.split(",") if isinstance(configs, str) else list(configs)
    embedder = _resolve(args, config, "embedder")
    corpus = _resolve(args, config, "corpus")
    if embedder:
        payload["embedder_path"] = str(Path(embedder).resolve())
    elif corpus:
        payload["corpus_manifest_path"] = str(Path(corpus).resolve())
    fmt = _resolve(args, config, "format", "json")
    out_path = Path(out)
    with _client(args) as client:
        loaded = client.load_model(str(Path(model).resolve()))
        result = client.evaluate(loaded["model_id"], **payload)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(json.dumps(result["report"], indent=2) + "\n")
        outputs = [str(out_path)]
        if fmt == "csv":
            csv_path = out_path.with_suffix(".csv")
            client.convert_report(str(out_path.resolve()), "csv", str(csv_path.resolve()))
            outputs.append(str(csv_path))
    params = {"model": model, "manifest": manifest, **payload, "out": out, "format": fmt}
    _write_sidecar(out_path, "evaluate", params, outputs)
    failed = result["cells_failed"]
    total = len(result["report"]["cells"])
    print(f"evaluated {total} cells; {failed} failed; report at {out}")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_report(args, config):
    inp = _resolve(args, config, "input")
    out = _resolve(args, config, "out")
    fmt = _resolve(args, config, "format", "csv")
    if not inp or not out:
        raise MelbindError("report requires --input and --out")
    with _client(args) as client:
        client.convert_report(str(Path(inp).resolve()), fmt, str(Path(out).resolve()))
    params = {"input": inp, "format": fmt, "out": out}
    _write_sidecar(Path(out), "report", params, [out])
    print(f"wrote {out}")
    return EXIT_OK


def cmd_score(args, config):
    metric = _resolve(args, config, "metric")
    a_path = _resolve(args, config, "a")
    b_path = _resolve(args, config, "b")
    if not all([metric, a_path, b_path]):
        raise MelbindError("score requires --metric, --a, --b")
    with _client(args) as client:
        result = client.score_embeddings(metric, str(Path(a_path).resolve()), str(Path(b_path).resolve()))
    print(f"{metric} = {result['score']:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="melbind", description=__doc__)
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    parser.add_argument("--version", action="version", version=f"melbind {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, options):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file with option defaults")
        for opt, kwargs in options:
            p.add_argument(opt, **kwargs)
        p.set_defaults(fn=fn)
        return p

    add("serve", cmd_serve, [("--host", {}), ("--port", {"type": int})])
    add("fixtures", cmd_fixtures, [("--manifest", {}), ("--out", {})])
    add("pretrain", cmd_pretrain, [
        ("--manifest", {}), ("--out", {}), ("--embedder-out", {}),
        ("--steps", {"type": int}), ("--lr", {"type": float}),
        ("--batch", {"type": int}), ("--seed", {"type": int}),
    ])
    add("personalize", cmd_personalize, [
        ("--model", {}), ("--manifest", {}), ("--concept", {}),
        ("--method", {"choices": ["TI", "DB"]}), ("--init", {"choices": ["BL", "MW"]}),
        ("--n-clips", {"type": int, "choices": [1, 3, 5]}),
        ("--mix", {"action": "store_const", "const": True}),
        ("--train-text-encoder", {"action": "store_const", "const": True}),
        ("--lr", {"type": float}), ("--steps", {"type": int}),
        ("--seed", {"type": int}), ("--out", {}),
    ])
    add("generate", cmd_generate, [
        ("--model", {}), ("--prompt", {}), ("--count", {"type": int}),
        ("--segments", {"type": int}), ("--seed", {"type": int}),
        ("--deterministic", {"action": "store_const", "const": True}),
        ("--guidance-scale", {"type": float}), ("--out", {}),
    ])
    add("transfer", cmd_transfer, [
        ("--model", {}), ("--input", {}), ("--prompt", {}),
        ("--strength", {"type": float}), ("--seed", {"type": int}), ("--out", {}),
    ])
    add("evaluate", cmd_evaluate, [
        ("--model", {}), ("--manifest", {}), ("--corpus", {}), ("--embedder", {}),
        ("--configs", {}), ("--seed", {"type": int}),
        ("--clips-per-prompt", {"type": int}), ("--segments", {"type": int}),
        ("--format", {"choices": ["json", "csv"]}), ("--out", {}),
    ])
    add("report", cmd_report, [
        ("--input", {}), ("--format", {"choices": ["json", "csv"]}), ("--out", {}),
    ])
    add("score", cmd_score, [
        ("--metric", {"choices": ["clap_a", "clap_t", "fad"]}), ("--a", {}), ("--b", {}),
    ])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config_file(getattr(args, "config", None))
        return args.fn(args, config)
    except ServiceError as exc:
        print(f"error: {exc.detail}", file=sys.stderr)
        return EXIT_CONFIG if exc.status_code < 500 else EXIT_PARTIAL
    except MelbindError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
