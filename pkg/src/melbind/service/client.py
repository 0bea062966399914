"""Thin HTTP client for the service.

Given a base URL it talks to a remote server; without one it mounts the
FastAPI app in-process over an ASGI transport, so the CLI works with no
server running while keeping every operation behind the same API surface.
"""

from __future__ import annotations

from typing import Optional

import httpx

from ..errors import MelbindError


class ServiceError(MelbindError):
    def __init__(self, status_code: int, detail: str):
        super().__init__(f"service error {status_code}: {detail}")
        self.status_code = status_code
        self.detail = detail


class ServiceClient:
    def __init__(self, base_url: Optional[str] = None, timeout: Optional[float] = None):
        if base_url:
            self._client = httpx.Client(base_url=base_url, timeout=timeout)
        else:
            # Synchronous bridge onto the in-process ASGI app.
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient

            from .app import create_app

            self._client = TestClient(create_app(), raise_server_exceptions=False)

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _call(self, method: str, path: str, **kwargs) -> dict:
        response = self._client.request(method, path, **kwargs)
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise ServiceError(response.status_code, str(detail))
        return response.json()

    # ---- endpoint wrappers -------------------------------------------------

    def health(self) -> dict:
        return self._call("GET", "/health")

    def synth_fixture(self, spec: dict) -> dict:
        return self._call("POST", "/fixtures/synth", json={"spec": spec})

    def render_fixtures(self, manifest_path: str, out_dir: str) -> dict:
        return self._call(
            "POST",
            "/fixtures/render",
            json={"manifest_path": manifest_path, "out_dir": out_dir},
        )

    def pretrain(self, **payload) -> dict:
        return self._call("POST", "/models/pretrain", json=payload)

    def load_model(self, path: str) -> dict:
        return self._call("POST", "/models/load", json={"path": path})

    def save_model(self, model_id: str, path: str) -> dict:
        return self._call("POST", f"/models/{model_id}/save", json={"path": path})

    def list_models(self) -> dict:
        return self._call("GET", "/models")

    def personalize(self, model_id: str, config: dict, concept: Optional[dict] = None,
                    manifest_path: Optional[str] = None,
                    concept_name: Optional[str] = None) -> dict:
        payload: dict = {"config": config}
        if concept is not None:
            payload["concept"] = concept
        if manifest_path is not None:
            payload["manifest_path"] = manifest_path
            payload["concept_name"] = concept_name
        return self._call("POST", f"/models/{model_id}/personalize", json=payload)

    def save_embedder(self, embedder_id: str, path: str) -> dict:
        return self._call("POST", f"/embedders/{embedder_id}/save", json={"path": path})

    def generate(self, model_id: str, **payload) -> dict:
        return self._call("POST", f"/models/{model_id}/generate", json=payload)

    def transfer(self, model_id: str, **payload) -> dict:
        return self._call("POST", f"/models/{model_id}/transfer", json=payload)

    def evaluate(self, model_id: str, **payload) -> dict:
        return self._call("POST", f"/models/{model_id}/evaluate", json=payload)

    def reference_lines(self, model_id: str, **payload) -> dict:
        return self._call("POST", f"/models/{model_id}/reference-lines", json=payload)

    def score_embeddings(self, metric: str, a_path: str, b_path: str) -> dict:
        return self._call(
            "POST",
            "/embeddings/score",
            json={"metric": metric, "a_path": a_path, "b_path": b_path},
        )

    def convert_report(self, report_path: str, fmt: str, out_path: str) -> dict:
        return self._call(
            "POST",
            "/reports/convert",
            json={"report_path": report_path, "format": fmt, "out_path": out_path},
        )
