"""Live HTTP backend.

Talks to two services configured via environment variables (or constructor
arguments): ``VISTA_MLLM_URL`` for completions and attachment uploads, and
``VISTA_T2V_URL`` for video generation, both authenticated with
``VISTA_API_KEY`` as a bearer token. The wire protocol is documented in the
README; provider-specific SDK adapters are out of scope.

Video attachments are passed by upload reference and the upload cache is
keyed by content id, so a video is uploaded at most once per process.
"""

from __future__ import annotations

import base64
import logging
import os
import threading
from typing import Callable, Optional

import httpx

from ..errors import BackendUnavailable, ConfigError, GenerationRejected
from ..types import VideoHandle
from .base import Backend, ModelRequest, RawCompletion

logger = logging.getLogger(__name__)

MLLM_URL_ENV = "VISTA_MLLM_URL"
T2V_URL_ENV = "VISTA_T2V_URL"
API_KEY_ENV = "VISTA_API_KEY"


class LiveBackend(Backend):
    name = "live"

    def __init__(
        self,
        mllm_url: Optional[str] = None,
        t2v_url: Optional[str] = None,
        api_key: Optional[str] = None,
        *,
        timeout: float = 120.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.mllm_url = (mllm_url or os.environ.get(MLLM_URL_ENV, "")).rstrip("/")
        self.t2v_url = (t2v_url or os.environ.get(T2V_URL_ENV, "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        if not self.mllm_url or not self.t2v_url:
            raise ConfigError(
                f"live backend needs {MLLM_URL_ENV} and {T2V_URL_ENV} to be set"
            )
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self._upload_cache: dict[str, str] = {}
        self._upload_lock = threading.Lock()

    # -- helpers -----------------------------------------------------------

    def _post(self, url: str, payload: dict) -> httpx.Response:
        try:
            response = self._client.post(url, json=payload)
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"transport error calling {url}: {exc}") from exc
        if response.status_code in (429,) or response.status_code >= 500:
            raise BackendUnavailable(f"{url} returned {response.status_code}")
        return response

    def _upload(self, handle: VideoHandle, get_bytes: Callable[[VideoHandle], bytes]) -> str:
        with self._upload_lock:
            cached = self._upload_cache.get(handle.id)
        if cached is not None:
            return cached
        payload = {
            "content_id": handle.id,
            "b64": base64.b64encode(get_bytes(handle)).decode("ascii"),
        }
        response = self._post(f"{self.mllm_url}/v1/files", payload)
        if response.status_code != 200:
            raise BackendUnavailable(
                f"upload of {handle.id} failed with {response.status_code}", retryable=False
            )
        file_id = response.json()["file_id"]
        with self._upload_lock:
            self._upload_cache[handle.id] = file_id
        return file_id

    # -- Backend API ---------------------------------------------------------

    def complete_once(self, request: ModelRequest, rendered, get_attachment_bytes) -> RawCompletion:
        refs = [self._upload(handle, get_attachment_bytes) for handle in request.attachments]
        payload = {
            "template_name": request.template_name,
            "prompt": rendered,
            "bindings": {k: str(v) for k, v in request.bindings.items()},
            "attachments": refs,
            "nonce": request.nonce,
        }
        response = self._post(f"{self.mllm_url}/v1/complete", payload)
        if response.status_code != 200:
            raise BackendUnavailable(
                f"completion failed with {response.status_code}: {response.text[:200]}",
                retryable=False,
            )
        body = response.json()
        return RawCompletion(
            text=body["text"],
            token_in=int(body.get("token_in", 0)),
            token_out=int(body.get("token_out", 0)),
        )

    def generate_video_bytes(self, prompt_text, duration_seconds, sample_index) -> tuple[bytes, str]:
        payload = {
            "prompt": prompt_text,
            "duration_seconds": duration_seconds,
            "nonce": f"sample{sample_index}",
        }
        response = self._post(f"{self.t2v_url}/v1/generate", payload)
        if response.status_code == 200:
            return base64.b64decode(response.json()["video_b64"]), self.name
        if response.status_code in (400, 403, 422):
            # Provider refused the prompt; the candidate is skipped upstream.
            try:
                reason = response.json().get("error", "")
            except ValueError:
                reason = response.text[:200]
            raise GenerationRejected("", reason=reason)
        raise BackendUnavailable(
            f"video generation failed with {response.status_code}", retryable=False
        )
