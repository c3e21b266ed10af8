"""Chat-completion client with retries, an on-disk response cache, and a replay backend.

Replay fixtures and cache entries share one layout: ``<dir>/<request_key>.json``
holding ``{"text": ..., "backend_id": ..., "token_usage": ...}``; only
``text`` is required in a fixture.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .errors import BackendError, BackendUnavailable, ConfigError, FixtureMissing

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.1
DEFAULT_MAX_TOKENS = 2048
RETRYABLE_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


def _digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LlmRequest:
    prompt: str
    model_id: str = "gpt-4"
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be positive")

    @property
    def request_key(self) -> str:
        return _digest({"model": self.model_id, "temperature": self.temperature, "prompt": self.prompt})


@dataclass(frozen=True)
class LlmResponse:
    text: str
    latency_ms: int
    backend_id: str
    token_usage: dict | None = None
    cached: bool = False

    def to_json(self) -> dict:
        return {"text": self.text, "backend_id": self.backend_id, "token_usage": self.token_usage}


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "replay"
    endpoint_url: str | None = None
    auth_token_env_var: str | None = None
    fixture_dir: str | None = None
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_base_ms: int = 500
    parallelism: int = 4
    cache_dir: str | None = None

    def __post_init__(self):
        if self.kind == "http_chat":
            if not self.endpoint_url or not self.auth_token_env_var:
                raise ConfigError("http_chat backend needs endpoint_url and auth_token_env_var")
        elif self.kind == "replay":
            if not self.fixture_dir:
                raise ConfigError("replay backend needs fixture_dir")
        else:
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")


class TransientError(Exception):
    """A failure worth retrying: timeout, connection reset, 429, 5xx."""


class Transport(Protocol):
    def __call__(self, url: str, payload: dict, headers: dict, timeout: float) -> tuple[int, dict]: ...


def urllib_transport(url: str, payload: dict, headers: dict, timeout: float) -> tuple[int, dict]:
    data = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=data, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        try:
            body = json.loads(exc.read().decode("utf-8"))
        except ValueError:
            body = {}
        return exc.code, body
    except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
        raise TransientError(str(exc)) from exc


@dataclass
class GatewayStats:
    backend_calls: int = 0
    attempts: int = 0
    cache_hits: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def bump(self, name: str, n: int = 1) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + n)


class LlmGateway:
    """Dispatches requests to the configured backend.

    ``transport``, ``sleep`` and ``rng`` are injectable so tests can script
    failures and skip real waiting.
    """

    def __init__(
        self,
        config: BackendConfig,
        transport: Transport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.config = config
        self.transport = transport or urllib_transport
        self.sleep = sleep
        self.rng = rng or random.Random()
        self.stats = GatewayStats()

    # cache

    def _cache_path(self, key: str) -> Path | None:
        return Path(self.config.cache_dir) / f"{key}.json" if self.config.cache_dir else None

    def _cache_get(self, key: str) -> LlmResponse | None:
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        rec = json.loads(path.read_text(encoding="utf-8"))
        return LlmResponse(rec["text"], 0, rec.get("backend_id", "cache"), rec.get("token_usage"), cached=True)

    def _cache_put(self, key: str, resp: LlmResponse) -> None:
        path = self._cache_path(key)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f"{path.name}.{threading.get_ident()}.tmp")
        tmp.write_text(json.dumps(resp.to_json(), sort_keys=True, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)

    # backends

    def _replay(self, request: LlmRequest) -> LlmResponse:
        key = request.request_key
        path = Path(self.config.fixture_dir) / f"{key}.json"
        self.stats.bump("backend_calls")
        self.stats.bump("attempts")
        if not path.exists():
            raise FixtureMissing(key)
        rec = json.loads(path.read_text(encoding="utf-8"))
        return LlmResponse(rec["text"], 0, "replay", rec.get("token_usage"))

    def _token(self) -> str:
        token = os.environ.get(self.config.auth_token_env_var or "")
        if not token:
            raise ConfigError(f"environment variable {self.config.auth_token_env_var} is not set")
        return token

    def check(self) -> None:
        """Fail early on settings that would make every request fail."""
        if self.config.kind == "http_chat":
            self._token()
        elif not Path(self.config.fixture_dir).is_dir():
            log.warning("fixture directory %s does not exist", self.config.fixture_dir)

    def _http(self, request: LlmRequest) -> LlmResponse:
        cfg = self.config
        token = self._token()
        payload = {
            "model": request.model_id,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "messages": [{"role": "user", "content": request.prompt}],
        }
        headers = {"Content-Type": "application/json", "Authorization": f"Bearer {token}"}
        self.stats.bump("backend_calls")
        last_error = "no attempt made"
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                delay_ms = cfg.backoff_base_ms * 2 ** (attempt - 1)
                self.sleep(delay_ms * (0.5 + self.rng.random() / 2) / 1000.0)
            self.stats.bump("attempts")
            t0 = time.monotonic()
            try:
                status, body = self.transport(cfg.endpoint_url, payload, headers, cfg.timeout_s)
            except TransientError as exc:
                last_error = f"transport error: {exc}"
                log.info("attempt %d failed: %s", attempt + 1, last_error)
                continue
            latency = int((time.monotonic() - t0) * 1000)
            if status in RETRYABLE_STATUS:
                last_error = f"HTTP {status}"
                log.info("attempt %d failed: %s", attempt + 1, last_error)
                continue
            if status != 200:
                raise BackendError(f"HTTP {status}: {body}")
            try:
                text = body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"unexpected response shape: {body!r}") from exc
            return LlmResponse(text, latency, f"http_chat:{request.model_id}", body.get("usage"))
        raise BackendUnavailable(
            f"gave up after {cfg.max_retries + 1} attempts: {last_error}", attempts=cfg.max_retries + 1
        )

    def infer(self, request: LlmRequest) -> LlmResponse:
        key = request.request_key
        hit = self._cache_get(key)
        if hit is not None:
            self.stats.bump("cache_hits")
            return hit
        if self.config.kind == "replay":
            resp = self._replay(request)
        else:
            resp = self._http(request)
        self._cache_put(key, resp)
        return resp

    def batch_infer(self, requests: Sequence[LlmRequest]) -> list[tuple[str, LlmResponse | Exception]]:
        """Run requests with bounded parallelism; errors are returned in place, in input order."""
        if not requests:
            raise ValueError("batch_infer needs at least one request")

        def one(req: LlmRequest):
            try:
                return req.request_key, self.infer(req)
            except (BackendError, ConfigError, OSError, ValueError) as exc:
                return req.request_key, exc

        with ThreadPoolExecutor(max_workers=self.config.parallelism) as pool:
            return list(pool.map(one, requests))


def infer(request: LlmRequest, backend: BackendConfig, **kwargs) -> LlmResponse:
    return LlmGateway(backend, **kwargs).infer(request)


def batch_infer(requests: Sequence[LlmRequest], backend: BackendConfig, **kwargs):
    return LlmGateway(backend, **kwargs).batch_infer(requests)


def write_fixture(fixture_dir: str | Path, request: LlmRequest, text: str) -> Path:
    """Store a canned response for the replay backend."""
    path = Path(fixture_dir) / f"{request.request_key}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"text": text}, ensure_ascii=False), encoding="utf-8")
    return path
