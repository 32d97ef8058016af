"""Provider-neutral chat and embedding backends, retry, and lenient JSON parsing."""

from __future__ import annotations

import ast
import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx
import numpy as np

from .errors import CacheMiss, ConfigError, RetryExhausted, TransportError

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
API_BASE_ENV = "SEMKG_API_BASE"
API_KEY_ENV = "SEMKG_API_KEY"


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]
    temperature: float = 1.0
    model_id: str = "default"
    max_tokens: int | None = None

    def __post_init__(self):
        msgs = tuple((str(r), str(c)) for r, c in self.messages)
        object.__setattr__(self, "messages", msgs)
        if any(r not in ROLES for r, _ in msgs):
            raise ValueError(f"message roles must be in {ROLES}")
        if not any(r == "user" for r, _ in msgs):
            raise ValueError("a chat request needs at least one user message")
        if not np.isfinite(self.temperature) or self.temperature < 0:
            raise ValueError(f"temperature must be finite and >= 0, got {self.temperature}")

    @classmethod
    def user(cls, content: str, temperature: float = 1.0, model_id: str = "default", **kw) -> "ChatRequest":
        return cls((("user", content),), temperature, model_id, **kw)

    @property
    def prompt(self) -> str:
        """Content of the last user message."""
        return [c for r, c in self.messages if r == "user"][-1]

    def with_model(self, model_id: str) -> "ChatRequest":
        return ChatRequest(self.messages, self.temperature, model_id, self.max_tokens)

    def to_payload(self) -> dict:
        body = {
            "model": self.model_id,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
        }
        if self.max_tokens is not None:
            body["max_tokens"] = self.max_tokens
        return body

    def cache_key(self) -> str:
        blob = json.dumps(self.to_payload(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


class EmbeddingBackend(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class RemoteChatBackend:
    """Chat-completions over HTTPS. Endpoint and key come from the environment."""

    def __init__(self, model_id: str | None = None, base_url: str | None = None, api_key: str | None = None,
                 timeout: float = 60.0, client: httpx.Client | None = None, max_in_flight: int = 8):
        self.base_url = (base_url or os.environ.get(API_BASE_ENV, "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        if not self.base_url:
            raise ConfigError(f"set {API_BASE_ENV} to the chat API base URL")
        self.model_id = model_id
        self._client = client or httpx.Client(timeout=timeout)
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _post(self, path: str, body: dict) -> dict:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        with self._slots:
            try:
                resp = self._client.post(f"{self.base_url}{path}", json=body, headers=headers)
            except httpx.HTTPError as e:
                raise TransportError(f"{type(e).__name__}: {e}") from e
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ConfigError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as e:
            raise TransportError(f"non-JSON response: {e}") from e

    def complete(self, request: ChatRequest) -> str:
        if self.model_id:
            request = request.with_model(self.model_id)
        data = self._post("/chat/completions", request.to_payload())
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as e:
            raise TransportError(f"malformed completion payload: {e}") from e


class ReplayBackend:
    """Content-addressed completion cache: ``<dir>/<sha256(request)>.txt``.

    With an ``inner`` backend, misses are forwarded and recorded; without one,
    a miss raises :class:`CacheMiss`.
    """

    def __init__(self, cache_dir, inner: ChatBackend | None = None):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.inner = inner
        self._write_lock = threading.Lock()

    def path_for(self, request: ChatRequest) -> Path:
        return self.cache_dir / f"{request.cache_key()}.txt"

    def record(self, request: ChatRequest, completion: str) -> None:
        path = self.path_for(request)
        with self._write_lock:
            tmp = path.with_suffix(".tmp")
            tmp.write_text(completion, encoding="utf-8")
            tmp.replace(path)

    def complete(self, request: ChatRequest) -> str:
        path = self.path_for(request)
        if path.exists():
            return path.read_text(encoding="utf-8")
        if self.inner is None:
            raise CacheMiss(f"no cached completion for request {path.stem[:12]}")
        text = self.inner.complete(request)
        self.record(request, text)
        return text


@dataclass
class RetryPolicy:
    max_attempts: int = 3
    backoff_base: float = 1.0
    max_delay: float = 60.0
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def delay(self, attempt: int) -> float:
        return min(self.max_delay, self.backoff_base * (2 ** attempt))


def chat_with_retry(backend: ChatBackend, request: ChatRequest, policy: RetryPolicy | None = None) -> str:
    """Return the first successful completion, retrying transport errors with exponential backoff."""
    policy = policy or RetryPolicy()
    last: Exception | None = None
    for attempt in range(policy.max_attempts):
        try:
            return backend.complete(request)
        except TransportError as e:
            last = e
            log.debug("attempt %d/%d failed: %s", attempt + 1, policy.max_attempts, e)
            if attempt + 1 < policy.max_attempts:
                policy.sleep(policy.delay(attempt))
    raise RetryExhausted(policy.max_attempts, last) from last


def _balanced_objects(text: str):
    """Yield each top-level ``{...}`` span, skipping braces inside quoted strings."""
    depth, start, quote, escaped = 0, None, None, False
    for i, ch in enumerate(text):
        if quote:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = None
            continue
        if ch in "\"'" and depth > 0:
            quote = ch
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                yield text[start:i + 1]


def extract_json_object(text: str) -> dict:
    """Parse the first balanced top-level object in a completion.

    Accepts strict JSON and Python-literal dicts (single quotes, trailing
    commas), since models copy the quoting style of the few-shot examples.
    """
    for blob in _balanced_objects(text):
        try:
            obj = json.loads(blob)
        except json.JSONDecodeError:
            try:
                obj = ast.literal_eval(blob)
            except (ValueError, SyntaxError, MemoryError, RecursionError):
                obj = None
        if isinstance(obj, dict):
            return obj
        break
    raise ValueError("no parseable object in completion")


class HashingEmbedding:
    """Offline bag-of-words embedding via signed feature hashing.

    Not a semantic model; it exists so cosine scoring runs without a network.
    """

    def __init__(self, dimension: int = 512, model_id: str = "hashing"):
        self.dimension = dimension
        self.model_id = model_id

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension)
        for tok in re.findall(r"[^\W_]+", text.lower()):
            h = int.from_bytes(hashlib.blake2b(tok.encode(), digest_size=8).digest(), "little")
            vec[h % self.dimension] += 1.0 if (h >> 63) & 1 else -1.0
        return vec


class RemoteEmbeddingBackend:
    def __init__(self, model_id: str, base_url: str | None = None, api_key: str | None = None,
                 timeout: float = 60.0, client: httpx.Client | None = None):
        self._chat = RemoteChatBackend(model_id, base_url, api_key, timeout, client)
        self.model_id = model_id
        self.dimension = 0

    def embed(self, text: str) -> np.ndarray:
        data = self._chat._post("/embeddings", {"model": self.model_id, "input": text})
        try:
            vec = np.asarray(data["data"][0]["embedding"], dtype=float)
        except (KeyError, IndexError, TypeError) as e:
            raise TransportError(f"malformed embedding payload: {e}") from e
        if self.dimension and vec.shape[0] != self.dimension:
            raise TransportError(f"embedding dimension changed: {vec.shape[0]} != {self.dimension}")
        self.dimension = vec.shape[0]
        return vec


class CachedEmbedding:
    """Persistent vector cache keyed by sha256 of (model id, text)."""

    def __init__(self, inner, cache_dir=None):
        self.inner = inner
        self.model_id = getattr(inner, "model_id", type(inner).__name__)
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._memo: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def dimension(self) -> int:
        return self.inner.dimension

    def embed(self, text: str) -> np.ndarray:
        key = hashlib.sha256(f"{self.model_id}\0{text}".encode("utf-8")).hexdigest()
        if key in self._memo:
            return self._memo[key]
        path = self.cache_dir / f"{key}.npy" if self.cache_dir else None
        if path is not None and path.exists():
            vec = np.load(path)
        else:
            vec = np.asarray(self.inner.embed(text), dtype=float)
            if path is not None:
                with self._lock:
                    tmp = path.with_name(path.stem + ".tmp.npy")
                    np.save(tmp, vec)
                    tmp.replace(path)
        self._memo[key] = vec
        return vec


def make_chat_backend(kind: str, model_id: str | None = None, cache_dir=None) -> ChatBackend:
    """Build a backend from a CLI name: ``api``, ``template`` or ``replay``."""
    from .template import TemplateBackend

    if kind == "template":
        return TemplateBackend()
    if kind == "api":
        inner = RemoteChatBackend(model_id)
        return ReplayBackend(cache_dir, inner) if cache_dir else inner
    if kind == "replay":
        if not cache_dir:
            raise ConfigError("replay backend needs a cache directory")
        return ReplayBackend(cache_dir)
    raise ConfigError(f"unknown backend {kind!r}; expected api, template or replay")


def map_bounded(fn: Callable, items: Sequence, max_workers: int = 1) -> list:
    """Order-preserving map with at most ``max_workers`` calls in flight."""
    if max_workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))
