"""Chat-completion judges behind one client.

A *backend* is any callable ``(CompletionRequest) -> str`` that performs one
live call. :class:`JudgeClient` wraps a backend with the content-addressed
cache, retry/backoff, a concurrency cap and optional transcript recording.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from collections import defaultdict, deque
from collections.abc import Callable, Iterable
from dataclasses import asdict, dataclass, field
from fnmatch import fnmatchcase
from pathlib import Path
from typing import TypeVar

import httpx

from .errors import (
    BackendUnavailable,
    ConfigError,
    InvalidInputError,
    LLMError,
    NoScriptMatch,
    ParseFailure,
    ReplayMiss,
    RequestRejected,
)

log = logging.getLogger(__name__)
T = TypeVar("T")

DEFAULT_API_KEY_ENV = "COA_EVAL_API_KEY"
RETRYABLE_STATUS = frozenset({429}) | frozenset(range(500, 600))


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    prompt: str
    temperature: float = 0.0
    n: int = 1
    max_tokens: int | None = None
    timeout: float = 60.0
    # routing label "<stage>:<instance id>"; not part of the cache identity
    tag: str = ""

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise InvalidInputError("temperature must be >= 0")
        if self.n < 1:
            raise InvalidInputError("n must be >= 1")
        if not self.prompt:
            raise InvalidInputError("prompt must be nonempty")

    def fingerprint(self) -> dict:
        return {
            "model": self.model,
            "prompt": self.prompt,
            "temperature": float(self.temperature),
            "n": self.n,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class CompletionResult:
    text: str
    from_cache: bool
    attempts: int
    latency: float | None = None


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_backoff: float = 1.0
    multiplier: float = 2.0

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise InvalidInputError("max_attempts must be >= 1")

    def delay(self, attempt: int) -> float:
        """Sleep before retry number ``attempt`` (1-based)."""
        return self.base_backoff * self.multiplier ** (attempt - 1)


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "http"  # http | scripted | replay
    model: str = "gpt-3.5-turbo"
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = DEFAULT_API_KEY_ENV
    max_concurrency: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    timeout: float = 60.0
    cache_dir: str | None = None
    script: str | None = None
    transcript: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("http", "scripted", "replay"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.max_concurrency < 1:
            raise ConfigError("max_concurrency must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> BackendConfig:
        data = dict(data)
        if "retry" in data:
            data["retry"] = RetryPolicy(**data["retry"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad backend config: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


def cache_key(request: CompletionRequest) -> str:
    """Stable digest of everything that determines the judge's answer."""
    blob = json.dumps(request.fingerprint(), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class TransientError(LLMError):
    """A failure worth retrying (timeouts, connection errors, 429, 5xx)."""


# --------------------------------------------------------------------------
# Backends


class HttpBackend:
    """OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(self, base_url: str, api_key: str, transport: httpx.BaseTransport | None = None):
        self.url = base_url.rstrip("/") + "/chat/completions"
        self._client = httpx.Client(
            headers={"Authorization": f"Bearer {api_key}"},
            transport=transport,
        )

    def __call__(self, request: CompletionRequest) -> str:
        body = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "n": request.n,
        }
        if request.max_tokens is not None:
            body["max_tokens"] = request.max_tokens
        try:
            resp = self._client.post(self.url, json=body, timeout=request.timeout)
        except (httpx.TimeoutException, httpx.TransportError) as exc:
            raise TransientError(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code in RETRYABLE_STATUS:
            raise TransientError(f"status {resp.status_code}")
        if not resp.is_success:
            raise RequestRejected(resp.status_code, resp.text)
        try:
            # n > 1 is accepted but only the first sample is used
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise RequestRejected(resp.status_code, f"unreadable body: {resp.text}") from exc

    def close(self) -> None:
        self._client.close()


Response = str | Callable[[CompletionRequest], str]


class ScriptedBackend:
    """Deterministic judge stand-in.

    Rules are ``(pattern, response)`` pairs. The pattern is matched with
    shell-style wildcards against the request tag ``"<stage>:<instance id>"``;
    the first match wins. A response is either literal text or a callable
    taking the request.
    """

    def __init__(self, rules: Iterable[tuple[str, Response]]):
        self.rules = list(rules)
        self.calls: list[CompletionRequest] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> ScriptedBackend:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if isinstance(data, dict):
            data = data.get("rules", [])
        return cls((r["match"], r["response"]) for r in data)

    def __call__(self, request: CompletionRequest) -> str:
        with self._lock:
            self.calls.append(request)
        for pattern, response in self.rules:
            if fnmatchcase(request.tag, pattern):
                return response(request) if callable(response) else response
        raise NoScriptMatch(f"no scripted rule matches tag {request.tag!r}")


class ReplayBackend:
    """Serves recorded transcript texts; unknown requests raise :class:`ReplayMiss`.

    Several records may share a digest (a bypassed-cache re-query records a
    second answer); they are served in order and the last one repeats.
    Replayed completions do not count as live calls.
    """

    is_live = False

    def __init__(self, records: Iterable[dict]):
        self._queues: dict[str, deque[str]] = defaultdict(deque)
        for rec in records:
            self._queues[rec["digest"]].append(rec["text"])
        self._lock = threading.Lock()
        self.calls = 0

    def __call__(self, request: CompletionRequest) -> str:
        digest = cache_key(request)
        with self._lock:
            self.calls += 1
            queue = self._queues.get(digest)
            if not queue:
                raise ReplayMiss(digest)
            return queue.popleft() if len(queue) > 1 else queue[0]


def replay_from(path: str | Path) -> ReplayBackend:
    path = Path(path)
    records = []
    if path.exists():
        for lineno, line in enumerate(path.read_text(encoding="utf-8").split("\n"), 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                log.warning("skipping malformed transcript line %d in %s", lineno, path)
    return ReplayBackend(records)


class TranscriptRecorder:
    """Appends ``{"digest", "prompt", "text"}`` lines, one per served completion."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")
        self._seen: set[str] = set()
        self._lock = threading.Lock()

    def record(self, digest: str, prompt: str, text: str, *, live: bool) -> None:
        with self._lock:
            # cache hits only matter the first time a digest appears
            if not live and digest in self._seen:
                return
            self._seen.add(digest)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"digest": digest, "prompt": prompt, "text": text}, ensure_ascii=False) + "\n")


def record_transcript(path: str | Path) -> TranscriptRecorder:
    return TranscriptRecorder(path)


# --------------------------------------------------------------------------
# Cache


def _safe_dirname(model: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", model) or "_"


class ResponseCache:
    """Disk cache: ``<root>/<model>/cache.jsonl``, one JSON record per line.

    Later records for a digest win. Corrupt lines are skipped with a warning.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._mem: dict[str, dict[str, str]] = {}
        self._lock = threading.Lock()

    def _file(self, model: str) -> Path:
        return self.root / _safe_dirname(model) / "cache.jsonl"

    def _load(self, model: str) -> dict[str, str]:
        if model in self._mem:
            return self._mem[model]
        entries: dict[str, str] = {}
        path = self._file(model)
        if path.exists():
            for lineno, line in enumerate(path.read_text(encoding="utf-8").split("\n"), 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    entries[rec["key"]] = rec["text"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    log.warning("skipping corrupt cache entry %s:%d", path, lineno)
        self._mem[model] = entries
        return entries

    def get(self, request: CompletionRequest) -> str | None:
        with self._lock:
            return self._load(request.model).get(cache_key(request))

    def put(self, request: CompletionRequest, text: str) -> None:
        key = cache_key(request)
        with self._lock:
            self._load(request.model)[key] = text
            path = self._file(request.model)
            path.parent.mkdir(parents=True, exist_ok=True)
            rec = {"key": key, "request": request.fingerprint(), "text": text}
            with path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


# --------------------------------------------------------------------------
# Client


class JudgeClient:
    """Cache-first, retrying, concurrency-capped access to one judge model."""

    def __init__(
        self,
        backend: Callable[[CompletionRequest], str],
        model: str = "scripted",
        *,
        cache: ResponseCache | None = None,
        retry: RetryPolicy | None = None,
        max_concurrency: int = 1,
        recorder: TranscriptRecorder | None = None,
        temperature: float = 0.0,
        n: int = 1,
        max_tokens: int | None = None,
        timeout: float = 60.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_concurrency < 1:
            raise InvalidInputError("max_concurrency must be >= 1")
        self.backend = backend
        self.model = model
        self.cache = cache
        self.retry = retry or RetryPolicy()
        self.max_concurrency = max_concurrency
        self.recorder = recorder
        self.temperature = temperature
        self.n = n
        self.max_tokens = max_tokens
        self.timeout = timeout
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_concurrency)
        self._count_lock = threading.Lock()
        self.live_calls = 0
        self._live = getattr(backend, "is_live", True)

    def request(self, prompt: str, tag: str = "") -> CompletionRequest:
        return CompletionRequest(
            model=self.model,
            prompt=prompt,
            temperature=self.temperature,
            n=self.n,
            max_tokens=self.max_tokens,
            timeout=self.timeout,
            tag=tag,
        )

    def complete(self, request: CompletionRequest, *, bypass_cache: bool = False) -> CompletionResult:
        digest = cache_key(request)
        if self.cache is not None and not bypass_cache:
            hit = self.cache.get(request)
            if hit is not None:
                if self.recorder:
                    self.recorder.record(digest, request.prompt, hit, live=False)
                return CompletionResult(hit, from_cache=True, attempts=0)

        started = time.perf_counter()
        attempts = 0
        while True:
            attempts += 1
            try:
                with self._slots:
                    if self._live:
                        with self._count_lock:
                            self.live_calls += 1
                    text = self.backend(request)
                break
            except TransientError as exc:
                if attempts >= self.retry.max_attempts:
                    raise BackendUnavailable(
                        f"giving up after {attempts} attempts: {exc}"
                    ) from exc
                delay = self.retry.delay(attempts)
                log.info("transient judge failure (%s); retry %d in %.2fs", exc, attempts, delay)
                self._sleep(delay)

        if self.cache is not None:
            self.cache.put(request, text)
        if self.recorder:
            self.recorder.record(digest, request.prompt, text, live=True)
        return CompletionResult(text, from_cache=False, attempts=attempts,
                                latency=time.perf_counter() - started)

    def ask(self, prompt: str, tag: str = "", *, bypass_cache: bool = False) -> str:
        return self.complete(self.request(prompt, tag), bypass_cache=bypass_cache).text

    def ask_parsed(self, prompt: str, tag: str, parse: Callable[[str], T]) -> tuple[T, str, int]:
        """Ask and parse; on a parse failure re-ask once with the cache bypassed.

        Returns ``(value, raw_text, queries)``. A second failure propagates.
        """
        text = self.ask(prompt, tag)
        try:
            return parse(text), text, 1
        except ParseFailure as first:
            log.info("unparseable judge output for %s (%s); re-querying", tag, first)
        text = self.ask(prompt, tag, bypass_cache=True)
        return parse(text), text, 2


def build_client(
    config: BackendConfig,
    *,
    record: str | Path | None = None,
    replay: str | Path | None = None,
    max_concurrency: int | None = None,
) -> JudgeClient:
    """Construct a :class:`JudgeClient` from configuration.

    ``replay`` overrides the configured backend kind.
    """
    if replay is not None or config.kind == "replay":
        path = replay or config.transcript
        if path is None:
            raise ConfigError("replay backend needs a transcript path")
        backend: Callable[[CompletionRequest], str] = replay_from(path)
    elif config.kind == "scripted":
        if config.script is None:
            raise ConfigError("scripted backend needs a script path")
        backend = ScriptedBackend.from_file(config.script)
    else:
        key = os.environ.get(config.api_key_env)
        if not key:
            raise ConfigError(f"environment variable {config.api_key_env} is not set")
        backend = HttpBackend(config.base_url, key)
    return JudgeClient(
        backend,
        config.model,
        cache=ResponseCache(config.cache_dir) if config.cache_dir else None,
        retry=config.retry,
        max_concurrency=max_concurrency or config.max_concurrency,
        recorder=record_transcript(record) if record else None,
        timeout=config.timeout,
    )
