"""Chat-completion access: live OpenAI-compatible HTTP, replay, and mock.

Every sample is an independent single-sample request identified by a
content digest of (messages, params, sample_index). Records are appended
to a per-run JSONL store, so any recorded run replays exactly and for
free. Live calls pass through a sliding-window rate limiter and retry
transient failures with exponential backoff.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import BackendError, CacheMissError, ConfigError

DEFAULT_TEMPERATURE = 0.0
SC_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 512
DEFAULT_RETRY_MAX = 5


@dataclass(frozen=True)
class CompletionParams:
    model_name: str = "gpt-3.5-turbo"
    temperature: float = DEFAULT_TEMPERATURE
    n_samples: int = 1
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be positive")


def request_digest(messages: list[dict], params: CompletionParams, sample_index: int) -> str:
    """Stable hash of everything that identifies one sample request."""
    payload = {
        "messages": messages,
        "model": params.model_name,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
        "sample_index": sample_index,
    }
    blob = json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RawResponseRecord:
    request_digest: str
    messages: tuple
    response_text: str
    model_name: str
    timestamp: float
    sample_index: int

    def as_dict(self) -> dict:
        return {
            "request_digest": self.request_digest,
            "messages": list(self.messages),
            "response_text": self.response_text,
            "model_name": self.model_name,
            "timestamp": self.timestamp,
            "sample_index": self.sample_index,
        }


class ResponseStore:
    """Append-only JSONL store of raw responses, indexed by request digest."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._index: dict[str, str] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    self._index[rec["request_digest"]] = rec["response_text"]

    def __len__(self) -> int:
        return len(self._index)

    def get(self, digest: str) -> str | None:
        return self._index.get(digest)

    def append(self, record: RawResponseRecord) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record.as_dict(), ensure_ascii=False) + "\n")
            self._index[record.request_digest] = record.response_text


class RateLimiter:
    """Keeps live request rate at or under a ceiling over any 60 s window."""

    def __init__(self, rpm: int, time_fn=time.monotonic, sleep_fn=time.sleep):
        if rpm <= 0:
            raise ConfigError("rate limit ceiling must be positive")
        self.rpm = rpm
        self._time = time_fn
        self._sleep = sleep_fn
        self._sent: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._time()
                while self._sent and now - self._sent[0] >= 60.0:
                    self._sent.popleft()
                if len(self._sent) < self.rpm:
                    self._sent.append(now)
                    return
                wait = 60.0 - (now - self._sent[0])
            self._sleep(max(wait, 0.0))


@dataclass
class GatewayConfig:
    backend: str = "mock"  # live | replay | mock
    endpoint_url: str = ""
    api_key_env: str = "OPENAI_API_KEY"
    model_name: str = "gpt-3.5-turbo"
    rpm_ceiling: int = 0  # 0 disables rate limiting
    retry_max: int = DEFAULT_RETRY_MAX
    timeout_s: float = 60.0


class MockBackend:
    """Deterministic scripted backend for tests and dry runs.

    The script is a callable (messages, sample_index) -> text, or a plain
    string returned for every call. Calls are logged for assertions.
    """

    def __init__(self, script="[]"):
        if isinstance(script, str):
            text = script
            script = lambda messages, sample_index: text  # noqa: E731
        self.script = script
        self.calls: list[tuple[list[dict], int]] = []
        self._lock = threading.Lock()

    def complete_one(self, messages: list[dict], params: CompletionParams, sample_index: int) -> str:
        with self._lock:
            self.calls.append((messages, sample_index))
        return str(self.script(messages, sample_index))


class LiveBackend:
    """OpenAI-compatible chat-completions client with retry/backoff."""

    def __init__(
        self,
        config: GatewayConfig,
        transport=None,
        sleep_fn=time.sleep,
    ):
        if not config.endpoint_url:
            raise ConfigError("live backend needs endpoint_url")
        api_key = os.environ.get(config.api_key_env, "")
        if not api_key:
            raise ConfigError(f"live backend needs an API key in ${config.api_key_env}")
        self.config = config
        self.api_key = api_key
        self._post = transport or self._default_post
        self._sleep = sleep_fn

    def _default_post(self, url: str, payload: dict, headers: dict, timeout: float):
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
        return resp.status_code, resp.text

    def complete_one(self, messages: list[dict], params: CompletionParams, sample_index: int) -> str:
        payload = {
            "model": params.model_name,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "n": 1,
        }
        headers = {
            "Content-Type": "application/json",
            "Authorization": f"Bearer {self.api_key}",
        }
        last_err = "no attempt made"
        for attempt in range(self.config.retry_max + 1):
            if attempt:
                self._sleep(min(2 ** (attempt - 1), 30.0))
            try:
                status, body = self._post(
                    self.config.endpoint_url, payload, headers, self.config.timeout_s
                )
            except requests.RequestException as e:
                last_err = f"transport error: {e}"
                continue
            if status == 200:
                try:
                    data = json.loads(body)
                    return data["choices"][0]["message"]["content"]
                except (json.JSONDecodeError, KeyError, IndexError, TypeError) as e:
                    raise BackendError(f"malformed completion response: {e}") from e
            if status in (408, 409, 429) or status >= 500:
                last_err = f"HTTP {status}: {body[:200]}"
                continue
            raise BackendError(f"HTTP {status}: {body[:400]}")
        raise BackendError(f"exhausted {self.config.retry_max} retries; last error: {last_err}")


class Gateway:
    """Uniform completion access over a backend, store, and rate limiter."""

    def __init__(
        self,
        backend,
        mode: str,
        store: ResponseStore | None = None,
        rate_limiter: RateLimiter | None = None,
    ):
        if mode not in ("live", "replay", "mock"):
            raise ConfigError(f"unknown backend mode {mode!r}")
        if mode == "replay" and store is None:
            raise ConfigError("replay mode needs a response store")
        self.backend = backend
        self.mode = mode
        self.store = store
        self.rate_limiter = rate_limiter
        self.calls = 0
        self.cache_hits = 0
        self._lock = threading.Lock()

    @classmethod
    def from_config(
        cls,
        config: GatewayConfig,
        store: ResponseStore | None = None,
        mock_script="[]",
    ) -> "Gateway":
        if config.backend == "mock":
            backend = MockBackend(mock_script)
        elif config.backend == "replay":
            backend = None
        elif config.backend == "live":
            backend = LiveBackend(config)
        else:
            raise ConfigError(f"unknown backend {config.backend!r}")
        limiter = RateLimiter(config.rpm_ceiling) if config.rpm_ceiling else None
        return cls(backend, config.backend, store=store, rate_limiter=limiter)

    def complete(
        self,
        messages: list[dict],
        params: CompletionParams,
        first_index: int = 0,
    ) -> list[str]:
        """Return exactly n_samples texts, in sample_index order.

        Sample indices run from first_index; independent dialogue instances
        pass their instance number so identical first turns stay distinct.
        """
        texts: list[str] = []
        misses: list[str] = []
        for offset in range(params.n_samples):
            idx = first_index + offset
            digest = request_digest(messages, params, idx)
            cached = self.store.get(digest) if self.store is not None else None
            if self.mode == "replay":
                if cached is None:
                    misses.append(digest)
                else:
                    texts.append(cached)
                continue
            if cached is not None:
                with self._lock:
                    self.cache_hits += 1
                texts.append(cached)
                continue
            if self.mode == "live" and self.rate_limiter is not None:
                self.rate_limiter.acquire()
            text = self.backend.complete_one(messages, params, idx)
            if self.store is not None:
                self.store.append(
                    RawResponseRecord(
                        request_digest=digest,
                        messages=tuple(messages),
                        response_text=text,
                        model_name=params.model_name,
                        timestamp=time.time(),
                        sample_index=idx,
                    )
                )
            with self._lock:
                self.calls += 1
            texts.append(text)
        if misses:
            raise CacheMissError(misses)
        return texts
