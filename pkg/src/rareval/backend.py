"""Uniform model-prediction interface.

Backends turn a rendered prompt into completion text: a remote
chat-completions endpoint for real runs, a deterministic mock for tests and
oracle closure. A content-addressed on-disk cache makes runs resumable and
byte-stable, and ``parse_rating`` extracts a numeric rating from free-form
completions.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

API_KEY_ENV = "RAREVAL_API_KEY"

PARSE_OK = "ok"
PARSE_CLAMPED = "clamped"
PARSE_FAILED = "failed"

_NUMBER = re.compile(r"[-+]?\d+(?:\.\d+)?")


class BackendError(Exception):
    """Transport failure after retries; carries the per-attempt log."""

    def __init__(self, message: str, attempts: list[str]):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"                      # "remote-chat" | "mock"
    endpoint_url: str = ""
    model_name: str = "mock"
    temperature: float = 0.0
    max_output_tokens: int = 16
    request_timeout: float = 60.0
    max_in_flight: int = 4
    retry_count: int = 3
    retry_backoff: tuple[float, ...] = (1.0, 2.0, 4.0)

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class Prediction:
    raw: str
    rating: float | None
    parse_status: str
    cache_hit: bool
    latency_ms: float


def parse_rating(raw: str) -> tuple[float | None, str]:
    """First decimal number in the text; [1,5] passes, [0,6] clamps to the
    nearest bound, anything else (or no number) fails."""
    m = _NUMBER.search(raw)
    if not m:
        return None, PARSE_FAILED
    value = float(m.group())
    if 1.0 <= value <= 5.0:
        return value, PARSE_OK
    if 0.0 <= value <= 6.0:
        return (1.0 if value < 1.0 else 5.0), PARSE_CLAMPED
    return None, PARSE_FAILED


class ResponseCache:
    """Append-only content-addressed cache: one file per key under a directory.

    Value file = one JSON metadata line followed by the raw completion bytes.
    Existing entries are never overwritten, so concurrent writers of the same
    key agree and re-runs are byte-stable.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    @staticmethod
    def key(model_name: str, temperature: float, prompt_text: str) -> str:
        h = hashlib.sha256()
        h.update(model_name.encode("utf-8") + b"\x00")
        h.update(repr(temperature).encode("ascii") + b"\x00")
        h.update(prompt_text.encode("utf-8"))
        return h.hexdigest()

    def get(self, key: str) -> str | None:
        path = self.directory / key
        if not path.exists():
            return None
        data = path.read_bytes()
        _, _, body = data.partition(b"\n")
        return body.decode("utf-8")

    def put(self, key: str, completion: str, meta: dict | None = None) -> None:
        path = self.directory / key
        with self._write_lock:
            if path.exists():
                return
            header = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(header + b"\n" + completion.encode("utf-8"))
            tmp.replace(path)


class MockBackend:
    """Deterministic in-process backend for tests and oracle closure.

    Modes, by constructor argument:
      - ``fixed``: always return the given text;
      - ``completion_fn``: call it on the prompt text;
      - ``user_means``: echo the target user's training mean rating
        (``global_mean`` for unseen users), full float precision.

    Tracks concurrent in-flight calls so max_in_flight can be asserted.
    """

    def __init__(self, fixed: str | None = None, completion_fn=None,
                 user_means: dict[int, float] | None = None,
                 global_mean: float | None = None):
        self.fixed = fixed
        self.completion_fn = completion_fn
        self.user_means = user_means
        self.global_mean = global_mean
        self.calls = 0
        self._in_flight = 0
        self.max_in_flight_seen = 0
        self._lock = threading.Lock()

    def _enter(self):
        with self._lock:
            self.calls += 1
            self._in_flight += 1
            self.max_in_flight_seen = max(self.max_in_flight_seen, self._in_flight)

    def _exit(self):
        with self._lock:
            self._in_flight -= 1

    def complete(self, prompt_text: str) -> str:
        self._enter()
        try:
            if self.completion_fn is not None:
                return self.completion_fn(prompt_text)
            if self.fixed is not None:
                return self.fixed
            raise ValueError("mock backend has no completion source for bare text")
        finally:
            self._exit()

    def complete_prompt(self, prompt) -> str:
        if self.user_means is not None:
            self._enter()
            try:
                mean = self.user_means.get(prompt.target_user, self.global_mean)
                return repr(mean)
            finally:
                self._exit()
        return self.complete(prompt.text)


class RemoteChatBackend:
    """HTTP chat-completions client: POST {model, messages, temperature,
    max_tokens}, bearer-token auth from the environment, retry with backoff."""

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()

    def complete(self, prompt_text: str) -> str:
        cfg = self.config
        body = {
            "model": cfg.model_name,
            "messages": [{"role": "user", "content": prompt_text}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
        }
        headers = {}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        attempts: list[str] = []
        for attempt in range(cfg.retry_count):
            try:
                resp = self.session.post(cfg.endpoint_url, json=body, headers=headers,
                                         timeout=cfg.request_timeout)
                if resp.status_code != 200:
                    attempts.append(f"attempt {attempt + 1}: HTTP {resp.status_code}")
                else:
                    payload = resp.json()
                    return payload["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, ValueError) as exc:
                attempts.append(f"attempt {attempt + 1}: {exc}")
            if attempt < cfg.retry_count - 1:
                schedule = cfg.retry_backoff
                time.sleep(schedule[min(attempt, len(schedule) - 1)])
        raise BackendError(f"request failed after {cfg.retry_count} attempts", attempts)

    def complete_prompt(self, prompt) -> str:
        return self.complete(prompt.text)


def make_backend(config: BackendConfig, **mock_kwargs):
    if config.kind == "mock":
        return MockBackend(**mock_kwargs)
    if config.kind == "remote-chat":
        return RemoteChatBackend(config)
    raise ValueError(f"unknown backend kind: {config.kind!r}")


def predict(config: BackendConfig, backend, prompt, cache: ResponseCache | None = None) -> Prediction:
    """Cache-first completion of a rendered prompt, parsed into a rating."""
    start = time.perf_counter()
    key = ResponseCache.key(config.model_name, config.temperature, prompt.text)
    if cache is not None:
        cached = cache.get(key)
        if cached is not None:
            rating, status = parse_rating(cached)
            return Prediction(cached, rating, status, True, (time.perf_counter() - start) * 1000)
    raw = backend.complete_prompt(prompt)
    if cache is not None:
        cache.put(key, raw, {"model": config.model_name, "temperature": config.temperature})
    rating, status = parse_rating(raw)
    return Prediction(raw, rating, status, False, (time.perf_counter() - start) * 1000)
