"""Chat-completion endpoint client with retries, rate limiting, and batching."""

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import requests

from meibokit.errors import EndpointError
from meibokit.reporting import PromptBundle, Source, build_prompt, parse_summary

log = logging.getLogger("meibokit.llm")

DEFAULT_API_KEY_ENV = "MEIBOKIT_API_KEY"


@dataclass
class EndpointConfig:
    """Connection settings for a chat-completions-style JSON-over-HTTP endpoint."""

    base_url: str
    model: str = "gpt-4"
    temperature: float = 0.0
    seed: int = 0
    timeout_s: float = 60.0
    max_retries: int = 2
    retry_backoff_s: float = 0.1
    api_key_env: str = DEFAULT_API_KEY_ENV
    concurrency: int = 4
    requests_per_s: float = 8.0

    def to_dict(self) -> dict:
        return {
            "base_url": self.base_url,
            "model": self.model,
            "temperature": self.temperature,
            "seed": self.seed,
            "timeout_s": self.timeout_s,
            "max_retries": self.max_retries,
            "retry_backoff_s": self.retry_backoff_s,
            "api_key_env": self.api_key_env,
            "concurrency": self.concurrency,
            "requests_per_s": self.requests_per_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EndpointConfig":
        known = {k: d[k] for k in cls("x").to_dict() if k in d}
        return cls(**known)


class TokenBucket:
    """Simple blocking token bucket; one token per request."""

    def __init__(self, rate_per_s: float, capacity: float | None = None):
        self.rate = max(rate_per_s, 1e-6)
        self.capacity = capacity if capacity is not None else max(1.0, rate_per_s)
        self._tokens = self.capacity
        self._stamp = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


def _completions_url(base_url: str) -> str:
    return base_url.rstrip("/") + "/chat/completions"


def call_summarizer(bundle: PromptBundle, cfg: EndpointConfig) -> str:
    """POST one prompt bundle; return the first choice's text verbatim.

    Transport failures and 5xx responses are retried up to
    ``cfg.max_retries`` times (``max_retries + 1`` attempts total); an empty
    completion is an error. Request/response hashes are logged for audit.
    """
    payload = {
        "model": cfg.model,
        "messages": bundle.to_messages(),
        "temperature": cfg.temperature,
        "seed": cfg.seed,
    }
    body = json.dumps(payload)
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(cfg.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    request_hash = hashlib.sha256(body.encode()).hexdigest()

    url = _completions_url(cfg.base_url)
    attempts = cfg.max_retries + 1
    last_status = None
    last_error = ""
    for attempt in range(1, attempts + 1):
        try:
            resp = requests.post(url, data=body, headers=headers, timeout=cfg.timeout_s)
            last_status = resp.status_code
        except requests.RequestException as exc:
            last_status = None
            last_error = str(exc)
            log.warning("request %s attempt %d/%d failed: %s", request_hash[:12], attempt, attempts, exc)
        else:
            if resp.status_code >= 500 or resp.status_code == 429:
                last_error = f"HTTP {resp.status_code}"
                log.warning(
                    "request %s attempt %d/%d got status %d",
                    request_hash[:12], attempt, attempts, resp.status_code,
                )
            elif resp.status_code >= 400:
                raise EndpointError(
                    f"endpoint rejected request: HTTP {resp.status_code}: {resp.text[:200]}",
                    last_status=resp.status_code,
                    attempts=attempt,
                )
            else:
                try:
                    content = resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError):
                    raise EndpointError(
                        "malformed completion response",
                        last_status=resp.status_code,
                        attempts=attempt,
                    ) from None
                if not (content or "").strip():
                    raise EndpointError(
                        "empty response", last_status=resp.status_code, attempts=attempt
                    )
                log.info(
                    "request %s ok after %d attempt(s), response sha256 %s",
                    request_hash[:12],
                    attempt,
                    hashlib.sha256(content.encode()).hexdigest()[:12],
                )
                return content
        if attempt < attempts:
            time.sleep(cfg.retry_backoff_s * attempt)
    raise EndpointError(
        f"endpoint failed after {attempts} attempts: {last_error}",
        last_status=last_status,
        attempts=attempts,
    )


MAX_RECORDS_PER_REQUEST = 8


def summarize_records(
    records,
    cfg: EndpointConfig,
    examples=None,
    batch_size: int = MAX_RECORDS_PER_REQUEST,
) -> list:
    """Summarize records through the endpoint, batched and rate limited.

    Requests run with bounded concurrency; completions are re-associated
    with their batch by request index, so out-of-order responses cannot
    scramble the output. Returns parsed QAPairs in input batch order.
    """
    records = list(records)
    if not records:
        return []
    batch_size = min(max(1, batch_size), MAX_RECORDS_PER_REQUEST)
    batches = [records[i:i + batch_size] for i in range(0, len(records), batch_size)]
    bucket = TokenBucket(cfg.requests_per_s)

    def run_one(batch):
        bucket.acquire()
        bundle = build_prompt(batch, examples=examples)
        raw = call_summarizer(bundle, cfg)
        return parse_summary(raw, source=Source.SUMMARIZER_LLM)

    results = [None] * len(batches)
    with ThreadPoolExecutor(max_workers=max(1, cfg.concurrency)) as pool:
        futures = {pool.submit(run_one, batch): i for i, batch in enumerate(batches)}
        for future, i in futures.items():
            results[i] = future.result()
    pairs = []
    for chunk in results:
        pairs.extend(chunk)
    return pairs


def llm_render_batch(cfg: EndpointConfig, examples=None):
    """Adapter giving ``assemble`` an LLM-backed renderer."""

    def render(records):
        return summarize_records(records, cfg, examples=examples)

    return render
