"""Minimal OpenAI-compatible chat-completion client with retries."""

import logging
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field

import httpx

from .errors import EndpointError, ScorerError

log = logging.getLogger(__name__)

_RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}
_NUMBER = re.compile(r"-?\d+(?:\.\d+)?")


@dataclass
class ChatReply:
    content: str
    top_logprobs: list = field(default_factory=list)  # [(token, logprob), ...] of token 0
    latency_s: float = 0.0


class ChatClient:
    """Thin wrapper over ``POST {base_url}/chat/completions``.

    Transport errors, timeouts and 408/409/429/5xx responses are retried up to
    ``retries`` times and then surface as :class:`ScorerError`; other HTTP
    errors raise :class:`EndpointError` immediately.
    """

    def __init__(self, base_url, model, token_env=None, timeout=30.0, retries=2,
                 backoff_s=0.5, max_concurrency=4, transport=None, seed=None):
        self.model = model
        self.retries = retries
        self.backoff_s = backoff_s
        self.seed = seed
        headers = {"Content-Type": "application/json"}
        if token_env:
            token = os.environ.get(token_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        self._http = httpx.Client(base_url=base_url.rstrip("/"), timeout=timeout,
                                  headers=headers, transport=transport)
        self._slots = threading.BoundedSemaphore(max(1, max_concurrency))
        self._lock = threading.Lock()
        self.total_latency_s = 0.0
        self.calls = 0

    @classmethod
    def from_binding(cls, binding, transport=None, seed=None):
        return cls(binding.base_url, binding.model, binding.token_env, binding.timeout,
                   binding.retries, binding.backoff_s, binding.max_concurrency,
                   transport=transport, seed=seed)

    def close(self):
        self._http.close()

    def complete(self, prompt, logprobs=False, max_tokens=256):
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
            "max_tokens": max_tokens,
        }
        if logprobs:
            payload["logprobs"] = True
            payload["top_logprobs"] = 5
        if self.seed is not None:
            payload["seed"] = self.seed
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            start = time.perf_counter()
            try:
                with self._slots:
                    resp = self._http.post("/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last = exc
                log.warning("chat request failed (%s), attempt %d", exc, attempt + 1)
                continue
            finally:
                self._account(time.perf_counter() - start)
            if resp.status_code in _RETRY_STATUS:
                last = f"HTTP {resp.status_code}"
                log.warning("chat request returned %s, attempt %d", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise EndpointError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return self._parse(resp, time.perf_counter() - start)
        raise ScorerError(f"retry budget exhausted: {last}")

    def _account(self, dt):
        with self._lock:
            self.total_latency_s += dt
            self.calls += 1

    @staticmethod
    def _parse(resp, latency):
        try:
            choice = resp.json()["choices"][0]
            content = choice["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ScorerError(f"malformed completion payload: {exc}") from exc
        top = []
        lp = choice.get("logprobs") or {}
        tokens = lp.get("content") or []
        if tokens:
            for item in tokens[0].get("top_logprobs") or []:
                top.append((item.get("token", ""), float(item.get("logprob", -math.inf))))
            if not top and "token" in tokens[0]:
                top.append((tokens[0]["token"], float(tokens[0].get("logprob", 0.0))))
        return ChatReply(content, top, latency)


def yes_probability(reply):
    """Probability of a "yes" answer from a reply.

    Uses first-token log-probabilities when present (renormalised over yes/no
    mass); otherwise falls back to parsing the text as yes/no or a numeric
    self-rating scaled into ``[0, 1]``.
    """
    if reply.top_logprobs:
        p_yes = sum(math.exp(lp) for tok, lp in reply.top_logprobs
                    if tok.strip().lower().strip(".") == "yes")
        p_no = sum(math.exp(lp) for tok, lp in reply.top_logprobs
                   if tok.strip().lower().strip(".") == "no")
        if p_yes + p_no > 0:
            return p_yes / (p_yes + p_no)
    return parse_rating(reply.content)


def parse_rating(text):
    lowered = text.strip().lower()
    if lowered.startswith("yes"):
        return 1.0
    if lowered.startswith("no"):
        return 0.0
    m = _NUMBER.search(lowered)
    if m is None:
        raise ScorerError(f"cannot read a rating from {text[:80]!r}")
    value = float(m.group())
    for scale in (1.0, 10.0, 100.0):
        if 0.0 <= value <= scale:
            return value / scale
    raise ScorerError(f"rating out of range: {value}")
