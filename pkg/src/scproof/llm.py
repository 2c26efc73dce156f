"""OpenAI-compatible chat-completion client with a fully offline stub mode.

``complete`` speaks HTTP to any /chat/completions endpoint with bounded
retries; ``complete_offline`` answers from canned reply files keyed by
(defect kind, contract name).  ``normalize_runner_output`` is the fallback
that turns unstructured backend logs into per-test outcomes when the
structured parsers give up.

offline_stub and disabled modes perform zero network operations by
construction: no transport object is ever built for them.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    AuthFailed,
    MalformedResponse,
    NoStubForKey,
    RateLimited,
    RequestTimeout,
    TransportError,
    UnparseableNormalization,
)

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 3
_BACKOFF_SECONDS = (0.5, 1.0)

# concurrent in-flight requests are capped; retries of one logical call never overlap
_INFLIGHT = threading.BoundedSemaphore(2)

_VALID_STATUSES = ("pass", "fail", "error")


@dataclass
class LlmConfig:
    endpoint_url: str = ""
    model_id: str = ""
    api_key_env_name: str = "SCPROOF_API_KEY"
    temperature: float = 0.0
    max_output_tokens: int = 4096
    request_timeout: float = 60.0
    mode: str = "disabled"  # live | offline_stub | disabled

    def to_dict(self) -> dict:
        return {
            "endpoint_url": self.endpoint_url,
            "model_id": self.model_id,
            "api_key_env_name": self.api_key_env_name,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "request_timeout": self.request_timeout,
            "mode": self.mode,
        }


@dataclass
class PromptBundle:
    system: str
    user: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.system or not self.user:
            raise ValueError("system and user prompts must be non-empty")


def _requests_transport(url: str, headers: dict, payload: dict, timeout: float):
    import requests

    try:
        response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.Timeout as exc:
        raise RequestTimeout(str(exc))
    except requests.RequestException as exc:
        raise TransportError(str(exc))
    try:
        body = response.json()
    except ValueError:
        body = None
    return response.status_code, body


def complete(cfg: LlmConfig, bundle: PromptBundle, transport=None) -> str:
    """One chat completion; returns the first choice's message content.

    ``transport`` is injectable for tests: (url, headers, payload, timeout) ->
    (status_code, parsed_json).
    """
    if cfg.mode != "live":
        raise AuthFailed(f"complete() requires live mode, config says {cfg.mode!r}")
    api_key = os.environ.get(cfg.api_key_env_name, "")
    if not api_key:
        raise AuthFailed(f"environment variable {cfg.api_key_env_name} is not set")
    transport = transport or _requests_transport
    url = cfg.endpoint_url.rstrip("/") + "/chat/completions"
    payload = {
        "model": cfg.model_id,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_output_tokens,
        "messages": [
            {"role": "system", "content": bundle.system},
            {"role": "user", "content": bundle.user},
        ],
    }
    headers = {"Authorization": "Bearer " + api_key}
    logger.info(
        "llm request %s model=%s meta=%s payload_bytes=%d auth=Bearer <redacted>",
        url,
        cfg.model_id,
        bundle.metadata,
        len(json.dumps(payload)),
    )

    last_error: Exception = TransportError("no attempt made")
    with _INFLIGHT:
        for attempt in range(MAX_ATTEMPTS):
            try:
                status, body = transport(url, headers, payload, cfg.request_timeout)
            except (TransportError, RequestTimeout) as exc:
                last_error = exc
                logger.warning("llm transport attempt %d failed: %s", attempt + 1, exc)
                _sleep_backoff(attempt)
                continue
            if status in (401, 403):
                raise AuthFailed(f"endpoint returned HTTP {status}")
            if status == 429:
                last_error = RateLimited("endpoint returned HTTP 429")
                logger.warning("llm rate limited (attempt %d)", attempt + 1)
                _sleep_backoff(attempt)
                continue
            if status != 200:
                raise TransportError(f"endpoint returned HTTP {status}")
            content = _extract_content(body)
            logger.info("llm response %d bytes", len(content))
            return content
    raise last_error


def _sleep_backoff(attempt: int) -> None:
    if attempt < MAX_ATTEMPTS - 1:
        time.sleep(_BACKOFF_SECONDS[min(attempt, len(_BACKOFF_SECONDS) - 1)])


def _extract_content(body) -> str:
    try:
        content = body["choices"][0]["message"]["content"]
    except (TypeError, KeyError, IndexError):
        raise MalformedResponse(f"missing choices[0].message.content in {_clip(body)}")
    if not isinstance(content, str):
        raise MalformedResponse("message content is not a string")
    return content


def _clip(body) -> str:
    text = json.dumps(body) if body is not None else "<non-JSON body>"
    return text[:200]


# --- offline stubs -----------------------------------------------------------


def stub_file_name(defect_kind: str, contract: str) -> str:
    return f"{defect_kind}__{contract}.reply.txt"


def complete_offline(bundle: PromptBundle, stub_dir: str | Path) -> str:
    """Canned reply keyed by (defect kind, contract name) from the bundle metadata."""
    kind = bundle.metadata.get("defect_kind", "")
    contract = bundle.metadata.get("contract", "")
    path = Path(stub_dir) / stub_file_name(kind, contract)
    if not path.is_file():
        raise NoStubForKey((kind, contract))
    return path.read_text(encoding="utf-8")


# --- runner-output normalization ----------------------------------------------


def normalize_runner_output(
    cfg: LlmConfig, raw_log: str, transport=None
) -> dict[str, str]:
    """LLM fallback for unparseable runner logs: one '<method> <status>' per line.

    Methods the reply mentions that never appear in the log are dropped (the
    model must not invent outcomes).
    """
    if not raw_log.strip():
        raise UnparseableNormalization("empty runner log")
    bundle = PromptBundle(
        system=(
            "You convert test runner logs into structured outcomes. Reply with "
            "one line per test method, formatted exactly as '<method> <status>' "
            "where status is pass, fail or error. No other text."
        ),
        user="Runner log:\n```\n" + raw_log + "\n```",
        metadata={"purpose": "normalize"},
    )
    reply = complete(cfg, bundle, transport=transport)
    outcomes: dict[str, str] = {}
    for line in reply.strip().splitlines():
        parts = line.split()
        if len(parts) != 2 or parts[1].lower() not in _VALID_STATUSES:
            raise UnparseableNormalization(f"bad line in normalization reply: {line!r}")
        method, status = parts[0], parts[1].lower()
        if method in raw_log:
            outcomes[method] = status
    if not outcomes:
        raise UnparseableNormalization("normalization reply mentioned no known methods")
    return outcomes
