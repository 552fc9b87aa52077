"""Chat-completion transport plus score parsing and verdict resolution."""
from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass
from typing import Sequence

import httpx

from ..errors import NetworkError, RateLimited, Timeout, UnparseableResponse
from .statements import Backend, PriceChangeVerdict, PriceDirection, PriceStatement, ScoredStatement

log = logging.getLogger(__name__)

LLM_KEY_ENV = "PRICESCOPE_LLM_KEY"
MAX_RETRIES = 3


@dataclass(frozen=True)
class InferenceBackendConfig:
    kind: str = "analytic"  # analytic | llm-type1 | llm-type2 | auto
    endpoint: str | None = None
    model: str = "gpt-4o"
    temperature: float = 0
    top_p: float = 1
    max_concurrent: int = 4
    timeout_secs: float = 60
    api_key: str | None = None
    backoff_secs: float = 0.5

    def __post_init__(self):
        if self.temperature != 0 or self.top_p != 1:
            raise ValueError("inference runs with temperature 0 and top_p 1")
        if self.kind not in ("analytic", "llm-type1", "llm-type2", "auto"):
            raise ValueError(f"unknown backend {self.kind!r}")

    @property
    def uses_llm(self) -> bool:
        return self.kind != "analytic"


def query_backend(
    cfg: InferenceBackendConfig,
    prompt: str,
    *,
    timeout: float | None = None,
    transport: httpx.BaseTransport | None = None,
) -> str:
    if not cfg.endpoint:
        raise NetworkError("no LLM endpoint configured")
    key = cfg.api_key or os.environ.get(LLM_KEY_ENV)
    headers = {"Authorization": f"Bearer {key}"} if key else {}
    body = {
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": cfg.temperature,
        "top_p": cfg.top_p,
    }
    timeout = cfg.timeout_secs if timeout is None else min(timeout, cfg.timeout_secs)
    last: Exception | None = None
    with httpx.Client(timeout=timeout, transport=transport) as client:
        for attempt in range(MAX_RETRIES + 1):
            if attempt:
                time.sleep(cfg.backoff_secs * 2 ** (attempt - 1))
            try:
                resp = client.post(cfg.endpoint, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = Timeout(f"LLM request timed out after {timeout}s")
                last.__cause__ = exc
                continue
            except httpx.TransportError as exc:
                last = NetworkError(f"LLM transport error: {exc}")
                last.__cause__ = exc
                continue
            if resp.status_code == 429:
                last = RateLimited("LLM endpoint rate limited the request")
                continue
            if resp.status_code >= 500:
                last = NetworkError(f"LLM endpoint returned {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise NetworkError(f"LLM endpoint returned {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise NetworkError(f"malformed completion payload: {exc}") from exc
    assert last is not None
    raise last


_LABEL = re.compile(r"statement[\s_#-]*(\d+)", re.IGNORECASE)
_SCORE_WORD = re.compile(r"score\D{0,12}?(-?\d+)", re.IGNORECASE)
_LEADING_INT = re.compile(r"^\W{0,6}?(-?\d+)\b")


def _scores_from_json(response: str) -> dict[int, int] | None:
    text = response.strip()
    if text.startswith("```"):
        text = text.strip("`")
        text = text[text.find("\n") + 1 :] if "\n" in text else text
    try:
        doc = json.loads(text)
    except ValueError:
        return None
    if isinstance(doc, dict) and "scores" in doc:
        doc = doc["scores"]
    if isinstance(doc, list):
        return {i: int(v) for i, v in enumerate(doc, start=1) if isinstance(v, (int, float))}
    if isinstance(doc, dict):
        out = {}
        for k, v in doc.items():
            m = _LABEL.search(str(k)) or re.fullmatch(r"\s*(\d+)\s*", str(k))
            if m and isinstance(v, (int, float)):
                out[int(m.group(1))] = int(v)
        return out
    return None


def _scores_from_text(response: str) -> dict[int, int]:
    marks = list(_LABEL.finditer(response))
    found: dict[int, int] = {}
    for pos, m in enumerate(marks):
        end = marks[pos + 1].start() if pos + 1 < len(marks) else len(response)
        section = response[m.end() : end]
        hit = _SCORE_WORD.search(section) or _LEADING_INT.search(section)
        if hit:
            # a later mention of the same label overrides an earlier restatement
            found[int(m.group(1))] = int(hit.group(1))
    return found


def parse_scores(
    response: str, statements: Sequence[PriceStatement], warnings: list[str] | None = None
) -> list[ScoredStatement]:
    """Pull one integer score per numbered statement out of a free-text or JSON answer."""
    found = _scores_from_json(response)
    if not found:
        found = _scores_from_text(response)
    missing = [i for i in range(1, len(statements) + 1) if i not in found]
    if missing:
        raise UnparseableResponse(f"no score for statement(s) {missing}")
    out = []
    for i, statement in enumerate(statements, start=1):
        raw = found[i]
        score = min(10, max(1, raw))
        if score != raw:
            msg = f"score {raw} for statement {i} clamped to {score}"
            log.warning(msg)
            if warnings is not None:
                warnings.append(msg)
        out.append(ScoredStatement(statement, score))
    return out


def resolve_verdicts(
    scored: Sequence[ScoredStatement],
    backend: Backend = Backend.LLM_TYPE1,
    **anchor,
) -> list[PriceChangeVerdict]:
    """Keep the strictly higher-scored direction of each opposing pair; ties are dropped."""
    pairs: dict[tuple, dict[PriceDirection, int]] = {}
    for item in scored:
        key = (item.statement.token, item.statement.contract)
        pairs.setdefault(key, {})[item.statement.direction] = item.score
    out = []
    for (token, contract), scores in pairs.items():
        up = scores.get(PriceDirection.INCREASE)
        down = scores.get(PriceDirection.DECREASE)
        if up is None or down is None or up == down:
            continue
        direction = PriceDirection.INCREASE if up > down else PriceDirection.DECREASE
        out.append(PriceChangeVerdict(token, contract, direction, max(up, down), backend, **anchor))
    return out
