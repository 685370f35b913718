from __future__ import annotations

import logging
import random
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..errors import DimensionMismatchError, GatewayError, TransportError
from .parsing import PARSERS
from .templates import load_templates

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenerationRequest:
    template: str
    bindings: dict
    prompt: str
    max_tokens: int = 512


@dataclass
class GenerationResponse:
    raw_text: str
    parsed: Any = None
    parse_error: Optional[str] = None
    usage: dict = field(default_factory=dict)
    attempts: int = 1

    @property
    def ok(self) -> bool:
        return self.parse_error is None


class Gateway:
    """Single entry point for text generation and embedding.

    Transport errors and rate limits are retried ``max_attempts`` times with
    exponential backoff and full jitter. A response that never parses is
    returned with ``parse_error`` set and the raw text retained; the caller
    picks the fallback. At most ``max_in_flight`` backend calls run at once.
    """

    def __init__(self, backend, templates=None, *, max_attempts: int = 3, backoff: float = 0.5,
                 max_in_flight: int = 4, dimension: int | None = None, sleep=time.sleep):
        self.backend = backend
        self.templates = templates or load_templates()
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.dimension = dimension
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self._jitter = random.Random(0)
        self.stats = Counter()

    def _count(self, **deltas):
        with self._lock:
            self.stats.update(deltas)

    def _call(self, fn, *args):
        last = None
        for attempt in range(self.max_attempts):
            try:
                with self._slots:
                    return fn(*args)
            except TransportError as exc:
                last = exc
                self._count(transport_errors=1)
                if attempt + 1 < self.max_attempts:
                    with self._lock:
                        delay = self._jitter.uniform(0, self.backoff * 2 ** attempt)
                    log.debug("retrying after %s (%.2fs)", exc, delay)
                    self._sleep(delay)
        raise GatewayError(f"backend call failed after {self.max_attempts} attempts: {last}") from last

    def generate(self, template: str, bindings: dict, *, max_tokens: int = 512,
                 limit: int | None = None) -> GenerationResponse:
        tmpl = self.templates[template]
        prompt = tmpl.render(bindings)
        request = GenerationRequest(template, dict(bindings), prompt, max_tokens)
        parser = PARSERS[tmpl.output_schema]
        response = None
        for attempt in range(1, self.max_attempts + 1):
            raw, usage = self._call(self.backend.complete, request)
            self._count(generate_calls=1, **{f"generate_{template}": 1},
                        prompt_tokens=int(usage.get("prompt_tokens", 0)),
                        completion_tokens=int(usage.get("completion_tokens", 0)))
            payload, error = parser(raw, limit)
            response = GenerationResponse(raw, payload, error, usage, attempt)
            if error is None:
                return response
            self._count(parse_failures=1)
        log.warning("template %s: unparsable response after %d attempts: %s",
                    template, self.max_attempts, response.parse_error)
        return response

    def embed(self, texts: list[str]) -> np.ndarray:
        """Embed ``texts`` into an ``(n, dim)`` array of unit rows."""
        texts = list(texts)
        if not texts or any(not isinstance(t, str) or not t.strip() for t in texts):
            raise ValueError("embed needs a non-empty list of non-empty texts")
        vectors = self._call(self.backend.embed, texts)
        self._count(embed_calls=1, embedded_texts=len(texts))
        matrix = np.vstack([np.asarray(v, dtype=np.float64) for v in vectors])
        if self.dimension is not None and matrix.shape[1] != self.dimension:
            raise DimensionMismatchError(
                f"backend returned dimension {matrix.shape[1]}, index expects {self.dimension}")
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0) or not np.all(np.isfinite(norms)):
            raise GatewayError("backend returned a zero or non-finite embedding")
        return matrix / norms
