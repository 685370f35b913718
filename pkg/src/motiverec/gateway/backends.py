"""Generation/embedding backends: a deterministic offline mock and an HTTP JSON client."""

from __future__ import annotations

import hashlib
import math
import os
from collections import Counter

import httpx
import numpy as np

from ..errors import GatewayError, RateLimitError, TransportError
from .text import STOPWORDS, salient_tokens, strip_field_keys, surface_tokens, tokens


def _join_phrase(words: list[str]) -> str:
    if len(words) == 1:
        return words[0]
    return ", ".join(words[:-1]) + " and " + words[-1]


def _distinct_surface(text: str, skip_digits: bool = True) -> list[str]:
    seen = {}
    for tok in surface_tokens(text):
        low = tok.lower()
        if low in STOPWORDS or (skip_digits and low.isdigit()):
            continue
        seen.setdefault(low, tok)
    return list(seen.values())


class MockBackend:
    """Deterministic stand-in for an LLM and an embedding model.

    Generation rules, by template:

    * ``item``: the title followed by the distinct tokens of the other
      metadata values.
    * ``annotate``: the ``motive_tokens`` tokens shared by the most items of
      the bundle; with nothing shared, the most frequent token overall.
    * ``query``: each motive truncated to ``query_tokens`` words, up to ``n``.
    * ``reflect``: score is the mean, over candidates, of the best fraction of
      any query's or motive's tokens that the candidate covers. Refined
      queries append the highest-IDF motive token that no candidate covers.

    Embeddings are hashed bags of tokens, L2-normalized. Texts with disjoint
    token buckets are orthogonal.
    """

    name = "mock"

    def __init__(self, dimension: int = 256, seed: int = 0, motive_tokens: int = 3, query_tokens: int = 8):
        self.dimension = dimension
        self.seed = seed
        self.motive_tokens = motive_tokens
        self.query_tokens = query_tokens

    # -- generation ---------------------------------------------------------
    def complete(self, request) -> tuple[str, dict]:
        handler = getattr(self, f"_{request.template}", None)
        if handler is None:
            raise GatewayError(f"mock backend has no rule for template {request.template!r}")
        text = handler(request.bindings)
        usage = {"prompt_tokens": len(request.prompt.split()), "completion_tokens": len(text.split())}
        return text, usage

    def _item(self, b) -> str:
        metadata = dict(b["metadata"])
        title = metadata.pop("title", "").strip()
        words = {}
        for key in sorted(metadata):
            for w in _distinct_surface(metadata[key]):
                words.setdefault(w.lower(), w)
        words = list(words.values())
        head = title or "Untitled"
        if not words:
            return f"{head}: a notable item."
        return f"{head}: appeals to fans of {_join_phrase(words)}."

    def _annotate(self, b) -> str:
        texts = [strip_field_keys(t) for t in b["bundle"]]
        doc_freq, total, surface = Counter(), Counter(), {}
        for t in texts:
            present = _distinct_surface(t)
            for tok in present:
                doc_freq[tok.lower()] += 1
            for tok in surface_tokens(t):
                low = tok.lower()
                if low in STOPWORDS or low.isdigit():
                    continue
                total[low] += 1
                surface.setdefault(low, tok)
        need = 2 if len(texts) > 1 else 1
        shared = sorted((t for t, c in doc_freq.items() if c >= need), key=lambda t: (-doc_freq[t], t))
        picked = shared[: self.motive_tokens]
        if not picked:
            if not total:
                return "Prefers varied picks."
            picked = [min(total, key=lambda t: (-total[t], t))]
        return f"Prefers {_join_phrase([surface[t] for t in picked])}."

    def _query(self, b) -> str:
        n = int(b.get("n", 4))
        lines = []
        for motive in b.get("motives") or []:
            words = str(motive).rstrip(".").split()
            q = " ".join(words[: self.query_tokens])
            if q and q not in lines:
                lines.append(q)
            if len(lines) >= n:
                break
        if not lines and b.get("query"):
            lines.append(str(b["query"]))
        return "\n".join(f"{i}. {q}" for i, q in enumerate(lines, 1))

    def _reflect(self, b) -> str:
        queries = [str(q) for q in b.get("queries") or []]
        motives = [str(m) for m in b.get("motives") or []]
        candidates = [str(c) for c in b.get("candidates") or []]
        targets = [ts for ts in (set(salient_tokens(t)) for t in queries + motives) if ts]
        if b.get("query"):
            q_tokens = set(salient_tokens(str(b["query"])))
            if q_tokens:
                targets.append(q_tokens)
        cand_tokens = [set(tokens(c)) for c in candidates]
        if not cand_tokens or not targets:
            score = 0.0
        else:
            score = sum(max(len(c & t) / len(t) for t in targets) for c in cand_tokens) / len(cand_tokens)
        score = round(score, 4)
        covered = set().union(*cand_tokens) if cand_tokens else set()
        motive_sets = [set(salient_tokens(m)) for m in motives]
        uncovered = sorted({t for s in motive_sets for t in s} - covered)

        def idf(tok):
            df = sum(1 for s in motive_sets if tok in s)
            return math.log((1 + len(motive_sets)) / (1 + df))

        ranked = sorted(uncovered, key=lambda t: (-idf(t), t))
        if score >= 1.0:
            refined = list(queries)
        else:
            refined = []
            for q in queries:
                have = set(tokens(q))
                extra = next((t for t in ranked if t not in have), None)
                refined.append(f"{q} {extra}" if extra else q)
        if score >= 1.0:
            feedback = "All candidates match the request."
        elif ranked:
            feedback = f"Candidates miss motive aspect '{ranked[0]}'."
        else:
            feedback = "Candidates only partially match; no uncovered motive aspect."
        body = "\n".join(f"{i}. {q}" for i, q in enumerate(refined, 1))
        return f"SCORE: {score:.4f}\nFEEDBACK:\n{feedback}\nQUERIES:\n{body}"

    # -- embedding ----------------------------------------------------------
    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, salt=str(self.seed).encode()[:16]).digest()
        return int.from_bytes(digest, "little") % self.dimension

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            toks = tokens(text) or [s.lower() for s in surface_tokens(text)] or [text.strip().lower()]
            vec = np.zeros(self.dimension)
            for tok in toks:
                vec[self._bucket(tok)] += 1.0
            out.append(vec / np.linalg.norm(vec))
        return out


class HttpBackend:
    """Chat-completions style JSON client.

    ``POST {base_url}/chat/completions`` with ``{model, messages, max_tokens}``;
    the reply is read from ``choices[0].message.content``. Embeddings use
    ``POST {base_url}/embeddings`` with ``{model, input}`` and read
    ``data[*].embedding`` ordered by ``index``.
    """

    name = "http"

    def __init__(self, base_url: str, api_key: str | None = None, chat_model: str = "default",
                 embed_model: str = "default", timeout: float = 60.0, client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self.chat_model = chat_model
        self.embed_model = embed_model
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.client = client or httpx.Client(timeout=timeout)
        self.headers = headers

    @classmethod
    def from_env(cls, **overrides) -> "HttpBackend":
        """Build from ``MOTIVEREC_API_BASE``, ``MOTIVEREC_API_KEY``,
        ``MOTIVEREC_CHAT_MODEL`` and ``MOTIVEREC_EMBED_MODEL``."""
        base = overrides.pop("base_url", None) or os.environ.get("MOTIVEREC_API_BASE")
        if not base:
            raise GatewayError("MOTIVEREC_API_BASE is not set")
        return cls(
            base,
            api_key=overrides.pop("api_key", None) or os.environ.get("MOTIVEREC_API_KEY"),
            chat_model=overrides.pop("chat_model", None) or os.environ.get("MOTIVEREC_CHAT_MODEL", "default"),
            embed_model=overrides.pop("embed_model", None) or os.environ.get("MOTIVEREC_EMBED_MODEL", "default"),
            **overrides,
        )

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self.client.post(f"{self.base_url}{path}", json=payload, headers=self.headers)
        except httpx.TransportError as exc:
            raise TransportError(f"{path}: {exc}") from exc
        if resp.status_code == 429:
            raise RateLimitError(f"{path}: rate limited")
        if resp.status_code >= 500:
            raise TransportError(f"{path}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise GatewayError(f"{path}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise TransportError(f"{path}: invalid JSON body") from exc

    def complete(self, request) -> tuple[str, dict]:
        data = self._post("/chat/completions", {
            "model": self.chat_model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
        })
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError("chat response without choices[0].message.content") from exc
        return content or "", dict(data.get("usage") or {})

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        data = self._post("/embeddings", {"model": self.embed_model, "input": list(texts)})
        try:
            rows = sorted(data["data"], key=lambda r: r.get("index", 0))
            vectors = [np.asarray(r["embedding"], dtype=np.float64) for r in rows]
        except (KeyError, TypeError) as exc:
            raise TransportError("embedding response without data[*].embedding") from exc
        if len(vectors) != len(texts):
            raise TransportError(f"expected {len(texts)} embeddings, got {len(vectors)}")
        return vectors
