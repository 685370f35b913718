"""Wire-format parsers. Each returns ``(payload, error)``; exactly one is None.

Parsers are total: any input string yields either a payload or an error
message, never an exception.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional

_ENUM_PREFIX = re.compile(r"^\s*(?:\d+\s*[.):\]](?=\s|$)|\(\d+\)|[-*•](?=\s|$))\s*")
_SCORE = re.compile(r"SCORE\s*[:=]\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)", re.IGNORECASE)
_SECTION = re.compile(r"^\s*(FEEDBACK|QUERIES)\s*:\s*(.*)$", re.IGNORECASE)


@dataclass(frozen=True)
class ReflectVerdict:
    score: float
    feedback: str = ""
    refined_queries: Optional[tuple] = None

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "feedback": self.feedback,
            "refined_queries": list(self.refined_queries) if self.refined_queries is not None else None,
        }


def parse_free_text(raw: str):
    text = (raw or "").strip()
    if not text:
        return None, "empty response"
    return text, None


def _query_lines(text: str, limit: int | None) -> list[str]:
    out = []
    seen = set()
    for line in (text or "").splitlines():
        line = _ENUM_PREFIX.sub("", line, count=1).strip().strip('"').strip("'").strip()
        if not line or line.lower() in seen:
            continue
        seen.add(line.lower())
        out.append(line)
        if limit is not None and len(out) >= limit:
            break
    return out


def parse_query_list(raw: str, limit: int | None = None):
    """One query per line; enumeration prefixes are stripped, duplicates dropped."""
    try:
        queries = _query_lines(raw, limit)
    except Exception as exc:  # defensive: keep the parser total
        return None, f"query list parse error: {exc}"
    if not queries:
        return None, "no queries found"
    return tuple(queries), None


def parse_reflect_verdict(raw: str, limit: int | None = None):
    """``SCORE: <float>`` then ``FEEDBACK:`` block then ``QUERIES:`` block."""
    try:
        text = raw or ""
        m = _SCORE.search(text)
        if not m:
            return None, "missing SCORE line"
        score = float(m.group(1))
        if not math.isfinite(score) or not 0.0 <= score <= 1.0:
            return None, f"score {m.group(1)} outside [0, 1]"
        sections = {"FEEDBACK": [], "QUERIES": []}
        current = None
        for line in text[m.end():].splitlines():
            s = _SECTION.match(line)
            if s:
                current = s.group(1).upper()
                if s.group(2).strip():
                    sections[current].append(s.group(2))
            elif current is not None:
                sections[current].append(line)
        feedback = "\n".join(sections["FEEDBACK"]).strip()
        queries = _query_lines("\n".join(sections["QUERIES"]), limit)
        return ReflectVerdict(score, feedback, tuple(queries) if queries else None), None
    except Exception as exc:
        return None, f"verdict parse error: {exc}"


PARSERS = {
    "free_text": lambda raw, limit=None: parse_free_text(raw),
    "query_list": parse_query_list,
    "reflect_verdict": parse_reflect_verdict,
}
