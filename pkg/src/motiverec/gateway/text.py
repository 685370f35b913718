"""Tokenization shared by the mock backend and the fidelity guard."""

from __future__ import annotations

import re

_TOKEN = re.compile(r"[A-Za-z0-9]+(?:['-][A-Za-z0-9]+)*")
_KEY_PREFIX = re.compile(r"^\s*[A-Za-z_][\w -]{0,40}:\s+")

STOPWORDS = frozenset("""
a an and are as at be but by for from has have in into is it its of on or over
so such than that the their them these this those to too very was were which
while who with within without not no
about after before during through under up down out off again
i me my we our you your he she they his her
prefers prefer preference appeals appeal fans fan notable item items
""".split())


def surface_tokens(text: str) -> list[str]:
    """Tokens with their original casing, in order of appearance."""
    return _TOKEN.findall(text or "")


def tokens(text: str) -> list[str]:
    """Lowercased content tokens (stopwords removed), in order."""
    return [t for t in (s.lower() for s in surface_tokens(text)) if t not in STOPWORDS]


def token_set(text: str) -> set[str]:
    return set(tokens(text))


def strip_field_keys(text: str) -> str:
    """Drop leading ``key:`` labels from every line of a metadata block."""
    return "\n".join(_KEY_PREFIX.sub("", line) for line in (text or "").splitlines())


def salient_tokens(text: str) -> list[str]:
    """Distinct content tokens of ``text``; falls back to all tokens if only stopwords."""
    out = list(dict.fromkeys(tokens(text)))
    if not out:
        out = list(dict.fromkeys(s.lower() for s in surface_tokens(text)))
    return out


def contains_all(haystack: str, needles) -> bool:
    have = {s.lower() for s in surface_tokens(haystack)}
    return all(n in have for n in needles)
