"""Prompt templates for the four generation steps.

Shipped templates live in ``templates/*.txt`` next to this module; they are
plain text with ``{placeholder}`` fields and may be replaced by pointing
:func:`load_templates` at another directory.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from ..types import serialize_metadata

OUTPUT_SCHEMAS = {
    "item": "free_text",
    "annotate": "free_text",
    "query": "query_list",
    "reflect": "reflect_verdict",
}


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    template_text: str
    output_schema: str

    @property
    def placeholders(self) -> set[str]:
        return {f for _, f, _, _ in string.Formatter().parse(self.template_text) if f}

    def render(self, bindings: Mapping[str, Any]) -> str:
        missing = self.placeholders - set(bindings)
        if missing:
            raise KeyError(f"template {self.name!r}: unbound placeholder(s) {sorted(missing)}")
        return self.template_text.format_map({k: render_value(v) for k, v in bindings.items()})


def render_value(value) -> str:
    if value is None:
        return "(none)"
    if isinstance(value, Mapping):
        return serialize_metadata({str(k): str(v) for k, v in value.items()}) or "(none)"
    if isinstance(value, (list, tuple)):
        if not value:
            return "(none)"
        return "\n".join(f"{i}. {render_value(v)}" for i, v in enumerate(value, 1))
    return str(value)


def load_templates(directory: str | Path | None = None) -> dict[str, PromptTemplate]:
    """Load ``item``, ``annotate``, ``query`` and ``reflect`` templates.

    Files missing from ``directory`` fall back to the shipped versions, so a
    directory can override a single prompt.
    """
    shipped = resources.files("motiverec.gateway") / "templates"
    out = {}
    for name, schema in OUTPUT_SCHEMAS.items():
        text = None
        if directory is not None:
            candidate = Path(directory) / f"{name}.txt"
            if candidate.exists():
                text = candidate.read_text(encoding="utf-8")
        if text is None:
            text = (shipped / f"{name}.txt").read_text(encoding="utf-8")
        out[name] = PromptTemplate(name, text, schema)
    return out
