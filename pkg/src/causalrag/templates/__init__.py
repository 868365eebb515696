"""Built-in prompt templates and their file-based overrides."""

from __future__ import annotations

from importlib import resources

from ..errors import ValidationError

NO_EVIDENCE_MARKER = "[no graph evidence found]"


def load_template(name: str, override_path: str | None = None) -> str:
    """Read a prompt template, preferring an override file when given."""
    if override_path:
        with open(override_path, encoding="utf-8") as fh:
            return fh.read()
    try:
        return resources.files(__name__).joinpath(name).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValidationError(f"unknown built-in template {name!r}") from None


def fill_template(template: str, **values: str) -> str:
    """Substitute {name} placeholders literally (stray braces stay untouched)."""
    text = template
    for key, value in values.items():
        text = text.replace("{" + key + "}", value)
    return text
