"""Prompt manifest handling: JSON {"template": ..., "aspects": [...]} where
the template holds exactly one bracketed placeholder."""

from __future__ import annotations

import json
import re
from pathlib import Path

_PLACEHOLDER = re.compile(r"\[[^\[\]]+\]")


class ManifestError(ValueError):
    pass


def load_manifest(path) -> tuple[str, list[str]]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        template = doc["template"]
        aspects = [str(a) for a in doc["aspects"]]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ManifestError(f"unreadable manifest {path}: {exc}") from exc
    validate(template, aspects)
    return template, aspects


def validate(template: str, aspects: list[str]) -> None:
    holes = len(_PLACEHOLDER.findall(template))
    if holes != 1:
        raise ManifestError(
            f"template must contain exactly one [placeholder], found {holes}"
        )
    if not aspects:
        raise ManifestError("aspect list is empty")
    if len(set(aspects)) != len(aspects):
        raise ManifestError("aspects must be distinct")


def render(template: str, aspects: list[str]) -> list[str]:
    validate(template, aspects)
    return [_PLACEHOLDER.sub(lambda _: a, template) for a in aspects]
