"""Flat key/value documents with repeated group sections.

The on-disk format used by template manifests, verdict tables and fixture
annotations::

    top_key = value

    [group]
    key = value

    [group]
    key = other value

Lines starting with ``#`` are comments.  Group names may repeat; groups are
kept in file order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class KvDoc:
    top: dict[str, str] = field(default_factory=dict)
    groups: list[tuple[str, dict[str, str]]] = field(default_factory=list)

    def sections(self, name: str) -> list[dict[str, str]]:
        return [body for group, body in self.groups if group == name]


def parse_kv(text: str) -> KvDoc:
    doc = KvDoc()
    current: dict[str, str] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = {}
            doc.groups.append((line[1:-1].strip(), current))
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        target = doc.top if current is None else current
        target[key.strip()] = value.strip()
    return doc


def load_kv(path: str | Path) -> KvDoc:
    return parse_kv(Path(path).read_text(encoding="utf-8"))


def as_list(value: str) -> list[str]:
    """Split a comma-separated value, dropping empty items."""
    return [item.strip() for item in value.split(",") if item.strip()]


def as_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")
