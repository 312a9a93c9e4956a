"""Coverage registry: formula -> operation -> test, rendered to markdown.

The registry is ``data/coverage.json``.  :func:`check_registry` raises
:class:`MissingEntry` when a required key is missing or duplicated, a covered
entry names an operation that does not import, or its test function is absent
from the tests directory.
"""
from __future__ import annotations

import importlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import MissingEntry

STATUSES = ("covered", "out-of-scope")


@dataclass(frozen=True)
class CoverageEntry:
    key: str
    location: str
    label: str
    formula: str
    operation: str
    test: str
    status: str


def load_registry(path: Optional[Path] = None) -> tuple[list[str], list[CoverageEntry]]:
    if path is None:
        text = resources.files("chaoskit").joinpath("data/coverage.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    return list(raw["required"]), [CoverageEntry(**e) for e in raw["entries"]]


def resolve_operation(dotted: str):
    parts = dotted.split(".")
    for cut in range(len(parts), 0, -1):
        try:
            obj = importlib.import_module(".".join(parts[:cut]))
        except ImportError:
            continue
        for attr in parts[cut:]:
            obj = getattr(obj, attr)
        return obj
    raise ImportError(dotted)


def _test_exists(tests_root: Path, test: str) -> bool:
    file, _, name = test.partition("::")
    path = tests_root.parent / file
    if not path.is_file():
        return False
    return re.search(rf"^\s*def {re.escape(name)}\(", path.read_text(), re.M) is not None


def check_registry(required: list[str], entries: list[CoverageEntry], tests_root: Optional[Path] = None) -> None:
    keys = [e.key for e in entries]
    dupes = sorted({k for k in keys if keys.count(k) > 1})
    if dupes:
        raise MissingEntry(f"duplicate registry keys: {dupes}")
    missing = [k for k in required if k not in keys]
    if missing:
        raise MissingEntry(f"no registry entry for: {missing}")
    for e in entries:
        if e.status not in STATUSES:
            raise MissingEntry(f"{e.key}: unknown status {e.status!r}")
        if e.status != "covered":
            continue
        if not e.operation or not e.test:
            raise MissingEntry(f"{e.key}: covered entry needs an operation and a test")
        try:
            resolve_operation(e.operation)
        except (ImportError, AttributeError) as exc:
            raise MissingEntry(f"{e.key}: operation {e.operation} does not resolve") from exc
        if tests_root is not None and not _test_exists(tests_root, e.test):
            raise MissingEntry(f"{e.key}: test {e.test} not found")


def render_markdown(entries: list[CoverageEntry]) -> str:
    lines = [
        "# Coverage",
        "",
        "Generated by `chaoskit coverage`; edit `src/chaoskit/data/coverage.json` instead.",
        "",
        "| Location | Label | Formula | Operation | Test | Status |",
        "|---|---|---|---|---|---|",
    ]
    for e in entries:
        cells = [e.location, e.label, f"`{e.formula}`", f"`{e.operation}`" if e.operation else "",
                 f"`{e.test}`" if e.test else "", e.status]
        lines.append("| " + " | ".join(c.replace("|", "\\|") for c in cells) + " |")
    return "\n".join(lines) + "\n"


def emit_coverage(out: Optional[Path] = None, tests_root: Optional[Path] = None,
                  registry: Optional[Path] = None) -> str:
    """Validate the registry and return (and optionally write) the markdown table."""
    required, entries = load_registry(registry)
    check_registry(required, entries, tests_root)
    text = render_markdown(entries)
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    return text
