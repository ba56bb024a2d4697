"""Bundled word lists and phrase tables.

Every list is a plain-text file, one entry per line, so deployments can
override them with their own files without code changes.
"""

from __future__ import annotations

from importlib import resources


def read_resource_lines(name: str) -> list[str]:
    """Read a bundled list file, skipping blanks and '#' comments."""
    text = resources.files(__package__).joinpath(name).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines()
            if line.strip() and not line.lstrip().startswith("#")]
