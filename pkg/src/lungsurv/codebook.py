"""Code book: the explicit code -> canonical-value table for categorical fields.

The code book is plain data (lines ``field_name code canonical_value``)
so that codification is a deterministic table lookup and the table
itself can be inspected, versioned and tested like any other fixture.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources


class CodebookError(ValueError):
    pass


@dataclass(frozen=True)
class Codebook:
    tables: dict[str, dict[str, str]]
    inverse: dict[str, dict[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        inv: dict[str, dict[str, str]] = {}
        for fname, table in self.tables.items():
            rev: dict[str, str] = {}
            for code, value in table.items():
                if value in rev:
                    raise CodebookError(
                        f"field {fname}: value {value!r} has two codes "
                        f"({rev[value]!r} and {code!r})"
                    )
                rev[value] = code
            inv[fname] = rev
        object.__setattr__(self, "inverse", inv)

    def fields(self) -> tuple[str, ...]:
        return tuple(self.tables)

    def decode(self, field_name: str, code: str) -> str:
        """Canonical value for a code; KeyError when undeclared."""
        return self.tables[field_name][code]

    def encode(self, field_name: str, value: str) -> str:
        return self.inverse[field_name][value]

    def values(self, field_name: str) -> tuple[str, ...]:
        return tuple(self.tables[field_name].values())


def parse_codebook(document: str) -> Codebook:
    tables: dict[str, dict[str, str]] = {}
    for lineno, raw_line in enumerate(document.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise CodebookError(
                f"line {lineno}: expected 'field code value', got {line!r}"
            )
        fname, code, value = parts
        table = tables.setdefault(fname, {})
        if code in table:
            raise CodebookError(f"line {lineno}: duplicate code {code!r} for {fname}")
        table[code] = value
    return Codebook(tables)


def load_codebook(path) -> Codebook:
    with open(path, "r", encoding="ascii") as fh:
        return parse_codebook(fh.read())


def shipped_schema_text() -> str:
    return resources.files("lungsurv.fixtures").joinpath("lung.schema").read_text()


def shipped_codebook_text() -> str:
    return resources.files("lungsurv.fixtures").joinpath("lung.codebook").read_text()


def shipped_codebook() -> Codebook:
    return parse_codebook(shipped_codebook_text())
