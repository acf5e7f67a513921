"""Schema-driven fixed-width record parsing.

A schema file is line-oriented text: ``#`` starts a comment, a required
header line ``record_length N`` gives the line width, an optional
``version TAG`` line names the layout, and each field line reads

    name offset width kind [sentinel,sentinel,...]

separated by single spaces. ``kind`` is one of ``categorical``,
``ordinal-integer`` or ``code``. Sentinels are matched against the
whitespace-stripped field slice; the special token ``<blank>`` matches
an all-space slice. Data files carry one ASCII record per line; content
beyond ``record_length`` is ignored so padded extracts parse cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

FIELD_KINDS = ("categorical", "ordinal-integer", "code")

BLANK_SENTINEL = "<blank>"

#: canonical in-memory marker for a missing raw value (phase 1 rewrites
#: every declared sentinel to this)
MISSING_RAW = ""


class SchemaError(ValueError):
    """Raised for malformed schema documents."""


class ShortLineError(ValueError):
    """Raised when a data line is shorter than the schema record length."""

    def __init__(self, message: str, line_number: int = 0):
        super().__init__(message)
        self.line_number = line_number


@dataclass(frozen=True)
class FieldSpec:
    name: str
    offset: int
    width: int
    kind: str
    missing_sentinels: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.width < 1:
            raise SchemaError(f"field {self.name}: width must be >= 1")
        if self.offset < 0:
            raise SchemaError(f"field {self.name}: offset must be >= 0")
        if self.kind not in FIELD_KINDS:
            raise SchemaError(f"field {self.name}: unknown kind {self.kind!r}")

    def is_missing(self, raw: str) -> bool:
        """True when a raw slice matches one of the declared sentinels."""
        stripped = raw.strip()
        if stripped == MISSING_RAW:
            return True
        if stripped in self.missing_sentinels:
            return True
        return BLANK_SENTINEL in self.missing_sentinels and stripped == ""


@dataclass(frozen=True)
class Schema:
    version_tag: str
    record_length: int
    fields: tuple[FieldSpec, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.fields, key=lambda f: f.offset))
        object.__setattr__(self, "fields", ordered)
        seen: set[str] = set()
        prev_end = 0
        prev_name = ""
        for f in ordered:
            if f.name in seen:
                raise SchemaError(f"duplicate field name {f.name!r}")
            seen.add(f.name)
            if f.offset < prev_end:
                raise SchemaError(
                    f"field {f.name!r} overlaps field {prev_name!r} "
                    f"(offset {f.offset} < {prev_end})"
                )
            prev_end = f.offset + f.width
            prev_name = f.name
        if self.fields and self.record_length < prev_end:
            raise SchemaError(
                f"record_length {self.record_length} shorter than field extent {prev_end}"
            )

    def field_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.fields)

    def field(self, name: str) -> FieldSpec:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)


@dataclass(frozen=True)
class RawRecord:
    """One untrimmed slice per schema field, plus its provenance."""

    values: dict[str, str]
    source_line: int = 0
    source_file: str = ""

    def locator(self) -> str:
        return f"{self.source_file}:{self.source_line}"

    def replace_values(self, updates: dict[str, str]) -> "RawRecord":
        merged = dict(self.values)
        merged.update(updates)
        return RawRecord(merged, self.source_line, self.source_file)

    def without_fields(self, names: Iterable[str]) -> "RawRecord":
        drop = set(names)
        kept = {k: v for k, v in self.values.items() if k not in drop}
        if len(kept) == len(self.values):
            return self
        return RawRecord(kept, self.source_line, self.source_file)


@dataclass
class ParseLog:
    parsed: int = 0
    skipped: int = 0
    skips: list[tuple[int, str]] = field(default_factory=list)

    def record_skip(self, line_number: int, reason: str) -> None:
        self.skipped += 1
        self.skips.append((line_number, reason))


def parse_schema(document: str) -> Schema:
    """Parse a schema document, rejecting overlaps and duplicates."""
    record_length: int | None = None
    version_tag = "v1"
    fields: list[FieldSpec] = []
    for lineno, raw_line in enumerate(document.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(" ")
        if parts[0] == "record_length":
            if len(parts) != 2:
                raise SchemaError(f"line {lineno}: malformed record_length line")
            try:
                record_length = int(parts[1])
            except ValueError:
                raise SchemaError(f"line {lineno}: record_length is not an integer")
            continue
        if parts[0] == "version":
            if len(parts) != 2:
                raise SchemaError(f"line {lineno}: malformed version line")
            version_tag = parts[1]
            continue
        if len(parts) not in (4, 5):
            raise SchemaError(
                f"line {lineno}: expected 'name offset width kind [sentinels]', got {line!r}"
            )
        name, offset_s, width_s, kind = parts[:4]
        try:
            offset, width = int(offset_s), int(width_s)
        except ValueError:
            raise SchemaError(f"line {lineno}: offset/width must be integers")
        sentinels = frozenset(
            s for s in (parts[4].split(",") if len(parts) == 5 else []) if s
        )
        try:
            fields.append(FieldSpec(name, offset, width, kind, sentinels))
        except SchemaError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
    if record_length is None:
        raise SchemaError("missing required 'record_length N' header line")
    try:
        return Schema(version_tag, record_length, tuple(fields))
    except SchemaError as exc:
        raise SchemaError(str(exc)) from None


def load_schema(path) -> Schema:
    with open(path, "r", encoding="ascii") as fh:
        return parse_schema(fh.read())


def parse_record(
    line: str, schema: Schema, source_line: int = 0, source_file: str = ""
) -> RawRecord:
    """Slice one data line into a RawRecord. No trimming, no interpretation."""
    body = line.rstrip("\r\n")
    if len(body) < schema.record_length:
        raise ShortLineError(
            f"line {source_line}: length {len(body)} < record_length {schema.record_length}",
            source_line,
        )
    values = {f.name: body[f.offset : f.offset + f.width] for f in schema.fields}
    return RawRecord(values, source_line, source_file)


def serialize_record(record: RawRecord, schema: Schema) -> str:
    """Render a record back to a fixed-width line (gaps become spaces)."""
    out = [" "] * schema.record_length
    for f in schema.fields:
        value = record.values[f.name]
        if len(value) != f.width:
            value = value[: f.width].ljust(f.width)
        out[f.offset : f.offset + f.width] = value
    return "".join(out)


def parse_file(
    stream: Iterable[str] | Iterator[str], schema: Schema, source_file: str = ""
) -> tuple[list[RawRecord], ParseLog]:
    """Parse every line of a stream; bad lines are logged and skipped."""
    records: list[RawRecord] = []
    log = ParseLog()
    for lineno, line in enumerate(stream, start=1):
        try:
            records.append(parse_record(line, schema, lineno, source_file))
            log.parsed += 1
        except ShortLineError as exc:
            log.record_skip(lineno, str(exc))
    return records, log


def load_records(path, schema: Schema) -> tuple[list[RawRecord], ParseLog]:
    with open(path, "r", encoding="ascii") as fh:
        return parse_file(fh, schema, source_file=str(path))
