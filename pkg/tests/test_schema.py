import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lungsurv.schema import (
    ParseLog,
    SchemaError,
    ShortLineError,
    parse_file,
    parse_record,
    parse_schema,
    serialize_record,
)

AGE_ONLY = "record_length 3\nage 0 3 ordinal-integer\n"


def test_minimal_schema():
    schema = parse_schema(AGE_ONLY)
    assert schema.record_length == 3
    field = schema.fields[0]
    assert (field.name, field.offset, field.width, field.kind) == (
        "age",
        0,
        3,
        "ordinal-integer",
    )


def test_overlapping_fields_rejected():
    doc = "record_length 4\na 0 2 code\nb 1 2 code\n"
    with pytest.raises(SchemaError, match="overlap"):
        parse_schema(doc)


def test_duplicate_name_rejected():
    doc = "record_length 4\na 0 2 code\na 2 2 code\n"
    with pytest.raises(SchemaError, match="duplicate"):
        parse_schema(doc)


def test_record_length_required():
    with pytest.raises(SchemaError, match="record_length"):
        parse_schema("a 0 2 code\n")


def test_record_length_shorter_than_fields_rejected():
    with pytest.raises(SchemaError, match="shorter"):
        parse_schema("record_length 3\na 0 2 code\nb 2 2 code\n")


def test_syntax_error_reports_line_number():
    with pytest.raises(SchemaError, match="line 2"):
        parse_schema("record_length 4\na zero 2 code\n")


def test_fields_sorted_by_offset():
    doc = "record_length 4\nb 2 2 code\na 0 2 code\n"
    schema = parse_schema(doc)
    assert schema.field_names() == ("a", "b")


def test_sentinel_declarations():
    doc = "record_length 3\nage 0 3 ordinal-integer <blank>,999\n"
    field = parse_schema(doc).fields[0]
    assert field.is_missing("999")
    assert field.is_missing("   ")
    assert not field.is_missing("042")


def test_shipped_schema_parses(schema):
    assert schema.record_length == 40
    assert len(schema.fields) == 18
    assert schema.record_length == sum(f.width for f in schema.fields)
    assert schema.version_tag == "lung-v1"


def test_parse_record_single_field():
    schema = parse_schema(AGE_ONLY)
    record = parse_record("042", schema)
    assert record.values == {"age": "042"}


def test_parse_record_short_line():
    schema = parse_schema(AGE_ONLY)
    with pytest.raises(ShortLineError):
        parse_record("04", schema, source_line=3)


def test_parse_record_ignores_trailing_padding():
    schema = parse_schema(AGE_ONLY)
    assert parse_record("042   trailing", schema).values == {"age": "042"}


def test_roundtrip_serialize(schema):
    line = "075015C3498041308624011011200042C3411993"[:40]
    record = parse_record(line, schema)
    assert serialize_record(record, schema) == line[: schema.record_length]


def test_parse_file_empty(schema):
    records, log = parse_file([], schema)
    assert records == [] and log.parsed == 0 and log.skipped == 0


def test_parse_file_skips_short_lines(schema):
    good = "0" * 40
    lines = [good] * 10 + [good[:12]]
    records, log = parse_file(lines, schema)
    assert len(records) == 10
    assert log.parsed == 10 and log.skipped == 1
    assert log.skips[0][0] == 11 and "length" in log.skips[0][1]


def test_parse_file_count_conservation(schema):
    lines = ["0" * 40, "1" * 40, "zz", "2" * 40]
    records, log = parse_file(lines, schema)
    assert log.parsed + log.skipped == len(lines)


@settings(max_examples=200)
@given(st.integers(min_value=0, max_value=999))
def test_roundtrip_property_age(age):
    schema = parse_schema(AGE_ONLY)
    line = str(age).zfill(3)
    assert serialize_record(parse_record(line, schema), schema) == line


def test_synthetic_roundtrip_1000(schema):
    from lungsurv import synth

    config = synth.GeneratorConfig(seed=13, n_records=1000)
    lines, _ = synth.generate(config)
    for i, line in enumerate(lines):
        record = parse_record(line, schema, source_line=i + 1)
        assert serialize_record(record, schema) == line
        reparsed = parse_record(serialize_record(record, schema), schema, i + 1)
        assert reparsed.values == record.values


def test_full_scale_parse(schema):
    # the headline cohort size parses without a single skip
    from lungsurv import synth

    config = synth.GeneratorConfig(seed=481, n_records=481432)
    lines, _ = synth.generate(config)
    records, log = parse_file(lines, schema)
    assert log.parsed == 481432
    assert log.skipped == 0
    assert len(records) == 481432
