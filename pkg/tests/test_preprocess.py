import pytest
from hypothesis import given
from hypothesis import strategies as st

from lungsurv.preprocess import (
    AGE_BIN_LABELS,
    MISSING,
    REQUIRED_FIELDS,
    UncodifiableError,
    bin_age,
    eliminate_fields,
    filter_lung,
    patient_to_raw_values,
    phase1_structural,
    phase2_relevancy,
    phase3_qualitative,
    phase4_codify,
    read_patients_csv,
    run_pipeline,
    write_patients_csv,
)
from lungsurv.schema import RawRecord, parse_record, parse_schema, serialize_record


def raw(schema, codebook, **overrides):
    """Build a clean RawRecord on the shipped layout."""
    values = {
        "age": "045",
        "race": "01",
        "marital_status": "2",
        "primary_site": "C342",
        "histologic_type": "8070",
        "behavior": "3",
        "tumor_size_mm": "035",
        "grade": "2",
        "extension": "10",
        "lymph_node_involvement": "0",
        "surgery_site": "10",
        "radiation": "1",
        "stage": "2",
        "radiation_sequence": "0",
        "survival_time_months": "0024",
        "vital_status": "2",
        "death_cause": "C349",
        "diagnosis_year": "1995",
    }
    values.update(overrides)
    return RawRecord(values, 1, "test")


# ---- bin_age


@pytest.mark.parametrize(
    "age,expected",
    [(0, "0-24"), (24, "0-24"), (25, "25-34"), (84, "75-84"), (85, ">=85"), (106, ">=85")],
)
def test_bin_age_boundaries(age, expected):
    assert bin_age(age) == expected


def test_bin_age_out_of_range():
    with pytest.raises(ValueError):
        bin_age(121)
    with pytest.raises(ValueError):
        bin_age(-1)


@given(st.integers(min_value=0, max_value=120))
def test_bin_age_total(age):
    assert bin_age(age) in AGE_BIN_LABELS


def test_bin_age_monotone_and_surjective():
    bins = [bin_age(a) for a in range(121)]
    order = {label: i for i, label in enumerate(AGE_BIN_LABELS)}
    assert all(order[a] <= order[b] for a, b in zip(bins, bins[1:]))
    assert set(bins) == set(AGE_BIN_LABELS)


# ---- phase 1


def test_phase1_clean_identical_schemas(schema, codebook):
    records = [raw(schema, codebook)]
    normalized, report = phase1_structural([schema, schema], [records, records])
    assert report.issues == []
    assert report.records_in == report.records_out == 2


def test_phase1_schema_mismatch(schema):
    other = parse_schema("record_length 3\nage 0 3 ordinal-integer\n")
    _, report = phase1_structural([schema, other], [[], []])
    mismatched = {issue[1] for issue in report.issues}
    assert "race" in mismatched
    assert all(issue[2] == "structural-mismatch" for issue in report.issues)


def test_phase1_sentinel_normalized():
    doc = "record_length 5\ngrade 0 5 categorical N/A,-0-\n"
    schema = parse_schema(doc)
    record = RawRecord({"grade": "N/A  "}, 1, "f")
    normalized, report = phase1_structural([schema], [[record]])
    assert normalized[0][0].values["grade"] == ""
    assert len(report.issues) == 1
    locator, field, code, detail = report.issues[0]
    assert code == "missing-sentinel" and field == "grade" and "N/A" in detail


# ---- phase 2


def test_phase2_usable(schema):
    verdict, report = phase2_relevancy(schema)
    assert verdict == "usable" and report.issues == []


def test_phase2_missing_required_field():
    partial = parse_schema("record_length 3\nage 0 3 ordinal-integer\n")
    verdict, report = phase2_relevancy(partial)
    assert verdict == "discard"
    missing = {issue[1] for issue in report.issues}
    assert "primary_site" in missing
    assert missing == REQUIRED_FIELDS - {"age"}


def test_phase2_group_level_discarded(schema):
    verdict, report = phase2_relevancy(schema, granularity="group-level")
    assert verdict == "discard"
    assert any(issue[2] == "granularity" for issue in report.issues)


# ---- phase 3


def test_phase3_clean(schema, codebook):
    assert phase3_qualitative(raw(schema, codebook), schema, codebook) == []


def test_phase3_extraneous_age(schema, codebook):
    issues = phase3_qualitative(raw(schema, codebook, age="134"), schema, codebook)
    assert [i[2] for i in issues] == ["extraneous-age"]


def test_phase3_survival_bound(schema, codebook):
    record = raw(schema, codebook, survival_time_months="0200", diagnosis_year="1999")
    issues = phase3_qualitative(record, schema, codebook, followup_end_year=2003)
    assert [i[2] for i in issues] == ["survival-bound"]


def test_phase3_vital_cause_grid(schema, codebook):
    # exhaustive 3x3: alive/dead/missing vital x lung/other/missing cause;
    # only a present cause on a living patient contradicts
    cases = {
        ("1", "C349"): True,
        ("1", "I219"): True,
        ("1", ""): False,
        ("2", "C349"): False,
        ("2", "I219"): False,
        ("2", ""): False,
        ("", "C349"): False,
        ("", "I219"): False,
        ("", ""): False,
    }
    for (vital, cause), contradiction in cases.items():
        record = raw(
            schema,
            codebook,
            vital_status=vital.ljust(1),
            death_cause=cause.ljust(4),
            survival_time_months="0024" if vital != "1" else "0070",
        )
        issues = phase3_qualitative(record, schema, codebook)
        has = any(i[2] == "vital-cause-contradiction" for i in issues)
        assert has == contradiction, (vital, cause)


# ---- filtering and elimination


def test_filter_lung_keeps_lung_sites(schema, codebook):
    assert filter_lung(raw(schema, codebook, primary_site="C342")) is None


def test_filter_lung_drops_other_sites(schema, codebook):
    assert filter_lung(raw(schema, codebook, primary_site="C500")) == "site"


def test_filter_lung_study_window(schema, codebook):
    record = raw(schema, codebook, primary_site="C349", diagnosis_year="2001")
    assert filter_lung(record, study_window=True) == "year"
    assert filter_lung(record, study_window=False) is None
    early = raw(schema, codebook, diagnosis_year="1987")
    assert filter_lung(early, study_window=False) == "year"
    late = raw(schema, codebook, diagnosis_year="2004")
    assert filter_lung(late, study_window=False) == "year"


def test_eliminate_fields(schema, codebook):
    record = raw(schema, codebook, grade="4", behavior="3")
    slim = eliminate_fields(record)
    assert "grade" not in slim.values and "behavior" not in slim.values
    assert slim.values["age"] == "045"
    assert eliminate_fields(slim) is slim  # idempotent


# ---- phase 4


def test_phase4_codify_basic(schema, codebook):
    patient = phase4_codify(raw(schema, codebook, age="042", race="01"), schema, codebook)
    assert patient.age_bin == "35-44"
    assert patient.race == "White"
    assert patient.marital_status == "Married"
    assert patient.tumor_size_mm == 35
    assert patient.survival_time_months == 24
    assert patient.vital_status == "dead"
    assert patient.death_cause == "C349"


def test_phase4_unknown_code_is_category(schema, codebook):
    patient = phase4_codify(raw(schema, codebook, marital_status="9"), schema, codebook)
    assert patient.marital_status == "Unknown"


def test_phase4_sentinel_becomes_missing(schema, codebook):
    record = raw(schema, codebook, tumor_size_mm="   ", death_cause="    ",
                 vital_status="1", survival_time_months="0070")
    patient = phase4_codify(record, schema, codebook)
    assert patient.tumor_size_mm is None
    assert patient.death_cause == MISSING


def test_phase4_undeclared_code_uncodifiable(schema, codebook):
    with pytest.raises(UncodifiableError):
        phase4_codify(raw(schema, codebook, race="77"), schema, codebook)


def test_phase4_codebook_is_exhaustive_oracle(schema, codebook):
    # the shipped code book is itself the fixture: every declared pair maps
    for field_name in codebook.fields():
        if field_name in ("behavior", "grade"):
            continue
        for code, value in codebook.tables[field_name].items():
            record = raw(schema, codebook, **{field_name: code})
            if field_name == "vital_status":
                record = record.replace_values(
                    {"death_cause": "    " if value == "alive" else "C349"}
                )
            patient = phase4_codify(record, schema, codebook)
            assert getattr(patient, field_name) == value


# ---- pipeline invariants


def _cohort(schema, n=400, seed=5, **cfg_overrides):
    from lungsurv import synth
    from lungsurv.schema import parse_file

    config = synth.GeneratorConfig(seed=seed, n_records=n, **cfg_overrides)
    lines, truth = synth.generate(config)
    records, _ = parse_file(lines, schema)
    return records, truth


def test_pipeline_monotone_and_conserving(schema, codebook):
    records, _ = _cohort(schema)
    dirty = records + [
        raw(schema, codebook, age="134"),
        raw(schema, codebook, primary_site="C500"),
        raw(schema, codebook, race="77"),
    ]
    result = run_pipeline([schema], [dirty], codebook)
    counts = [(r.records_in, r.records_out) for r in result.reports]
    assert all(cin >= cout for cin, cout in counts)
    total_drops = sum(cin - cout for cin, cout in counts)
    assert len(dirty) == len(result.patients) + total_drops
    assert total_drops == 3
    dropped_codes = {i[2] for r in result.reports for i in r.issues}
    assert {"extraneous-age", "non-lung-site", "uncodifiable"} <= dropped_codes


def test_pipeline_idempotent(schema, codebook):
    records, _ = _cohort(schema)
    result = run_pipeline([schema], [records], codebook)
    lines = [
        serialize_record(
            RawRecord(patient_to_raw_values(p, codebook), i + 1, "rerun"), schema
        )
        for i, p in enumerate(result.patients)
    ]
    reparsed = [parse_record(l, schema, i + 1, "rerun") for i, l in enumerate(lines)]
    second = run_pipeline([schema], [reparsed], codebook)
    assert second.dropped() == 0
    assert second.patients == result.patients


def test_pipeline_output_satisfies_invariants(schema, codebook):
    records, _ = _cohort(schema, n=600)
    result = run_pipeline([schema], [records], codebook)
    for p in result.patients:
        assert p.primary_site in {"C340", "C341", "C342", "C343", "C348", "C349"}
        assert 1988 <= p.diagnosis_year <= 2003
        assert p.age_bin in AGE_BIN_LABELS
        assert p.vital_status in ("alive", "dead")


def test_patients_csv_roundtrip(tmp_path, schema, codebook):
    records, _ = _cohort(schema, n=50)
    result = run_pipeline([schema], [records], codebook)
    path = tmp_path / "patients.csv"
    write_patients_csv(result.patients, path)
    assert read_patients_csv(path) == result.patients
