"""Four-phase preprocessing: structural checks, relevancy, qualitative
consistency and codification, plus the lung-site / study-window filters.

Raw values flow through the phases as RawRecords; phase 4 turns a
surviving record into a typed PatientRecord. Missing data is carried
explicitly: ``""`` marks a missing raw slice after phase 1, the
``Missing`` enumeration member marks it on a PatientRecord, and ``?``
is its CSV serialization.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields as dataclass_fields
from typing import Iterable, Sequence

from .codebook import Codebook
from .schema import MISSING_RAW, RawRecord, Schema

MISSING = "Missing"

LUNG_SITE_CODES = frozenset({"C340", "C341", "C342", "C343", "C348", "C349"})

#: inclusive diagnosis-year window of complete coverage
DATASET_YEARS = (1988, 2003)
#: inclusive modeling window (later years carry a coding discontinuity)
STUDY_WINDOW = (1988, 1999)
#: last calendar year with follow-up information
FOLLOWUP_END_YEAR = 2003

AGE_BIN_LABELS = ("0-24", "25-34", "35-44", "45-54", "55-64", "65-74", "75-84", ">=85")
_AGE_BIN_UPPER = (24, 34, 44, 54, 64, 74, 84)

ELIMINATED_FIELDS = ("behavior", "grade")

#: the post-elimination field set a usable dataset must provide
REQUIRED_FIELDS = frozenset(
    {
        "age",
        "race",
        "marital_status",
        "primary_site",
        "histologic_type",
        "tumor_size_mm",
        "extension",
        "lymph_node_involvement",
        "surgery_site",
        "radiation",
        "stage",
        "radiation_sequence",
        "survival_time_months",
        "vital_status",
        "death_cause",
        "diagnosis_year",
    }
)

RACE_VALUES = (
    "White",
    "Black",
    "AmericanIndianAlaskanNative",
    "AsianPacificIslander",
    "OtherUnspecified",
    "Unknown",
)
MARITAL_VALUES = ("Single", "Married", "Separated", "Divorced", "Widowed", "Unknown")

Issue = tuple[str, str, str, str]  # (record locator, field, issue code, detail)


class UncodifiableError(ValueError):
    def __init__(self, field_name: str, value: str):
        super().__init__(f"field {field_name}: uncodifiable value {value!r}")
        self.field_name = field_name
        self.value = value


@dataclass(frozen=True)
class PatientRecord:
    age_bin: str
    race: str
    marital_status: str
    primary_site: str
    histologic_type: str
    tumor_size_mm: int | None
    extension: str
    lymph_node_involvement: str
    surgery_site: str
    radiation: str
    stage: str
    radiation_sequence: str
    survival_time_months: int | None
    vital_status: str
    death_cause: str
    diagnosis_year: int


PATIENT_FIELDS = tuple(f.name for f in dataclass_fields(PatientRecord))
SURVIVAL_FIELDS = ("survival_time_months", "vital_status", "death_cause")


@dataclass
class PhaseReport:
    phase: str  # I, II, III or IV
    records_in: int = 0
    records_out: int = 0
    issues: list[Issue] = field(default_factory=list)

    def add(self, locator: str, field_name: str, code: str, detail: str) -> None:
        self.issues.append((locator, field_name, code, detail))


def bin_age(age: int) -> str:
    """Map an age in years onto the 8-bin scale. Total on [0, 120]."""
    if age < 0 or age > 120:
        raise ValueError(f"age {age} outside [0, 120]: phase 3 must run before binning")
    for label, upper in zip(AGE_BIN_LABELS, _AGE_BIN_UPPER):
        if age <= upper:
            return label
    return AGE_BIN_LABELS[-1]


def _int_or_none(raw: str) -> int | None:
    stripped = raw.strip()
    if stripped == MISSING_RAW:
        return None
    try:
        return int(stripped)
    except ValueError:
        return None


def phase1_structural(
    schemas: Sequence[Schema], datasets: Sequence[Sequence[RawRecord]]
) -> tuple[list[list[RawRecord]], PhaseReport]:
    """Check layout homogeneity and canonicalize missing sentinels.

    Sentinel hits are anomalies: recorded in the report, never dropped.
    Returns the datasets with every sentinel value rewritten to the
    canonical missing marker.
    """
    if len(schemas) != len(datasets):
        raise ValueError("one schema per dataset required")
    report = PhaseReport("I")
    if schemas:
        reference = schemas[0]
        ref_shapes = {f.name: (f.offset, f.width, f.kind) for f in reference.fields}
        for idx, other in enumerate(schemas[1:], start=1):
            other_shapes = {f.name: (f.offset, f.width, f.kind) for f in other.fields}
            for name in sorted(set(ref_shapes) ^ set(other_shapes)):
                report.add(
                    f"schema[{idx}]",
                    name,
                    "structural-mismatch",
                    "present in only one schema",
                )
            for name in sorted(set(ref_shapes) & set(other_shapes)):
                if ref_shapes[name] != other_shapes[name]:
                    report.add(
                        f"schema[{idx}]",
                        name,
                        "structural-mismatch",
                        f"shape {other_shapes[name]} != {ref_shapes[name]}",
                    )

    normalized: list[list[RawRecord]] = []
    for schema, records in zip(schemas, datasets):
        out: list[RawRecord] = []
        for record in records:
            updates: dict[str, str] = {}
            for fspec in schema.fields:
                value = record.values[fspec.name]
                if value.strip() != MISSING_RAW and fspec.is_missing(value):
                    report.add(
                        record.locator(),
                        fspec.name,
                        "missing-sentinel",
                        f"value {value.strip()!r}",
                    )
                    updates[fspec.name] = MISSING_RAW
                elif value.strip() == MISSING_RAW and value != MISSING_RAW:
                    updates[fspec.name] = MISSING_RAW
            out.append(record.replace_values(updates) if updates else record)
            report.records_in += 1
            report.records_out += 1
        normalized.append(out)
    return normalized, report


def phase2_relevancy(
    schema: Schema,
    required_fields: frozenset[str] = REQUIRED_FIELDS,
    granularity: str = "patient-level",
) -> tuple[str, PhaseReport]:
    """Relevancy and completeness verdict: ``usable`` or ``discard``."""
    report = PhaseReport("II")
    verdict = "usable"
    if granularity != "patient-level":
        verdict = "discard"
        report.add("dataset", "-", "granularity", f"{granularity!r} is not patient-level")
    present = set(schema.field_names())
    for name in sorted(required_fields - present):
        verdict = "discard"
        report.add("dataset", name, "missing-required-field", "absent from schema")
    return verdict, report


def phase3_qualitative(
    record: RawRecord,
    schema: Schema,
    codebook: Codebook,
    followup_end_year: int = FOLLOWUP_END_YEAR,
) -> list[Issue]:
    """Qualitative consistency issues for one record (empty means clean)."""
    issues: list[Issue] = []
    loc = record.locator()

    age = _int_or_none(record.values.get("age", ""))
    if age is not None and (age < 0 or age > 120):
        issues.append((loc, "age", "extraneous-age", f"age={age}"))

    months = _int_or_none(record.values.get("survival_time_months", ""))
    year = _int_or_none(record.values.get("diagnosis_year", ""))
    if months is not None and year is not None:
        bound = (followup_end_year - year) * 12 + 12
        if months > bound:
            issues.append(
                (loc, "survival_time_months", "survival-bound",
                 f"{months} months > {bound} observable")
            )

    vital_code = record.values.get("vital_status", "").strip()
    cause = record.values.get("death_cause", "").strip()
    if vital_code and cause:
        try:
            vital = codebook.decode("vital_status", vital_code)
        except KeyError:
            vital = ""
        if vital == "alive":
            issues.append(
                (loc, "vital_status", "vital-cause-contradiction",
                 f"alive with death_cause={cause}")
            )
    return issues


def filter_lung(
    record: RawRecord,
    study_window: bool = True,
    window: tuple[int, int] = STUDY_WINDOW,
    dataset_years: tuple[int, int] = DATASET_YEARS,
) -> str | None:
    """Return None to keep the record, or a drop reason.

    Keeps lung topography codes only; drops diagnosis years before the
    complete window, after it, and (when the study-window flag is on)
    after the modeling cutoff.
    """
    site = record.values.get("primary_site", "").strip()
    if site not in LUNG_SITE_CODES:
        return "site"
    year = _int_or_none(record.values.get("diagnosis_year", ""))
    if year is not None:
        if year < dataset_years[0] or year > dataset_years[1]:
            return "year"
        if study_window and year > window[1]:
            return "year"
    return None


def eliminate_fields(record: RawRecord) -> RawRecord:
    """Drop the behavior and grade fields; idempotent."""
    return record.without_fields(ELIMINATED_FIELDS)


def _decode_categorical(codebook: Codebook, field_name: str, raw: str) -> str:
    stripped = raw.strip()
    if stripped == MISSING_RAW:
        return MISSING
    try:
        return codebook.decode(field_name, stripped)
    except KeyError:
        raise UncodifiableError(field_name, stripped) from None


def _decode_int(field_name: str, raw: str, required: bool = False) -> int | None:
    stripped = raw.strip()
    if stripped == MISSING_RAW:
        if required:
            raise UncodifiableError(field_name, stripped)
        return None
    try:
        value = int(stripped)
    except ValueError:
        raise UncodifiableError(field_name, stripped) from None
    if value < 0:
        raise UncodifiableError(field_name, stripped)
    return value


def _decode_code(raw: str) -> str:
    stripped = raw.strip()
    return MISSING if stripped == MISSING_RAW else stripped


def phase4_codify(
    record: RawRecord, schema: Schema, codebook: Codebook
) -> PatientRecord:
    """Convert a raw record into its typed domain.

    Raises UncodifiableError when a value falls outside its declared
    domain; callers drop the record with an issue.
    """
    v = record.values
    age = _decode_int("age", v.get("age", ""), required=True)
    return PatientRecord(
        age_bin=bin_age(age),
        race=_decode_categorical(codebook, "race", v.get("race", "")),
        marital_status=_decode_categorical(
            codebook, "marital_status", v.get("marital_status", "")
        ),
        primary_site=_decode_code(v.get("primary_site", "")),
        histologic_type=_decode_code(v.get("histologic_type", "")),
        tumor_size_mm=_decode_int("tumor_size_mm", v.get("tumor_size_mm", "")),
        extension=_decode_categorical(codebook, "extension", v.get("extension", "")),
        lymph_node_involvement=_decode_categorical(
            codebook, "lymph_node_involvement", v.get("lymph_node_involvement", "")
        ),
        surgery_site=_decode_categorical(
            codebook, "surgery_site", v.get("surgery_site", "")
        ),
        radiation=_decode_categorical(codebook, "radiation", v.get("radiation", "")),
        stage=_decode_categorical(codebook, "stage", v.get("stage", "")),
        radiation_sequence=_decode_categorical(
            codebook, "radiation_sequence", v.get("radiation_sequence", "")
        ),
        survival_time_months=_decode_int(
            "survival_time_months", v.get("survival_time_months", "")
        ),
        vital_status=_decode_categorical(
            codebook, "vital_status", v.get("vital_status", "")
        ),
        death_cause=_decode_code(v.get("death_cause", "")),
        diagnosis_year=_decode_int(
            "diagnosis_year", v.get("diagnosis_year", ""), required=True
        ),
    )


@dataclass
class PipelineResult:
    patients: list[PatientRecord]
    reports: list[PhaseReport]
    verdict: str

    def dropped(self) -> int:
        return sum(r.records_in - r.records_out for r in self.reports)


def run_pipeline(
    schemas: Sequence[Schema],
    datasets: Sequence[Sequence[RawRecord]],
    codebook: Codebook,
    study_window: bool = True,
    followup_end_year: int = FOLLOWUP_END_YEAR,
    required_fields: frozenset[str] = REQUIRED_FIELDS,
) -> PipelineResult:
    """Run phases I-IV plus the lung/window filters over all datasets.

    Record counts are conserved: every drop is charged to exactly one
    phase report with at least one issue naming the record.
    """
    normalized, report1 = phase1_structural(schemas, datasets)

    report2 = PhaseReport("II")
    usable: list[list[RawRecord]] = []
    verdict = "usable"
    for schema, records in zip(schemas, normalized):
        ds_verdict, ds_report = phase2_relevancy(schema, required_fields)
        report2.issues.extend(ds_report.issues)
        report2.records_in += len(records)
        if ds_verdict == "usable":
            report2.records_out += len(records)
            usable.append(list(records))
        else:
            verdict = "discard"
            usable.append([])
    flat = [r for ds in usable for r in ds]
    schema_for: list[Schema] = []
    for schema, ds in zip(schemas, usable):
        schema_for.extend([schema] * len(ds))

    report3 = PhaseReport("III", records_in=len(flat))
    survivors: list[tuple[RawRecord, Schema]] = []
    for record, schema in zip(flat, schema_for):
        issues = phase3_qualitative(record, schema, codebook, followup_end_year)
        if issues:
            report3.issues.extend(issues)
        else:
            survivors.append((record, schema))
    report3.records_out = len(survivors)

    report4 = PhaseReport("IV", records_in=len(survivors))
    patients: list[PatientRecord] = []
    for record, schema in survivors:
        reason = filter_lung(record, study_window=study_window)
        if reason is not None:
            if reason == "site":
                field_name, code = "primary_site", "non-lung-site"
            else:
                field_name, code = "diagnosis_year", "out-of-window-year"
            detail = f"value {record.values.get(field_name, '').strip()!r}"
            report4.add(record.locator(), field_name, code, detail)
            continue
        slim = eliminate_fields(record)
        try:
            patients.append(phase4_codify(slim, schema, codebook))
        except UncodifiableError as exc:
            report4.add(record.locator(), exc.field_name, "uncodifiable", str(exc))
    report4.records_out = len(patients)

    return PipelineResult(patients, [report1, report2, report3, report4], verdict)


# representative age per bin, used when a PatientRecord must be rendered
# back into raw field values (bin_age of each is its own bin)
_AGE_BIN_REPRESENTATIVE = {
    "0-24": 20,
    "25-34": 30,
    "35-44": 40,
    "45-54": 50,
    "55-64": 60,
    "65-74": 70,
    "75-84": 80,
    ">=85": 90,
}


def patient_to_raw_values(patient: PatientRecord, codebook: Codebook) -> dict[str, str]:
    """Render a PatientRecord as fixed-width raw field values.

    Ages are represented by a fixed in-bin representative since binning
    is lossy. Eliminated fields come back blank.
    """

    def cat(field_name: str, value: str, width: int) -> str:
        if value == MISSING:
            return " " * width
        return codebook.encode(field_name, value).rjust(width)

    def num(value: int | None, width: int) -> str:
        return " " * width if value is None else str(value).zfill(width)

    def code(value: str, width: int) -> str:
        return " " * width if value == MISSING else value.ljust(width)

    return {
        "age": num(_AGE_BIN_REPRESENTATIVE[patient.age_bin], 3),
        "race": cat("race", patient.race, 2),
        "marital_status": cat("marital_status", patient.marital_status, 1),
        "primary_site": code(patient.primary_site, 4),
        "histologic_type": code(patient.histologic_type, 4),
        "behavior": " ",
        "tumor_size_mm": num(patient.tumor_size_mm, 3),
        "grade": " ",
        "extension": cat("extension", patient.extension, 2),
        "lymph_node_involvement": cat(
            "lymph_node_involvement", patient.lymph_node_involvement, 1
        ),
        "surgery_site": cat("surgery_site", patient.surgery_site, 2),
        "radiation": cat("radiation", patient.radiation, 1),
        "stage": cat("stage", patient.stage, 1),
        "radiation_sequence": cat(
            "radiation_sequence", patient.radiation_sequence, 1
        ),
        "survival_time_months": num(patient.survival_time_months, 4),
        "vital_status": cat("vital_status", patient.vital_status, 1),
        "death_cause": code(patient.death_cause, 4),
        "diagnosis_year": num(patient.diagnosis_year, 4),
    }


_CSV_MISSING = "?"


def write_patients_csv(patients: Iterable[PatientRecord], path) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(PATIENT_FIELDS)
        for p in patients:
            row = []
            for name in PATIENT_FIELDS:
                value = getattr(p, name)
                if value is None or value == MISSING:
                    row.append(_CSV_MISSING)
                else:
                    row.append(str(value))
            writer.writerow(row)


def read_patients_csv(path) -> list[PatientRecord]:
    patients: list[PatientRecord] = []
    with open(path, "r", newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return patients
        if tuple(header) != PATIENT_FIELDS:
            raise ValueError(f"unexpected patients header: {header}")
        int_fields = {"tumor_size_mm", "survival_time_months", "diagnosis_year"}
        for row in reader:
            kwargs = {}
            for name, cell in zip(PATIENT_FIELDS, row):
                if cell == _CSV_MISSING:
                    kwargs[name] = None if name in int_fields else MISSING
                elif name in int_fields:
                    kwargs[name] = int(cell)
                else:
                    kwargs[name] = cell
            patients.append(PatientRecord(**kwargs))
    return patients
