from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from lungsurv.codebook import parse_codebook, shipped_codebook_text, shipped_schema_text
from lungsurv.preprocess import MISSING, PatientRecord
from lungsurv.schema import parse_schema

FIXTURES = Path(__file__).parent / "fixtures"


@dataclass
class Instance:
    """Minimal labeled-instance stand-in for classifier unit tests."""

    features: dict
    survived: object


@pytest.fixture(scope="session")
def schema():
    return parse_schema(shipped_schema_text())


@pytest.fixture(scope="session")
def codebook():
    return parse_codebook(shipped_codebook_text())


def make_patient(
    survival_time_months=24,
    vital_status="dead",
    death_cause="C349",
    diagnosis_year=1995,
    age_bin="55-64",
    primary_site="C342",
    tumor_size_mm=35,
    **overrides,
) -> PatientRecord:
    kwargs = dict(
        age_bin=age_bin,
        race="White",
        marital_status="Married",
        primary_site=primary_site,
        histologic_type="8070",
        tumor_size_mm=tumor_size_mm,
        extension="Localized",
        lymph_node_involvement="no",
        surgery_site="LungAndBronchus",
        radiation="BeamRadiation",
        stage="Regional",
        radiation_sequence="NoRadiation",
        survival_time_months=survival_time_months,
        vital_status=vital_status,
        death_cause=death_cause,
        diagnosis_year=diagnosis_year,
    )
    kwargs.update(overrides)
    return PatientRecord(**kwargs)


def load_grid():
    """The hand-evaluated labeling oracle table."""
    rows = []
    for line in (FIXTURES / "labeling_grid.tsv").read_text().splitlines():
        if not line or line.startswith("#") or line.startswith("months\t"):
            continue
        months, vital, cause, year, alg1, branch, rules, fired = line.split("\t")
        rows.append(
            {
                "months": None if months == "?" else int(months),
                "vital": vital,
                "cause": MISSING if cause == "?" else cause,
                "year": int(year),
                "alg1": alg1,
                "alg1_branch": branch,
                "rules": rules,
                "rules_fired": fired,
            }
        )
    return rows
