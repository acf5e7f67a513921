"""Descriptive cohort statistics: per-year median survival, class
profile and field frequency profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .labeling import LabeledInstance
from .preprocess import MISSING, PATIENT_FIELDS, PatientRecord


@dataclass(frozen=True)
class YearStats:
    year: int
    patient_count: int
    median_survival_months: float

    def rounded_median(self) -> int:
        """Half-up integer months, the display convention."""
        return math.floor(self.median_survival_months + 0.5)


@dataclass(frozen=True)
class ClassProfile:
    survived: int
    not_survived: int
    survived_pct: float
    not_survived_pct: float

    @property
    def total(self) -> int:
        return self.survived + self.not_survived


@dataclass(frozen=True)
class FrequencyProfile:
    field_name: str
    counts: dict[str, int]
    fractions: dict[str, float]
    survivor_lt40_fraction: float | None = None


def median(values: Sequence[int]) -> float:
    """Middle element (odd n) or mean of the two middle elements (even n)."""
    if not values:
        raise ValueError("median of empty sequence")
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2 == 1:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2


def mst_by_year(records: Sequence[PatientRecord]) -> list[YearStats]:
    """One YearStats per diagnosis year present, ascending.

    Every record must carry a survival time; run this on the cohort
    slice that has one.
    """
    by_year: dict[int, list[int]] = {}
    for record in records:
        if record.survival_time_months is None:
            raise ValueError(
                f"record with missing survival time (year {record.diagnosis_year})"
            )
        by_year.setdefault(record.diagnosis_year, []).append(
            record.survival_time_months
        )
    return [
        YearStats(year, len(months), median(months))
        for year, months in sorted(by_year.items())
    ]


def detect_mst_discontinuity(
    stats: Sequence[YearStats], drop_fraction: float = 0.25
) -> set[int]:
    """Years whose median fell by at least ``drop_fraction`` vs the prior year."""
    if len(stats) < 2:
        raise ValueError("need at least two years")
    flagged: set[int] = set()
    for prev, cur in zip(stats, stats[1:]):
        if cur.median_survival_months <= (1 - drop_fraction) * prev.median_survival_months:
            flagged.add(cur.year)
    return flagged


def half_up(value: float, decimals: int = 2) -> float:
    """Round half-up at the given number of decimals."""
    scale = 10**decimals
    return math.floor(value * scale + 0.5) / scale


def percent_pair(count_a: int, count_b: int) -> tuple[float, float]:
    """Two-decimal percentages that sum to 100.00.

    The smaller side is rounded half-up; the larger side absorbs the
    rounding remainder.
    """
    total = count_a + count_b
    if total == 0:
        return 0.0, 0.0
    smaller_is_a = count_a <= count_b
    smaller = count_a if smaller_is_a else count_b
    pct_small = half_up(smaller / total * 100, 2)
    pct_large = round(100.0 - pct_small, 2)
    return (pct_small, pct_large) if smaller_is_a else (pct_large, pct_small)


def class_profile(labeled: Sequence[LabeledInstance]) -> ClassProfile:
    survived = sum(1 for inst in labeled if inst.survived)
    not_survived = len(labeled) - survived
    pct_s, pct_n = percent_pair(survived, not_survived)
    return ClassProfile(survived, not_survived, pct_s, pct_n)


def frequency_profile(
    records: Sequence[PatientRecord] | Sequence[LabeledInstance],
    field_name: str,
) -> FrequencyProfile:
    """Value counts and fractions over a field, Missing included.

    For ``tumor_size_mm`` on labeled instances the profile also carries
    the fraction of survivors with tumors under 40mm.
    """
    counts: dict[str, int] = {}
    lt40 = 0
    survivors = 0
    labeled_input = bool(records) and isinstance(records[0], LabeledInstance)
    for record in records:
        if labeled_input:
            try:
                value = record.features[field_name]
            except KeyError:
                raise KeyError(f"unknown field {field_name!r}") from None
        else:
            if field_name not in PATIENT_FIELDS:
                raise KeyError(f"unknown field {field_name!r}")
            raw = getattr(record, field_name)
            value = MISSING if raw is None else str(raw)
        counts[value] = counts.get(value, 0) + 1
        if labeled_input and field_name == "tumor_size_mm" and record.survived:
            survivors += 1
            if value != MISSING and int(value) < 40:
                lt40 += 1
    total = sum(counts.values())
    fractions = {v: c / total for v, c in counts.items()} if total else {}
    survivor_fraction = None
    if labeled_input and field_name == "tumor_size_mm" and survivors:
        survivor_fraction = lt40 / survivors
    return FrequencyProfile(field_name, counts, fractions, survivor_fraction)


def render_year_table(stats: Iterable[YearStats]) -> str:
    """Aligned plain-text table of per-year medians and counts."""
    lines = [f"{'Year':<6}{'MedianSurvivalMonths':>22}{'Patients':>10}"]
    for s in stats:
        lines.append(f"{s.year:<6}{s.rounded_median():>22}{s.patient_count:>10,}")
    return "\n".join(lines) + "\n"


def render_class_profile(profile: ClassProfile) -> str:
    lines = [
        f"{'Status':<14}{'Patients':>10}{'Percent':>9}",
        f"{'Survived':<14}{profile.survived:>10,}{profile.survived_pct:>8.2f}%",
        f"{'NotSurvived':<14}{profile.not_survived:>10,}{profile.not_survived_pct:>8.2f}%",
        f"{'Total':<14}{profile.total:>10,}{100.0 if profile.total else 0.0:>8.2f}%",
    ]
    return "\n".join(lines) + "\n"
