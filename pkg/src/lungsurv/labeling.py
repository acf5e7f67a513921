"""Survivability labeling: the five-year flag and the rule-based
short/long-term split.

Two labeling paths exist and are deliberately kept as written, boundary
quirks included: the five-year flag treats exactly 60 months (alive) as
survived, while the ordered rules require strictly more than 60 months
before Rule-1 fires. Records that neither path can settle are removed,
never guessed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .preprocess import MISSING, SURVIVAL_FIELDS, PatientRecord

FIVE_YEAR = "five_year"
SHORT_LONG = "short_long"

LONG_TERM = "long_term_survivor"
SHORT_TERM = "short_term_survivor"
REMOVED = "removed"

_REMOVAL_RULES = frozenset(
    {"Rule2", "Rule5", "null_survival_code", "Alg1_inconclusive"}
)

FEATURE_FIELDS = (
    "age_bin",
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
    "diagnosis_year",
)


@dataclass(frozen=True)
class LabelingConfig:
    five_year_threshold_months: int = 60
    short_term_threshold_months: int = 12  # T_s
    lung_death_prefixes: frozenset[str] = frozenset({"C33", "C34"})
    # cutoff is the end of this calendar year; None means last_dataset_year
    follow_up_cutoff_year: int | None = None
    last_dataset_year: int = 1999

    def __post_init__(self):
        if not self.five_year_threshold_months > self.short_term_threshold_months > 0:
            raise ValueError("need five_year threshold > short-term threshold > 0")

    def cutoff_year(self) -> int:
        return (
            self.last_dataset_year
            if self.follow_up_cutoff_year is None
            else self.follow_up_cutoff_year
        )

    def is_lung_death(self, cause: str) -> bool:
        if cause == MISSING:
            return False
        return any(cause.startswith(p) for p in self.lung_death_prefixes)


@dataclass(frozen=True)
class LabelDecision:
    outcome: str  # long_term_survivor | short_term_survivor | removed
    fired_rule: str
    locator: str = ""

    def __post_init__(self):
        removed = self.outcome == REMOVED
        if removed != (self.fired_rule in _REMOVAL_RULES):
            raise ValueError(
                f"outcome {self.outcome!r} inconsistent with rule {self.fired_rule!r}"
            )


@dataclass(frozen=True)
class LabeledInstance:
    features: dict[str, str]
    survived: bool
    diagnosis_year: int

    def __post_init__(self):
        leaked = set(self.features) & set(SURVIVAL_FIELDS)
        if leaked:
            raise ValueError(f"survival fields leaked into features: {sorted(leaked)}")


@dataclass
class LabelingStats:
    mode: str
    total: int = 0
    labeled: int = 0
    removed: int = 0
    positives: int = 0
    rule_counts: dict[str, int] = field(default_factory=dict)

    def count_rule(self, rule: str) -> None:
        self.rule_counts[rule] = self.rule_counts.get(rule, 0) + 1

    def positive_fraction(self) -> float:
        return self.positives / self.labeled if self.labeled else 0.0


def _died_after_cutoff(record: PatientRecord, cfg: LabelingConfig) -> bool:
    """Death month (diagnosis year + survival months) past the cutoff year end.

    Diagnosis is anchored at January of its year, the cutoff at December
    of the cutoff year; records carry no finer date information.
    """
    if record.vital_status != "dead" or record.survival_time_months is None:
        return False
    death_index = record.diagnosis_year * 12 + record.survival_time_months
    return death_index > cfg.cutoff_year() * 12 + 11


def algorithm1_flag(record: PatientRecord, cfg: LabelingConfig) -> str:
    """Five-year cause-specific survival flag: survived / not_survived / removed."""
    outcome, _ = algorithm1_decision(record, cfg)
    return outcome


def algorithm1_decision(record: PatientRecord, cfg: LabelingConfig) -> tuple[str, str]:
    """Five-year flag plus the branch that produced it."""
    months = record.survival_time_months
    threshold = cfg.five_year_threshold_months
    if months is not None and months >= threshold and record.vital_status == "alive":
        return "survived", "Alg1_survived"
    if months is not None and months < threshold and cfg.is_lung_death(record.death_cause):
        return "not_survived", "Alg1_not_survived"
    if months is None or record.vital_status == MISSING:
        return REMOVED, "null_survival_code"
    return REMOVED, "Alg1_inconclusive"


def apply_rules(record: PatientRecord, cfg: LabelingConfig) -> LabelDecision:
    """Evaluate the five survivability rules in order; first match wins."""
    months = record.survival_time_months
    ts = cfg.short_term_threshold_months
    dead = record.vital_status == "dead"
    locator = ""

    # Rule-1: lives past five years, and the death (if any) fell outside
    # the follow-up horizon.
    if months is not None and months > cfg.five_year_threshold_months:
        if record.vital_status == "alive" or _died_after_cutoff(record, cfg):
            return LabelDecision(LONG_TERM, "Rule1", locator)

    # Rule-2: nothing to measure, or too recent to tell.
    if months is None:
        return LabelDecision(REMOVED, "Rule2", locator)
    if record.diagnosis_year == cfg.last_dataset_year and not dead and months < ts:
        return LabelDecision(REMOVED, "Rule2", locator)

    # Rule-3: early death from the disease itself.
    if dead and cfg.is_lung_death(record.death_cause) and months < ts:
        return LabelDecision(SHORT_TERM, "Rule3", locator)

    # Rule-4: outlived the short-term threshold.
    if months > ts:
        return LabelDecision(LONG_TERM, "Rule4", locator)

    # Rule-5: nothing applies.
    return LabelDecision(REMOVED, "Rule5", locator)


def extract_features(record: PatientRecord) -> dict[str, str]:
    """Feature mapping for classification; survival fields never enter."""
    features: dict[str, str] = {}
    for name in FEATURE_FIELDS:
        value = getattr(record, name)
        if value is None:
            features[name] = MISSING
        else:
            features[name] = str(value)
    return features


def label_dataset(
    records: Sequence[PatientRecord],
    cfg: LabelingConfig | None = None,
    mode: str = FIVE_YEAR,
) -> tuple[list[LabeledInstance], LabelingStats]:
    """Derive the class for each record, excluding removals.

    ``five_year`` mode maps the five-year flag (survived -> True);
    ``short_long`` maps the rule outcomes (long-term -> True).
    """
    if mode not in (FIVE_YEAR, SHORT_LONG):
        raise ValueError(f"unknown labeling mode {mode!r}")
    cfg = cfg or LabelingConfig()
    stats = LabelingStats(mode=mode, total=len(records))
    labeled: list[LabeledInstance] = []
    for record in records:
        if mode == FIVE_YEAR:
            outcome, branch = algorithm1_decision(record, cfg)
            stats.count_rule(branch)
            if outcome == REMOVED:
                stats.removed += 1
                continue
            survived = outcome == "survived"
        else:
            decision = apply_rules(record, cfg)
            stats.count_rule(decision.fired_rule)
            if decision.outcome == REMOVED:
                stats.removed += 1
                continue
            survived = decision.outcome == LONG_TERM
        labeled.append(
            LabeledInstance(extract_features(record), survived, record.diagnosis_year)
        )
        stats.labeled += 1
        if survived:
            stats.positives += 1
    return labeled, stats


_CSV_MISSING = "?"


def write_labeled_csv(instances: Iterable[LabeledInstance], path) -> None:
    """Labeled export: feature columns, then ``survived`` and ``diagnosis_year``."""
    feature_cols = [n for n in FEATURE_FIELDS if n != "diagnosis_year"]
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(feature_cols + ["survived", "diagnosis_year"])
        for inst in instances:
            row = [
                _CSV_MISSING if inst.features[c] == MISSING else inst.features[c]
                for c in feature_cols
            ]
            row.append("1" if inst.survived else "0")
            row.append(str(inst.diagnosis_year))
            writer.writerow(row)


def read_labeled_csv(path) -> list[LabeledInstance]:
    instances: list[LabeledInstance] = []
    feature_cols = [n for n in FEATURE_FIELDS if n != "diagnosis_year"]
    expected = feature_cols + ["survived", "diagnosis_year"]
    with open(path, "r", newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return instances
        if header != expected:
            raise ValueError(f"unexpected labeled header: {header}")
        for row in reader:
            year = int(row[-1])
            features = {
                name: (MISSING if cell == _CSV_MISSING else cell)
                for name, cell in zip(feature_cols, row[:-2])
            }
            features["diagnosis_year"] = str(year)
            instances.append(LabeledInstance(features, row[-2] == "1", year))
    return instances
