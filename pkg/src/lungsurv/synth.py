"""Seeded synthetic cohort generator with plantable ground truth.

The generator works backward from labels: it samples each record's
class first, then samples survival fields consistent with it (survivors
are alive with >= 60 observable months, non-survivors die of a lung
cause before 60 months), so the class balance and the labeling
semantics hold by construction.

Randomness comes from numpy's PCG64 via SeedSequence. Records are
generated in fixed-size chunks whose generators are spawned as
``SeedSequence(seed, spawn_key=(chunk_index,))``, so output is
byte-identical for a config regardless of how chunks are scheduled.
Within a chunk the draw order is fixed: years, class, rule coverage,
rule false-indicators, age, the categorical fields in schema order,
tumor size (selector, small, large), survivor months, non-survivor
months, death cause.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .schema import Schema
from .stats import median

CHUNK = 65536
_NOISE_SPAWN_KEY = 1_000_003

LUNG_CAUSE_CODES = ("C33", "C340", "C341", "C342", "C343", "C348", "C349")

#: baseline value distributions for the categorical fields; codes are
#: pre-padded to their schema widths
FIELD_NOISE: dict[str, tuple[tuple[str, ...], tuple[float, ...]]] = {
    "race": (("01", "02", "03", "04", "05", "99"), (0.80, 0.10, 0.02, 0.05, 0.02, 0.01)),
    "marital_status": (("1", "2", "3", "4", "5", "9"), (0.18, 0.55, 0.04, 0.10, 0.11, 0.02)),
    "primary_site": (
        ("C340", "C341", "C342", "C343", "C348", "C349"),
        (0.05, 0.08, 0.10, 0.06, 0.06, 0.65),
    ),
    "histologic_type": (
        ("8070", "8071", "8072", "8140", "8041", "8250", "8260", "8480"),
        (0.30, 0.05, 0.05, 0.25, 0.20, 0.05, 0.05, 0.05),
    ),
    "behavior": (("3", "2"), (0.999, 0.001)),
    "grade": (("1", "2", "3", "4", "9"), (0.08, 0.16, 0.24, 0.484, 0.036)),
    "extension": (
        ("10", "20", "30", "40", "60", "99"),
        (0.25, 0.20, 0.20, 0.15, 0.15, 0.05),
    ),
    "lymph_node_involvement": (("0", "1"), (0.55, 0.45)),
    "surgery_site": (
        ("10", "00", "20", "30", "40", "90"),
        (0.95, 0.02, 0.01, 0.01, 0.005, 0.005),
    ),
    "radiation": (
        ("0", "1", "2", "3", "4", "5", "6", "7", "8"),
        (0.35, 0.57, 0.01, 0.01, 0.02, 0.01, 0.01, 0.01, 0.01),
    ),
    "stage": (("1", "2", "3", "9"), (0.30, 0.35, 0.30, 0.05)),
    "radiation_sequence": (("0", "1", "2", "3", "9"), (0.60, 0.12, 0.20, 0.05, 0.03)),
}

#: fraction of tumors under 40mm, by class (survivors first)
TUMOR_SMALL_FRACTION = (0.70, 0.45)


@dataclass(frozen=True)
class PlantedRule:
    """A condition the cohort is generated to satisfy.

    ``fidelity`` is the precision of the condition (fraction of
    indicator carriers in the target class); ``recall`` is its coverage
    of the target class. fidelity=1, recall=1 makes the indicator
    biconditional with the class.
    """

    feature: str
    value: str
    fidelity: float = 1.0
    recall: float = 1.0

    def __post_init__(self):
        if not 0.5 <= self.fidelity <= 1.0:
            raise ValueError("rule fidelity must be in [0.5, 1]")
        if not 0.0 < self.recall <= 1.0:
            raise ValueError("rule recall must be in (0, 1]")
        if self.feature not in FIELD_NOISE:
            raise ValueError(f"unknown rule feature {self.feature!r}")
        if self.value not in FIELD_NOISE[self.feature][0]:
            raise ValueError(f"value {self.value!r} not in {self.feature} domain")

    def name(self) -> str:
        return f"{self.feature}={self.value}"


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int
    n_records: int
    year_range: tuple[int, int] = (1988, 1999)
    survivor_fraction: float = 0.0823
    per_year_mst_targets: dict[int, int] | None = None
    planted_rules: tuple[PlantedRule, ...] = ()
    missing_rate: float = 0.0
    malformed_line_rate: float = 0.0
    followup_end_year: int = 2003

    def __post_init__(self):
        if self.n_records < 0:
            raise ValueError("n_records must be >= 0")
        if self.year_range[0] > self.year_range[1]:
            raise ValueError("empty year range")
        for name, value in (
            ("survivor_fraction", self.survivor_fraction),
            ("missing_rate", self.missing_rate),
            ("malformed_line_rate", self.malformed_line_rate),
        ):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        features = [r.feature for r in self.planted_rules]
        if len(features) != len(set(features)):
            raise ValueError("planted rules must target distinct features")
        if sum(r.recall for r in self.planted_rules) > 1.0 + 1e-12:
            raise ValueError("planted rule recalls exceed the survivor mass")

    def false_indicator_rates(self) -> tuple[float, ...]:
        """Per-rule indicator probability for the complement class.

        Chosen so the indicator's precision equals the rule fidelity
        given the survivor fraction.
        """
        pi = self.survivor_fraction
        rates = []
        for rule in self.planted_rules:
            if pi >= 1.0 or pi == 0.0:
                rates.append(0.0)
            else:
                rates.append(
                    pi * rule.recall * (1.0 - rule.fidelity) / (rule.fidelity * (1.0 - pi))
                )
        if sum(rates) > 1.0:
            raise ValueError("rule false-indicator rates exceed 1; lower recalls")
        return tuple(rates)


@dataclass
class GroundTruth:
    """Per-record truth plus cohort-level aggregates."""

    survived: np.ndarray  # bool
    rule_index: np.ndarray  # int8, -1 when no rule fired
    months: np.ndarray  # int32
    years: np.ndarray  # int32
    causes: list[str]  # "" for survivors
    rule_names: tuple[str, ...]
    defects: list[tuple[str, int, str]] = field(default_factory=list)

    def n_records(self) -> int:
        return int(self.survived.shape[0])

    def survivor_count(self) -> int:
        return int(self.survived.sum())

    def per_year_medians(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for year in sorted(set(int(y) for y in self.years)):
            out[year] = median([int(m) for m in self.months[self.years == year]])
        return out

    def tsv_lines(self) -> list[str]:
        lines = ["record_index\ttrue_class\tplanted_rule\tsurvival_months\tvital\tcause\tyear"]
        for i in range(self.n_records()):
            rule = self.rule_names[self.rule_index[i]] if self.rule_index[i] >= 0 else "-"
            vital = "alive" if self.survived[i] else "dead"
            cause = self.causes[i] if self.causes[i] else "-"
            lines.append(
                f"{i}\t{1 if self.survived[i] else 0}\t{rule}"
                f"\t{int(self.months[i])}\t{vital}\t{cause}\t{int(self.years[i])}"
            )
        return lines


def _noise_choice(rng, feature: str, count: int, reserved: str | None):
    values, weights = FIELD_NOISE[feature]
    if reserved is not None:
        keep = [i for i, v in enumerate(values) if v != reserved]
        values = tuple(values[i] for i in keep)
        total = sum(weights[i] for i in keep)
        weights = tuple(weights[i] / total for i in keep)
    idx = rng.choice(len(values), size=count, p=weights)
    return np.array(values, dtype="U4")[idx]


def _generate_chunk(config: GeneratorConfig, count: int, chunk_index: int):
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(chunk_index,)))
    y0, y1 = config.year_range
    years = rng.integers(y0, y1 + 1, count).astype(np.int32)

    survived = rng.random(count) < config.survivor_fraction
    # five-year survival is only observable with >= 60 months of follow-up
    survived &= years <= config.followup_end_year - 4

    rules = config.planted_rules
    rule_index = np.full(count, -1, dtype=np.int8)
    rule_u = rng.random(count)
    rule_v = rng.random(count)
    if rules:
        beta = config.false_indicator_rates()
        cum_r = 0.0
        cum_b = 0.0
        for i, rule in enumerate(rules):
            hit_s = survived & (cum_r <= rule_u) & (rule_u < cum_r + rule.recall)
            hit_n = ~survived & (cum_b <= rule_v) & (rule_v < cum_b + beta[i])
            rule_index[hit_s | hit_n] = i
            cum_r += rule.recall
            cum_b += beta[i]

    ages = rng.integers(1, 107, count)

    reserved = {rule.feature: rule.value for rule in rules}
    columns: dict[str, np.ndarray] = {}
    for feature in FIELD_NOISE:
        col = _noise_choice(rng, feature, count, reserved.get(feature))
        for i, rule in enumerate(rules):
            if rule.feature == feature:
                col = col.copy()
                col[rule_index == i] = rule.value
        columns[feature] = col

    tumor_u = rng.random(count)
    tumor_small = rng.integers(1, 40, count)
    tumor_large = rng.integers(40, 131, count)
    p_small = np.where(survived, TUMOR_SMALL_FRACTION[0], TUMOR_SMALL_FRACTION[1])
    tumor = np.where(tumor_u < p_small, tumor_small, tumor_large).astype(np.int32)

    # survivors: uniform over the observable window, capped for sanity
    hi = np.minimum((config.followup_end_year - years) * 12 + 12, 119)
    hi = np.maximum(hi, 60)
    surv_u = rng.random(count)
    surv_months = (60 + np.floor(surv_u * (hi - 60 + 1))).astype(np.int32)

    # non-survivors: integer months with an exponential profile whose
    # median tracks the per-year target (default 7); capped at both the
    # five-year threshold and the observable follow-up window
    targets = config.per_year_mst_targets or {}
    t = np.array([targets.get(int(y), 7) for y in years], dtype=np.float64)
    expo = rng.exponential(1.0, count)
    ns_cap = np.minimum(59, (config.followup_end_year - years) * 12 + 12)
    ns_months = np.clip(np.floor(expo * t / math.log(2)), 0, ns_cap).astype(np.int32)

    months = np.where(survived, surv_months, ns_months)
    cause_idx = rng.integers(0, len(LUNG_CAUSE_CODES), count)

    return {
        "years": years,
        "survived": survived,
        "rule_index": rule_index,
        "ages": ages.astype(np.int32),
        "columns": columns,
        "tumor": tumor,
        "months": months,
        "cause_idx": cause_idx,
    }


def _force_medians(months: np.ndarray, years: np.ndarray, survived: np.ndarray,
                   targets: dict[int, int]) -> None:
    """Rewrite just enough non-survivor months so each year's median is exact.

    Converts values to the target from whichever side of it has excess
    mass; survivor months (>= 60) are never touched. Deterministic: the
    choice of converted elements depends only on values and positions.
    """
    for year, target in sorted(targets.items()):
        idx = np.nonzero(years == year)[0]
        n = idx.shape[0]
        if n == 0:
            continue
        limit = (n - 1) // 2
        vals = months[idx]

        lt = idx[vals < target]
        excess = lt.shape[0] - limit
        if excess > 0:
            order = np.argsort(months[lt], kind="stable")
            months[lt[order[-excess:]]] = target

        vals = months[idx]
        gt_total = int((vals > target).sum())
        excess = gt_total - limit
        if excess > 0:
            convertible = idx[(vals > target) & ~survived[idx]]
            if convertible.shape[0] < excess:
                raise ValueError(
                    f"year {year}: cannot force median {target} "
                    f"(too many survivor months above it)"
                )
            order = np.argsort(months[convertible], kind="stable")
            months[convertible[order[:excess]]] = target

        got = median([int(m) for m in months[idx]])
        if got != target:
            raise AssertionError(f"median forcing failed for {year}: {got} != {target}")


def generate(config: GeneratorConfig) -> tuple[list[str], GroundTruth]:
    """Emit fixed-width data lines and the matching ground-truth manifest."""
    n = config.n_records
    chunks = [
        _generate_chunk(config, min(CHUNK, n - start), start // CHUNK)
        for start in range(0, n, CHUNK)
    ]
    if not chunks:
        empty = np.array([], dtype=np.int32)
        truth = GroundTruth(
            empty.astype(bool), empty.astype(np.int8), empty, empty, [],
            tuple(r.name() for r in config.planted_rules),
        )
        return [], truth

    years = np.concatenate([c["years"] for c in chunks])
    survived = np.concatenate([c["survived"] for c in chunks])
    rule_index = np.concatenate([c["rule_index"] for c in chunks])
    ages = np.concatenate([c["ages"] for c in chunks])
    tumor = np.concatenate([c["tumor"] for c in chunks])
    months = np.concatenate([c["months"] for c in chunks])
    cause_idx = np.concatenate([c["cause_idx"] for c in chunks])
    columns = {
        f: np.concatenate([c["columns"][f] for c in chunks]) for f in FIELD_NOISE
    }

    if config.per_year_mst_targets:
        _force_medians(months, years, survived, config.per_year_mst_targets)

    cause_pool = np.array([c.ljust(4) for c in LUNG_CAUSE_CODES], dtype="U4")
    causes = np.where(survived, "    ", cause_pool[cause_idx])

    def zfill(arr: np.ndarray, width: int) -> np.ndarray:
        return np.char.zfill(arr.astype(f"U{width}"), width)

    def pad(arr: np.ndarray, width: int) -> np.ndarray:
        return np.char.ljust(arr.astype(f"U{width}"), width)

    parts = [
        zfill(ages, 3),
        pad(columns["race"], 2),
        pad(columns["marital_status"], 1),
        pad(columns["primary_site"], 4),
        pad(columns["histologic_type"], 4),
        pad(columns["behavior"], 1),
        zfill(tumor, 3),
        pad(columns["grade"], 1),
        pad(columns["extension"], 2),
        pad(columns["lymph_node_involvement"], 1),
        pad(columns["surgery_site"], 2),
        pad(columns["radiation"], 1),
        pad(columns["stage"], 1),
        pad(columns["radiation_sequence"], 1),
        zfill(months, 4),
        np.where(survived, "1", "2"),
        pad(causes, 4),
        zfill(years, 4),
    ]
    joined = parts[0]
    for part in parts[1:]:
        joined = np.char.add(joined, part)

    truth = GroundTruth(
        survived,
        rule_index,
        months.astype(np.int32),
        years,
        [c.strip() for c in causes],
        tuple(r.name() for r in config.planted_rules),
    )
    return joined.tolist(), truth


def inject_noise(
    lines: Sequence[str],
    config: GeneratorConfig,
    schema: Schema,
    manifest: GroundTruth | None = None,
) -> list[str]:
    """Replace values with sentinels and truncate lines, per config rates.

    Every injected defect is recorded in the manifest ledger, so parse
    and preprocessing counts can be checked exactly. Draw order: the
    full missing-value mask, then the malformed-line mask.
    """
    out = list(lines)
    n = len(out)
    defects: list[tuple[str, int, str]] = []
    rng = np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(_NOISE_SPAWN_KEY,))
    )
    fields = schema.fields
    if config.missing_rate > 0 and n:
        mask = rng.random((n, len(fields))) < config.missing_rate
        for i, j in np.argwhere(mask):
            fspec = fields[j]
            declared = sorted(s for s in fspec.missing_sentinels if s != "<blank>")
            sentinel = declared[0].rjust(fspec.width) if declared else " " * fspec.width
            line = out[i]
            out[i] = line[: fspec.offset] + sentinel + line[fspec.offset + fspec.width :]
            defects.append(("missing", int(i), fspec.name))
    if config.malformed_line_rate > 0 and n:
        short = rng.random(n) < config.malformed_line_rate
        for i in np.nonzero(short)[0]:
            out[i] = out[i][: schema.record_length // 2]
            defects.append(("malformed", int(i), ""))
    if manifest is not None:
        manifest.defects.extend(defects)
    return out


def write_lines(lines: Sequence[str], path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def write_manifest(truth: GroundTruth, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for line in truth.tsv_lines():
            fh.write(line)
            fh.write("\n")


def write_defects(truth: GroundTruth, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("kind\trecord_index\tfield\n")
        for kind, index, fname in truth.defects:
            fh.write(f"{kind}\t{index}\t{fname}\n")
