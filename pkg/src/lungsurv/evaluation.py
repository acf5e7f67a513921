"""Classification metrics (CCI, Kappa, RMSE) and the year-split
experiment harness comparing the two classifiers.

ICI is always recomputed as total minus CCI rather than taken from any
external tally, so the count pair is arithmetically consistent by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from . import naive_bayes as nb
from . import tree as dtree
from .encoding import declared_class_order
from .labeling import LabeledInstance
from .stats import half_up, percent_pair

NAIVE_BAYES = "naive_bayes"
DECISION_TREE = "decision_tree"
CLASSIFIER_NAMES = (NAIVE_BAYES, DECISION_TREE)


class EmptyPartitionError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    class_values: tuple
    counts: tuple[tuple[int, ...], ...]  # [true][predicted]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def diagonal(self) -> int:
        return sum(self.counts[i][i] for i in range(len(self.class_values)))

    def row_totals(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.counts)

    def col_totals(self) -> tuple[int, ...]:
        k = len(self.class_values)
        return tuple(sum(self.counts[i][j] for i in range(k)) for j in range(k))


def confusion(predictions: Sequence, truths: Sequence, class_order: tuple | None = None) -> ConfusionMatrix:
    if len(predictions) != len(truths):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions vs {len(truths)} truths"
        )
    if class_order is None:
        class_order = declared_class_order(list(truths) + list(predictions))
    index = {c: i for i, c in enumerate(class_order)}
    k = len(class_order)
    counts = [[0] * k for _ in range(k)]
    for pred, true in zip(predictions, truths):
        counts[index[true]][index[pred]] += 1
    return ConfusionMatrix(tuple(class_order), tuple(tuple(row) for row in counts))


def cci(matrix: ConfusionMatrix) -> tuple[int, float]:
    """Correctly classified instances: count and half-up two-decimal percent."""
    total = matrix.total
    if total < 1:
        raise ValueError("cci of an empty matrix")
    correct = matrix.diagonal()
    return correct, half_up(correct / total * 100, 2)


def kappa(matrix: ConfusionMatrix) -> float:
    """Chance-corrected agreement between predictions and truths."""
    total = matrix.total
    if total < 1:
        raise ValueError("kappa of an empty matrix")
    p_o = matrix.diagonal() / total
    rows = matrix.row_totals()
    cols = matrix.col_totals()
    p_e = sum((r / total) * (c / total) for r, c in zip(rows, cols))
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def rmse(
    probability_predictions: Sequence[Mapping], truths: Sequence, class_order: tuple
) -> float:
    """Root mean square error over all N*K probability entries vs one-hot truth."""
    if len(probability_predictions) != len(truths):
        raise ValueError("length mismatch between predictions and truths")
    if not truths:
        raise ValueError("rmse of empty prediction set")
    k = len(class_order)
    total = 0.0
    for dist, true in zip(probability_predictions, truths):
        mass = 0.0
        for c in class_order:
            p = dist[c]
            if p < -1e-12 or p > 1 + 1e-12:
                raise ValueError(f"malformed probability {p} for class {c!r}")
            mass += p
            y = 1.0 if c == true else 0.0
            total += (p - y) ** 2
        if abs(mass - 1.0) > 1e-9:
            raise ValueError(f"distribution sums to {mass}, not 1")
    return math.sqrt(total / (len(truths) * k))


@dataclass(frozen=True)
class EvaluationReport:
    classifier: str
    cci_count: int
    cci_percent: float
    ici_count: int
    ici_percent: float
    kappa: float
    rmse: float
    total: int
    per_class: dict
    matrix: ConfusionMatrix


def evaluate_predictions(
    classifier: str,
    predictions: Sequence,
    distributions: Sequence[Mapping],
    truths: Sequence,
    class_order: tuple,
) -> EvaluationReport:
    matrix = confusion(predictions, truths, class_order)
    correct = matrix.diagonal()
    total = matrix.total
    incorrect = total - correct
    if correct >= incorrect:
        ici_pct, cci_pct = percent_pair(incorrect, correct)
    else:
        cci_pct, ici_pct = percent_pair(correct, incorrect)
    per_class = {}
    rows = matrix.row_totals()
    cols = matrix.col_totals()
    for i, c in enumerate(class_order):
        tp = matrix.counts[i][i]
        precision = tp / cols[i] if cols[i] else 0.0
        recall = tp / rows[i] if rows[i] else 0.0
        per_class[c] = (precision, recall)
    return EvaluationReport(
        classifier=classifier,
        cci_count=correct,
        cci_percent=cci_pct,
        ici_count=incorrect,
        ici_percent=ici_pct,
        kappa=kappa(matrix),
        rmse=rmse(distributions, truths, class_order),
        total=total,
        per_class=per_class,
        matrix=matrix,
    )


def evaluate_model(
    classifier: str,
    classify: Callable,
    predict: Callable,
    instances: Sequence[LabeledInstance],
    class_order: tuple,
) -> EvaluationReport:
    predictions = [classify(inst.features) for inst in instances]
    distributions = [predict(inst.features) for inst in instances]
    truths = [inst.survived for inst in instances]
    return evaluate_predictions(classifier, predictions, distributions, truths, class_order)


@dataclass(frozen=True)
class ExperimentSpec:
    identifier: str
    train_years: tuple[int, int]  # inclusive
    target_year: int
    classifiers: tuple[str, ...] = CLASSIFIER_NAMES

    def __post_init__(self):
        first, last = self.train_years
        if first > last:
            raise ValueError(f"{self.identifier}: empty train range")
        if first <= self.target_year <= last:
            raise ValueError(f"{self.identifier}: target year inside train range")
        for name in self.classifiers:
            if name not in CLASSIFIER_NAMES:
                raise ValueError(f"unknown classifier {name!r}")

    def n_train_years(self) -> int:
        return self.train_years[1] - self.train_years[0] + 1


#: the three published train/target splits
DEFAULT_EXPERIMENTS = (
    ExperimentSpec("T93", (1988, 1992), 1993),
    ExperimentSpec("T99", (1992, 1998), 1999),
    ExperimentSpec("T98", (1988, 1997), 1998),
)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    reports: dict[str, EvaluationReport]
    models: dict[str, object] = field(default_factory=dict)

    def winner(self) -> str:
        best_name = ""
        best_pct = -1.0
        tie = False
        for name, report in self.reports.items():
            if report.cci_percent > best_pct:
                best_name, best_pct, tie = name, report.cci_percent, False
            elif report.cci_percent == best_pct:
                tie = True
        return "tie" if tie else best_name


def run_experiment(
    spec: ExperimentSpec,
    labeled: Sequence[LabeledInstance],
    tree_params: dtree.TreeParams | None = None,
    alpha: float = 1.0,
) -> ExperimentResult:
    """Train on the spec's year range, evaluate on the target year only."""
    first, last = spec.train_years
    train = [i for i in labeled if first <= i.diagnosis_year <= last]
    target = [i for i in labeled if i.diagnosis_year == spec.target_year]
    if not train:
        raise EmptyPartitionError(f"{spec.identifier}: no instances in {first}-{last}")
    if not target:
        raise EmptyPartitionError(
            f"{spec.identifier}: no instances in target year {spec.target_year}"
        )
    # provenance check: the target year must never leak into training
    assert all(i.diagnosis_year != spec.target_year for i in train)

    class_order = (False, True)
    reports: dict[str, EvaluationReport] = {}
    models: dict[str, object] = {}
    if NAIVE_BAYES in spec.classifiers:
        model = nb.nb_train(train, alpha=alpha, class_order=class_order)
        models[NAIVE_BAYES] = model
        reports[NAIVE_BAYES] = evaluate_model(
            NAIVE_BAYES,
            lambda f: nb.nb_classify(model, f),
            lambda f: nb.nb_predict(model, f),
            target,
            class_order,
        )
    if DECISION_TREE in spec.classifiers:
        params = tree_params or dtree.TreeParams()
        grown = dtree.build_tree(train, params, class_order=class_order)
        pruned = dtree.prune(grown, params.pruning_confidence)
        models[DECISION_TREE] = pruned
        reports[DECISION_TREE] = evaluate_model(
            DECISION_TREE,
            lambda f: dtree.tree_classify(pruned, f),
            lambda f: dtree.tree_predict(pruned, f),
            target,
            class_order,
        )
    return ExperimentResult(spec, reports, models)


def render_report(report: EvaluationReport, spec: ExperimentSpec | None = None) -> str:
    lines = []
    if spec is not None:
        first, last = spec.train_years
        lines.append(
            f"Experiment {spec.identifier}: train {first}-{last} "
            f"({spec.n_train_years()} years) -> target {spec.target_year}"
        )
    lines.append(f"Classifier: {report.classifier}")
    lines.append(f"CCI    {report.cci_count:,} ({report.cci_percent:.2f}%)")
    lines.append(f"ICI    {report.ici_count:,} ({report.ici_percent:.2f}%)")
    lines.append(f"Kappa  {report.kappa:.5f}")
    lines.append(f"RMSE   {report.rmse:.5f}")
    lines.append(f"Total  {report.total:,}")
    for c, (precision, recall) in report.per_class.items():
        lines.append(
            f"class {c}: precision {precision:.4f} recall {recall:.4f}"
        )
    return "\n".join(lines) + "\n"


def render_comparison(results: Sequence[ExperimentResult]) -> str:
    """The accuracy-comparison table across experiments."""
    header = (
        f"{'ID':<6}{'PredictionYear':<16}{'TrainYears':<12}"
        f"{NAIVE_BAYES:<16}{DECISION_TREE:<16}{'Winner':<14}"
    )
    lines = [header]
    for result in results:
        spec = result.spec
        cells = []
        for name in CLASSIFIER_NAMES:
            report = result.reports.get(name)
            cells.append(
                f"{half_up(report.cci_count / report.total * 100, 4):.4f}%"
                if report
                else "-"
            )
        lines.append(
            f"{spec.identifier:<6}{spec.target_year:<16}{spec.n_train_years():<12}"
            f"{cells[0]:<16}{cells[1]:<16}{result.winner():<14}"
        )
    return "\n".join(lines) + "\n"


def metrics_tsv_rows(results: Sequence[ExperimentResult]) -> list[str]:
    """Machine-readable rows: one per (experiment, classifier)."""
    rows = [
        "experiment\tclassifier\tcci_count\tcci_pct\tici_count\tici_pct\tkappa\trmse\ttotal"
    ]
    for result in results:
        for name in CLASSIFIER_NAMES:
            report = result.reports.get(name)
            if report is None:
                continue
            cci_pct4 = half_up(report.cci_count / report.total * 100, 4)
            ici_pct4 = half_up(report.ici_count / report.total * 100, 4)
            rows.append(
                f"{result.spec.identifier}\t{name}\t{report.cci_count}\t{cci_pct4:.4f}"
                f"\t{report.ici_count}\t{ici_pct4:.4f}"
                f"\t{report.kappa:.6f}\t{report.rmse:.6f}\t{report.total}"
            )
    return rows
