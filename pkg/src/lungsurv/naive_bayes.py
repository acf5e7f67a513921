"""Categorical Naive Bayes trained by frequency counting.

Priors are unsmoothed class frequencies; likelihoods get Laplace
smoothing over each feature's observed value set. Scoring runs in log
space: with ~13 features the raw likelihood product underflows
fixed-precision arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .encoding import encode_dataset, prepare_features
from .preprocess import MISSING

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class NaiveBayesModel:
    class_values: tuple
    priors: tuple[float, ...]
    # feature -> value -> per-class smoothed likelihood (class order)
    likelihoods: dict[str, dict[str, tuple[float, ...]]]
    # feature -> observed values plus Missing; sized for the unseen fallback
    value_domains: dict[str, tuple[str, ...]]
    smoothing_alpha: float

    def fallback(self, feature: str) -> float:
        return 1.0 / len(self.value_domains[feature])


def nb_train(
    instances: Sequence, alpha: float = 1.0, class_order: tuple | None = None
) -> NaiveBayesModel:
    """Single counting pass over the training data."""
    if not instances:
        raise ValueError("cannot train on an empty dataset")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    coded = encode_dataset(instances, class_order)
    n = coded.n_instances()
    n_classes = len(coded.class_values)
    class_totals = np.bincount(coded.class_codes, minlength=n_classes).astype(np.int64)
    priors = tuple(int(t) / n for t in class_totals)

    rows = np.arange(n, dtype=np.int64)
    likelihoods: dict[str, dict[str, tuple[float, ...]]] = {}
    domains: dict[str, tuple[str, ...]] = {}
    for j, feature in enumerate(coded.feature_names):
        vocab = coded.vocabs[j]
        counts = kernels.value_class_counts(
            np.ascontiguousarray(coded.codes[:, j]),
            coded.class_codes,
            rows,
            len(vocab),
            n_classes,
        )
        denom = [int(t) + alpha * len(vocab) for t in class_totals]
        table: dict[str, tuple[float, ...]] = {}
        for vi, value in enumerate(vocab):
            table[value] = tuple(
                (int(counts[vi, c]) + alpha) / denom[c] if denom[c] else 0.0
                for c in range(n_classes)
            )
        likelihoods[feature] = table
        domain = vocab if MISSING in vocab else vocab + (MISSING,)
        domains[feature] = domain
    return NaiveBayesModel(coded.class_values, priors, likelihoods, domains, alpha)


def nb_predict(model: NaiveBayesModel, features: Mapping[str, str]) -> dict:
    """Posterior class distribution for a feature mapping (total function)."""
    feats = prepare_features(features)
    n_classes = len(model.class_values)
    scores = [
        math.log(p) if p > 0 else _NEG_INF for p in model.priors
    ]
    for feature, table in model.likelihoods.items():
        if feature not in feats:
            continue
        row = table.get(feats[feature])
        if row is None:
            uniform = model.fallback(feature)
            row = (uniform,) * n_classes
        for c in range(n_classes):
            like = row[c]
            scores[c] += math.log(like) if like > 0 else _NEG_INF

    top = max(scores)
    if top == _NEG_INF:
        return {c: 1.0 / n_classes for c in model.class_values}
    weights = [math.exp(s - top) for s in scores]
    norm = sum(weights)
    return {c: w / norm for c, w in zip(model.class_values, weights)}


def nb_classify(model: NaiveBayesModel, features: Mapping[str, str]):
    """Argmax of the posterior; exact ties go to the earlier-declared class."""
    distribution = nb_predict(model, features)
    best = model.class_values[0]
    best_p = distribution[best]
    for c in model.class_values[1:]:
        if distribution[c] > best_p:
            best, best_p = c, distribution[c]
    return best


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _class_token(value) -> str:
    token = str(value)
    if any(ch.isspace() for ch in token):
        raise ValueError(f"class value {value!r} is not token-safe")
    return token


def _parse_class_token(token: str):
    if token == "True":
        return True
    if token == "False":
        return False
    return token


def serialize_nb(model: NaiveBayesModel) -> str:
    """Versioned plain-text dump; floats at 17 significant digits round-trip exactly."""
    lines = ["naive-bayes v1"]
    lines.append("alpha " + _fmt(model.smoothing_alpha))
    lines.append("classes " + " ".join(_class_token(c) for c in model.class_values))
    lines.append("priors " + " ".join(_fmt(p) for p in model.priors))
    for feature in model.likelihoods:
        domain = model.value_domains[feature]
        lines.append(f"feature {feature} domain " + " ".join(domain))
        for value, row in model.likelihoods[feature].items():
            lines.append(f"value {value} " + " ".join(_fmt(p) for p in row))
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_nb(text: str) -> NaiveBayesModel:
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or lines[0] != "naive-bayes v1":
        raise ValueError("not a naive-bayes v1 document")
    if lines[-1] != "end":
        raise ValueError("truncated model file")
    alpha = float(lines[1].split(" ", 1)[1])
    class_values = tuple(_parse_class_token(t) for t in lines[2].split()[1:])
    priors = tuple(float(t) for t in lines[3].split()[1:])
    likelihoods: dict[str, dict[str, tuple[float, ...]]] = {}
    domains: dict[str, tuple[str, ...]] = {}
    current: str | None = None
    for line in lines[4:-1]:
        parts = line.split()
        if parts[0] == "feature":
            current = parts[1]
            if parts[2] != "domain":
                raise ValueError(f"malformed feature line: {line!r}")
            domains[current] = tuple(parts[3:])
            likelihoods[current] = {}
        elif parts[0] == "value":
            if current is None:
                raise ValueError("value line before any feature line")
            likelihoods[current][parts[1]] = tuple(float(t) for t in parts[2:])
        else:
            raise ValueError(f"unexpected line in model file: {line!r}")
    return NaiveBayesModel(class_values, priors, likelihoods, domains, alpha)


def save_nb(model: NaiveBayesModel, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(serialize_nb(model))


def load_nb(path) -> NaiveBayesModel:
    with open(path, "r", encoding="ascii") as fh:
        return parse_nb(fh.read())
