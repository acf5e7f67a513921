"""Classifier-input encoding shared by both models.

Tumor size stays an exact integer through preprocessing and is
discretized here, at classifier-input time, so both classifiers see the
identical feature space. Everything else is already categorical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .preprocess import MISSING

TUMOR_SIZE_FIELD = "tumor_size_mm"
TUMOR_SIZE_BINS = ("0-9", "10-19", "20-29", "30-39", "40-59", "60+", MISSING)


def tumor_size_bin(value: str) -> str:
    """Discretize a millimeter value (as text) onto the shared bins."""
    if value == MISSING:
        return MISSING
    mm = int(value)
    if mm < 10:
        return "0-9"
    if mm < 20:
        return "10-19"
    if mm < 30:
        return "20-29"
    if mm < 40:
        return "30-39"
    if mm < 60:
        return "40-59"
    return "60+"


def prepare_features(features: Mapping[str, str]) -> dict[str, str]:
    """Feature mapping as the classifiers consume it."""
    out = dict(features)
    if TUMOR_SIZE_FIELD in out:
        out[TUMOR_SIZE_FIELD] = tumor_size_bin(out[TUMOR_SIZE_FIELD])
    return out


@dataclass(frozen=True)
class CodedDataset:
    """Integer-coded feature matrix for the counting kernels.

    Feature columns follow ``feature_names`` (sorted); ``vocabs[j]``
    lists column j's observed values in sorted order, and codes are
    indices into it. Class codes index ``class_values``.
    """

    feature_names: tuple[str, ...]
    vocabs: tuple[tuple[str, ...], ...]
    codes: np.ndarray  # (n, F) int32
    class_values: tuple
    class_codes: np.ndarray  # (n,) int32

    def n_instances(self) -> int:
        return self.codes.shape[0]

    def vocab_index(self, feature: str) -> int:
        return self.feature_names.index(feature)


def declared_class_order(labels: Sequence) -> tuple:
    """Class order: (False, True) for booleans, first appearance otherwise."""
    distinct = list(dict.fromkeys(labels))
    if all(isinstance(v, (bool, np.bool_)) for v in distinct):
        return tuple(v for v in (False, True) if v in distinct)
    return tuple(distinct)


def encode_dataset(
    instances: Sequence, class_order: tuple | None = None
) -> CodedDataset:
    """Integer-code labeled instances (anything with .features and .survived)."""
    if not instances:
        raise ValueError("cannot encode an empty dataset")
    prepared = [prepare_features(inst.features) for inst in instances]
    labels = [inst.survived for inst in instances]
    feature_names = tuple(sorted(prepared[0]))
    for feats in prepared:
        if tuple(sorted(feats)) != feature_names:
            raise ValueError("instances disagree on feature names")

    if class_order is None:
        class_order = declared_class_order(labels)
    class_index = {c: i for i, c in enumerate(class_order)}

    vocabs = []
    columns = []
    for name in feature_names:
        values = sorted({feats[name] for feats in prepared})
        index = {v: i for i, v in enumerate(values)}
        vocabs.append(tuple(values))
        columns.append(np.fromiter((index[f[name]] for f in prepared), np.int32))
    codes = np.column_stack(columns) if columns else np.empty((len(prepared), 0), np.int32)
    class_codes = np.fromiter((class_index[l] for l in labels), np.int32)
    return CodedDataset(feature_names, tuple(vocabs), codes, tuple(class_order), class_codes)
