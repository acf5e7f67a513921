"""C4.5-style decision tree: gain-ratio splits on categorical features,
multiway branching, bottom-up pessimistic pruning.

Induction runs over integer-coded columns so the per-node counting is a
kernel call; every gain/entropy figure is then computed in plain Python
from the exact integer counts, keeping results identical across kernel
backends.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from statistics import NormalDist
from typing import Mapping, Sequence, Union

import numpy as np

from . import kernels
from .encoding import declared_class_order, encode_dataset, prepare_features


@dataclass(frozen=True)
class TreeParams:
    min_leaf_instances: int = 2
    pruning_confidence: float = 0.25
    use_gain_ratio: bool = True

    def __post_init__(self):
        if not 0 < self.pruning_confidence < 0.5:
            raise ValueError("pruning_confidence must be in (0, 0.5)")
        if self.min_leaf_instances < 1:
            raise ValueError("min_leaf_instances must be >= 1")


@dataclass(frozen=True)
class Leaf:
    class_value: object
    counts: tuple[int, ...]
    n: int


@dataclass(frozen=True)
class Internal:
    feature: str
    children: dict[str, "TreeNode"]
    counts: tuple[int, ...]
    n: int
    majority: object


TreeNode = Union[Leaf, Internal]


@dataclass(frozen=True)
class TreeModel:
    root: TreeNode
    class_values: tuple

    def size(self) -> int:
        return _count_nodes(self.root)


def _count_nodes(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 1
    return 1 + sum(_count_nodes(c) for c in node.children.values())


def entropy(class_counts) -> float:
    """Shannon entropy in bits; 0*log2(0) is 0. Rejects all-zero counts."""
    if isinstance(class_counts, Mapping):
        counts = list(class_counts.values())
    else:
        counts = list(class_counts)
    total = sum(counts)
    if total <= 0:
        raise ValueError("entropy of empty class counts")
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def _partition_by_feature(instances: Sequence, feature: str):
    partitions: dict[str, list] = {}
    for inst in instances:
        value = prepare_features(inst.features)[feature]
        partitions.setdefault(value, []).append(inst)
    return partitions


def _class_counts(instances: Sequence, class_order: tuple) -> list[int]:
    counts = [0] * len(class_order)
    index = {c: i for i, c in enumerate(class_order)}
    for inst in instances:
        counts[index[inst.survived]] += 1
    return counts


def info_gain(instances: Sequence, feature: str, class_order: tuple | None = None) -> float:
    """Entropy decrease from partitioning on a feature (Missing is a value)."""
    if not instances:
        raise ValueError("info_gain of empty instance set")
    if class_order is None:
        class_order = declared_class_order([i.survived for i in instances])
    total = len(instances)
    h = entropy(_class_counts(instances, class_order))
    weighted = 0.0
    partitions = _partition_by_feature(instances, feature)
    for value in sorted(partitions):
        subset = partitions[value]
        weighted += (len(subset) / total) * entropy(_class_counts(subset, class_order))
    return h - weighted


def gain_ratio(
    instances: Sequence, feature: str, class_order: tuple | None = None
) -> float | None:
    """IG / SplitInfo; None when the feature induces a single partition."""
    partitions = _partition_by_feature(instances, feature)
    if len(partitions) < 2:
        return None
    total = len(instances)
    split_info = 0.0
    for value in sorted(partitions):
        frac = len(partitions[value]) / total
        split_info -= frac * math.log2(frac)
    return info_gain(instances, feature, class_order) / split_info


def _entropy_ints(counts: Sequence[int], total: int) -> float:
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def _split_scores(matrix: np.ndarray, node_counts: Sequence[int], n: int):
    """(info gain, split info, non-empty partition count) from a count matrix."""
    h_node = _entropy_ints(node_counts, n)
    weighted = 0.0
    split_info = 0.0
    nonempty = 0
    for vi in range(matrix.shape[0]):
        row = [int(x) for x in matrix[vi]]
        nv = sum(row)
        if nv == 0:
            continue
        nonempty += 1
        frac = nv / n
        weighted += frac * _entropy_ints(row, nv)
        split_info -= frac * math.log2(frac)
    return h_node - weighted, split_info, nonempty


def _majority(counts: Sequence[int], class_values: tuple):
    best = 0
    for c in range(1, len(counts)):
        if counts[c] > counts[best]:
            best = c
    return class_values[best]


def build_tree(
    instances: Sequence,
    params: TreeParams | None = None,
    class_order: tuple | None = None,
) -> TreeModel:
    """Grow an unpruned tree.

    Splits on the admissible feature (positive gain, >= 2 non-empty
    partitions, unused on the path) maximizing gain ratio; ties go to
    the lexicographically smallest feature name. A child exists for
    every value in the feature's training-time domain; empty ones become
    leaves carrying the parent majority.
    """
    if not instances:
        raise ValueError("cannot build a tree from no instances")
    params = params or TreeParams()
    coded = encode_dataset(instances, class_order)
    n_classes = len(coded.class_values)
    columns = [np.ascontiguousarray(coded.codes[:, j]) for j in range(len(coded.feature_names))]

    def grow(rows: np.ndarray, counts: tuple[int, ...], used: frozenset[int]) -> TreeNode:
        n = int(rows.shape[0])
        majority = _majority(counts, coded.class_values)
        if sum(1 for c in counts if c) <= 1 or n < 2 * params.min_leaf_instances:
            return Leaf(majority, counts, n)

        best_j = -1
        best_score = 0.0
        best_matrix = None
        for j, feature in enumerate(coded.feature_names):
            if j in used or len(coded.vocabs[j]) < 2:
                continue
            matrix = kernels.value_class_counts(
                columns[j], coded.class_codes, rows, len(coded.vocabs[j]), n_classes
            )
            ig, split_info, nonempty = _split_scores(matrix, counts, n)
            if nonempty < 2 or ig <= 0.0:
                continue
            score = ig / split_info if params.use_gain_ratio else ig
            if best_j < 0 or score > best_score:
                best_j, best_score, best_matrix = j, score, matrix
        if best_j < 0:
            return Leaf(majority, counts, n)

        ordered, offsets = kernels.sort_by_value(
            columns[best_j], rows, len(coded.vocabs[best_j])
        )
        children: dict[str, TreeNode] = {}
        child_used = used | {best_j}
        for vi, value in enumerate(coded.vocabs[best_j]):
            child_rows = ordered[offsets[vi] : offsets[vi + 1]]
            if child_rows.shape[0] == 0:
                children[value] = Leaf(majority, (0,) * n_classes, 0)
            else:
                child_counts = tuple(int(x) for x in best_matrix[vi])
                children[value] = grow(child_rows, child_counts, child_used)
        return Internal(
            coded.feature_names[best_j], children, counts, n, majority
        )

    all_rows = np.arange(coded.n_instances(), dtype=np.int64)
    root_counts = tuple(
        int(x) for x in np.bincount(coded.class_codes, minlength=n_classes)
    )
    return TreeModel(grow(all_rows, root_counts, frozenset()), coded.class_values)


def pessimistic_error_count(n: int, errors: int, confidence: float) -> float:
    """Upper confidence bound on leaf errors, one-sided normal approximation."""
    if n == 0:
        return 0.0
    z = NormalDist().inv_cdf(1.0 - confidence)
    f = errors / n
    z2 = z * z
    rate = (f + z2 / (2 * n) + z * math.sqrt(f * (1 - f) / n + z2 / (4 * n * n))) / (
        1 + z2 / n
    )
    return n * rate


def prune(model: TreeModel, confidence: float = 0.25) -> TreeModel:
    """Bottom-up subtree replacement: collapse a node to its majority leaf
    whenever the leaf's pessimistic error does not exceed the children's sum."""

    def walk(node: TreeNode) -> tuple[TreeNode, float]:
        if isinstance(node, Leaf):
            errors = node.n - max(node.counts) if node.n else 0
            return node, pessimistic_error_count(node.n, errors, confidence)
        pruned_children: dict[str, TreeNode] = {}
        subtree_estimate = 0.0
        for value, child in node.children.items():
            new_child, est = walk(child)
            pruned_children[value] = new_child
            subtree_estimate += est
        leaf_errors = node.n - max(node.counts)
        leaf_estimate = pessimistic_error_count(node.n, leaf_errors, confidence)
        if leaf_estimate <= subtree_estimate:
            return Leaf(node.majority, node.counts, node.n), leaf_estimate
        return (
            Internal(node.feature, pruned_children, node.counts, node.n, node.majority),
            subtree_estimate,
        )

    new_root, _ = walk(model.root)
    return TreeModel(new_root, model.class_values)


def tree_predict(model: TreeModel, features: Mapping[str, str]) -> dict:
    """Laplace-corrected class distribution at the routed leaf.

    A missing or unseen value (or a branch no training instance reached)
    falls through to the heaviest child.
    """
    feats = prepare_features(features)
    node = model.root
    while isinstance(node, Internal):
        child = None
        value = feats.get(node.feature)
        if value is not None:
            child = node.children.get(value)
        if child is None or child.n == 0:
            child = max(node.children.values(), key=lambda c: c.n)
        node = child
    k = len(model.class_values)
    return {
        c: (node.counts[i] + 1) / (node.n + k)
        for i, c in enumerate(model.class_values)
    }


def tree_classify(model: TreeModel, features: Mapping[str, str]):
    distribution = tree_predict(model, features)
    best = model.class_values[0]
    best_p = distribution[best]
    for c in model.class_values[1:]:
        if distribution[c] > best_p:
            best, best_p = c, distribution[c]
    return best


_TOKEN_RE = re.compile(r"^[^\s:()]+$")


def _token(value) -> str:
    token = str(value)
    if not _TOKEN_RE.match(token):
        raise ValueError(f"value {value!r} is not token-safe for serialization")
    return token


def _parse_class_token(token: str):
    if token == "True":
        return True
    if token == "False":
        return False
    return token


def serialize_tree(model: TreeModel) -> str:
    """Indented one-node-per-line text; exact grammar in parse_tree."""
    lines = ["c45-tree v1"]
    lines.append("classes " + " ".join(_token(c) for c in model.class_values))
    root = model.root
    if isinstance(root, Leaf):
        lines.append(
            f"leaf {_token(root.class_value)} ({'/'.join(str(c) for c in root.counts)})"
        )
    else:
        _render(root, 0, lines)
    return "\n".join(lines) + "\n"


def _render(node: Internal, depth: int, lines: list[str]) -> None:
    prefix = "|   " * depth
    feature = _token(node.feature)
    for value, child in node.children.items():
        head = f"{prefix}{feature} = {_token(value)}:"
        if isinstance(child, Leaf):
            counts = "/".join(str(c) for c in child.counts)
            lines.append(f"{head} {_token(child.class_value)} ({counts})")
        else:
            lines.append(head)
            _render(child, depth + 1, lines)


_BRANCH_RE = re.compile(
    r"^(?P<feature>[^\s:()]+) = (?P<value>[^\s:()]+):"
    r"(?: (?P<class>[^\s:()]+) \((?P<counts>[0-9/]+)\))?$"
)


def parse_tree(text: str) -> TreeModel:
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or lines[0] != "c45-tree v1":
        raise ValueError("not a c45-tree v1 document")
    class_values = tuple(_parse_class_token(t) for t in lines[1].split()[1:])
    body = lines[2:]
    if not body:
        raise ValueError("tree document has no nodes")
    if body[0].startswith("leaf "):
        match = re.match(r"^leaf (?P<class>[^\s:()]+) \((?P<counts>[0-9/]+)\)$", body[0])
        if not match:
            raise ValueError(f"malformed root leaf line: {body[0]!r}")
        counts = tuple(int(c) for c in match.group("counts").split("/"))
        root: TreeNode = Leaf(_parse_class_token(match.group("class")), counts, sum(counts))
        return TreeModel(root, class_values)

    def depth_of(line: str) -> int:
        d = 0
        while line.startswith("|   "):
            d += 1
            line = line[4:]
        return d

    def parse_block(i: int, depth: int) -> tuple[Internal, int]:
        children: dict[str, TreeNode] = {}
        feature = None
        while i < len(body) and depth_of(body[i]) == depth:
            line = body[i][4 * depth :]
            match = _BRANCH_RE.match(line)
            if not match:
                raise ValueError(f"malformed tree line: {body[i]!r}")
            if feature is None:
                feature = match.group("feature")
            elif match.group("feature") != feature:
                break
            value = match.group("value")
            if match.group("class") is not None:
                counts = tuple(int(c) for c in match.group("counts").split("/"))
                children[value] = Leaf(
                    _parse_class_token(match.group("class")), counts, sum(counts)
                )
                i += 1
            else:
                child, i = parse_block(i + 1, depth + 1)
                children[value] = child
        if feature is None:
            raise ValueError("empty branch block in tree document")
        totals = [0] * len(class_values)
        for child in children.values():
            for k, c in enumerate(child.counts):
                totals[k] += c
        counts = tuple(totals)
        node = Internal(feature, children, counts, sum(counts), _majority(counts, class_values))
        return node, i

    root, consumed = parse_block(0, 0)
    if consumed != len(body):
        raise ValueError("trailing lines after tree body")
    return TreeModel(root, class_values)


def save_tree(model: TreeModel, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(serialize_tree(model))


def load_tree(path) -> TreeModel:
    with open(path, "r", encoding="ascii") as fh:
        return parse_tree(fh.read())
