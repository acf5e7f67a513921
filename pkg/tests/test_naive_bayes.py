import math

import numpy as np
import pytest

from conftest import Instance

from lungsurv.naive_bayes import (
    nb_classify,
    nb_predict,
    nb_train,
    parse_nb,
    serialize_nb,
)
from lungsurv.preprocess import MISSING

XOR4 = [
    Instance({"x": "a"}, "+"),
    Instance({"x": "a"}, "+"),
    Instance({"x": "b"}, "-"),
    Instance({"x": "b"}, "-"),
]


def test_hand_oracle_training():
    # joint counts by hand: P(+)=2/4, P(a|+)=(2+1)/(2+2), P(a|-)=(0+1)/(2+2)
    model = nb_train(XOR4, alpha=1.0)
    assert model.class_values == ("+", "-")
    assert model.priors == (0.5, 0.5)
    assert model.likelihoods["x"]["a"] == (3 / 4, 1 / 4)
    assert model.likelihoods["x"]["b"] == (1 / 4, 3 / 4)


def test_hand_oracle_posterior():
    model = nb_train(XOR4, alpha=1.0)
    dist = nb_predict(model, {"x": "a"})
    assert dist["+"] == pytest.approx(0.75, abs=1e-12)
    assert dist["-"] == pytest.approx(0.25, abs=1e-12)


def test_single_class_prior():
    model = nb_train([Instance({"x": "a"}, "+")] * 3)
    assert model.priors == (1.0,)


def test_alpha_zero_unseen_pair():
    model = nb_train(XOR4, alpha=0.0)
    assert model.likelihoods["x"]["a"] == (1.0, 0.0)
    for table in model.likelihoods.values():
        for c in range(2):
            assert sum(row[c] for row in table.values()) == pytest.approx(1.0, abs=1e-12)


def test_likelihood_sum_invariant():
    rng = np.random.default_rng(3)
    instances = [
        Instance({"f": f"v{rng.integers(0, 4)}", "g": f"w{rng.integers(0, 3)}"},
                 bool(rng.integers(0, 2)))
        for _ in range(100)
    ]
    model = nb_train(instances, alpha=1.0)
    assert sum(model.priors) == pytest.approx(1.0, abs=1e-12)
    for table in model.likelihoods.values():
        for c in range(len(model.class_values)):
            assert sum(row[c] for row in table.values()) == pytest.approx(1.0, abs=1e-12)


def test_empty_features_gives_priors():
    model = nb_train(XOR4)
    dist = nb_predict(model, {})
    assert dist["+"] == pytest.approx(model.priors[0], abs=1e-15)


def test_distribution_normalized():
    model = nb_train(XOR4)
    for feats in ({"x": "a"}, {"x": "b"}, {"x": "zzz"}, {}):
        dist = nb_predict(model, feats)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
        assert all(0.0 <= p <= 1.0 for p in dist.values())


def test_unseen_value_uniform_fallback():
    model = nb_train(XOR4)
    # unseen value contributes the same factor to both classes
    assert nb_predict(model, {"x": "zzz"}) == nb_predict(model, {})


def test_classify_argmax_and_tie_break():
    model = nb_train(XOR4)
    assert nb_classify(model, {"x": "a"}) == "+"
    assert nb_classify(model, {"x": "b"}) == "-"
    # exact tie resolves to the first-declared class
    assert nb_classify(model, {}) == "+"


def test_training_deterministic():
    a = nb_train(XOR4, alpha=1.0)
    b = nb_train(XOR4, alpha=1.0)
    assert a == b


def _random_dataset(rng, n_features, n_values, n_instances):
    instances = []
    for _ in range(n_instances):
        feats = {
            f"f{j}": f"v{rng.integers(0, n_values)}" for j in range(n_features)
        }
        instances.append(Instance(feats, f"c{rng.integers(0, 3)}"))
    return instances


def _brute_posterior(train, feats, alpha, class_order):
    """Independent count-table oracle: raw joint counts, direct products."""
    n = len(train)
    class_counts = {c: 0 for c in class_order}
    for inst in train:
        class_counts[inst.survived] += 1
    feature_names = sorted(train[0].features)
    domains = {f: sorted({i.features[f] for i in train}) for f in feature_names}
    scores = {}
    for c in class_order:
        score = class_counts[c] / n
        for f in feature_names:
            if f not in feats:
                continue
            v = feats[f]
            if v in domains[f]:
                count = sum(
                    1 for i in train if i.survived == c and i.features[f] == v
                )
                score *= (count + alpha) / (class_counts[c] + alpha * len(domains[f]))
            else:
                score *= 1.0 / (len(domains[f]) + (0 if MISSING in domains[f] else 1))
        scores[c] = score
    total = sum(scores.values())
    return {c: s / total for c, s in scores.items()}


def test_brute_force_oracle_equivalence():
    rng = np.random.default_rng(77)
    for trial in range(25):
        n_features = int(rng.integers(1, 11))
        n_values = int(rng.integers(2, 11))
        n_instances = int(rng.integers(5, 501))
        train = _random_dataset(rng, n_features, n_values, n_instances)
        model = nb_train(train, alpha=1.0)
        test = _random_dataset(rng, n_features, n_values, 40)
        for inst in test:
            got = nb_predict(model, inst.features)
            want = _brute_posterior(train, inst.features, 1.0, model.class_values)
            for c in model.class_values:
                assert got[c] == pytest.approx(want[c], abs=1e-9)


def test_classify_matches_count_oracle_200():
    rng = np.random.default_rng(200)
    train = _random_dataset(rng, 4, 4, 200)
    model = nb_train(train, alpha=1.0)
    for inst in train:
        want = _brute_posterior(train, inst.features, 1.0, model.class_values)
        best = max(model.class_values, key=lambda c: (want[c], -model.class_values.index(c)))
        assert nb_classify(model, inst.features) == best


def test_alpha_monotone_toward_uniform():
    rng = np.random.default_rng(5)
    train = _random_dataset(rng, 3, 4, 120)
    prev_gap = None
    for alpha in (0.5, 1.0, 2.0, 8.0, 64.0):
        model = nb_train(train, alpha=alpha)
        gap = max(
            abs(row[c] - 1.0 / len(table))
            for table in model.likelihoods.values()
            for row in table.values()
            for c in range(len(model.class_values))
        )
        if prev_gap is not None:
            assert gap <= prev_gap + 1e-12
        prev_gap = gap


def test_value_relabeling_equivariance():
    rng = np.random.default_rng(6)
    train = _random_dataset(rng, 3, 3, 150)
    test = _random_dataset(rng, 3, 3, 30)
    rename = {"v0": "alpha", "v1": "beta", "v2": "gamma"}

    def relabel(insts):
        return [
            Instance({f: rename[v] for f, v in i.features.items()}, i.survived)
            for i in insts
        ]

    model = nb_train(train)
    model_r = nb_train(relabel(train))
    for inst, inst_r in zip(test, relabel(test)):
        a = nb_predict(model, inst.features)
        b = nb_predict(model_r, inst_r.features)
        for c in model.class_values:
            assert a[c] == b[c]


def test_log_space_underflow_resistance():
    # 13 features with tiny likelihoods would underflow in product space
    train = []
    for k in range(40):
        feats = {f"f{j}": f"v{k % 7}" for j in range(13)}
        train.append(Instance(feats, k % 2 == 0))
    model = nb_train(train)
    dist = nb_predict(model, {f"f{j}": "v0" for j in range(13)})
    assert math.isfinite(dist[True]) and sum(dist.values()) == pytest.approx(1.0)


def test_serialization_roundtrip_exact():
    rng = np.random.default_rng(9)
    train = _random_dataset(rng, 4, 5, 97)
    model = nb_train(train, alpha=1.0)
    assert parse_nb(serialize_nb(model)) == model


def test_serialization_roundtrip_bool_classes():
    train = [Instance({"x": "a"}, True), Instance({"x": "b"}, False)]
    model = nb_train(train, class_order=(False, True))
    restored = parse_nb(serialize_nb(model))
    assert restored.class_values == (False, True)
    assert restored == model


def test_empty_training_rejected():
    with pytest.raises(ValueError):
        nb_train([])
