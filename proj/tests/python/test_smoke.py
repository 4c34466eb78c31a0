import math

import numpy as np
import pytest

import nutmeg


def small_world(**kwargs):
    config = nutmeg.SimConfig(n_items=120, n_annotators=40, seed=7, **kwargs)
    return nutmeg.generate(config)


def test_generate_shapes():
    world = small_world()
    assert len(world.records) == 120 * 5
    assert world.true_labels.shape == (120, 2)
    assert len(world.true_spam_rates) == 40


def test_fit_posteriors_are_normalized():
    world = small_world()
    data = world.dataset()
    result = nutmeg.fit(data, nutmeg.FitConfig(restarts=2, seed=1))
    probs = result.posterior.probabilities
    assert probs.shape == (data.n_items, 2, 2)
    table = nutmeg.impute(result, nutmeg.FitConfig(restarts=2, seed=1))
    np.testing.assert_allclose(table.probabilities.sum(axis=2), 1.0, atol=1e-12)
    assert result.competence.theta.shape == (data.n_annotators,)
    trace = result.objective_traces[0]
    assert all(b >= a - 1e-8 for a, b in zip(trace, trace[1:]))


def test_fit_is_deterministic():
    data = small_world().dataset()
    config = nutmeg.FitConfig(restarts=3, seed=5)
    a = nutmeg.fit(data, config).posterior.probabilities
    config.threads = 3
    b = nutmeg.fit(data, config).posterior.probabilities
    np.testing.assert_array_equal(a, b)


def test_aggregate_methods_and_accuracy():
    world = small_world(global_spam_rate=0.0, divisiveness_rate=0.0)
    data = world.dataset()
    for method in ["nutmeg", "mace", "majority", "dawid-skene"]:
        out = nutmeg.aggregate(data, method, nutmeg.FitConfig(restarts=2))
        table = out["posterior"]
        truth = world.true_labels if table.n_subpops == 2 else world.true_labels[:, :1]
        accuracy = nutmeg.subpop_accuracy(table, truth)
        assert all(a == 1.0 for a in accuracy), method
        assert (out["competence"] is None) == (method in ("majority", "dawid-skene"))


def test_records_and_toy_majority():
    data = nutmeg.Dataset([("x", "a", "pos"), ("x", "b", "pos"), ("x", "c", "neg")])
    assert data.labels == ["neg", "pos"]
    assert data.subpopulations == ["all"]
    votes, decoded = nutmeg.majority_vote(data)
    np.testing.assert_allclose(votes[0], [1 / 3, 2 / 3])
    assert decoded[0] == 1


def test_metrics():
    assert nutmeg.jsd([1, 0], [0, 1]) == pytest.approx(math.log(2))
    assert nutmeg.jsd([1, 0], [0, 1], base2=True) == pytest.approx(1.0)
    assert nutmeg.jsd([0.5, 0.5], [1, 0]) == pytest.approx(0.2157616, abs=1e-6)
    assert nutmeg.pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert nutmeg.pearson([1, 2, 3], [1, 1, 1]) is None


def test_evaluate_report():
    world = small_world()
    data = world.dataset()
    config = nutmeg.FitConfig(restarts=2)
    result = nutmeg.fit(data, config)
    table = nutmeg.impute(result, config)
    report = nutmeg.evaluate(table, data, world, result.competence)
    assert report["subpopulations"] == ["majority", "minority"]
    assert 0.0 <= report["accuracy"][0] <= 1.0
    assert report["competence_pearson"] is not None
    assert nutmeg.divisiveness_estimate(table) == pytest.approx(report["divisiveness_estimate"])


def test_validation_errors():
    with pytest.raises(nutmeg.ValidationError):
        nutmeg.Dataset([("x", "a", "0")])
    with pytest.raises(ValueError):
        nutmeg.generate(nutmeg.SimConfig(annotations_per_item=500))
    with pytest.raises(nutmeg.ValidationError):
        nutmeg.fit(small_world().dataset(), nutmeg.FitConfig(restarts=0))
