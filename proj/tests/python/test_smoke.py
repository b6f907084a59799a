"""Smoke tests for the python bindings."""

import math

import pytest

import commentree as ct


@pytest.fixture(scope="module")
def data():
    return ct.generate_synthetic(size=600, seed=7)


@pytest.fixture(scope="module")
def forest(data):
    return ct.train_forest(data["features"], data["labels"], n_trees=30, seed=7)


def test_generate_shapes(data):
    assert len(data["features"]) == 600
    assert len(data["labels"]) == 600
    assert len(data["texts"]) == 600
    assert all(len(x) == 5 for x in data["features"])
    assert set(data["labels"]) <= set(ct.CLASS_NAMES)


def test_labels_follow_the_rule_oracle(data):
    for x, label in zip(data["features"], data["labels"]):
        assert ct.rule_oracle(x) == label


def test_forest_predicts_training_data(data, forest):
    hits = sum(
        forest.predict(x) == label for x, label in zip(data["features"], data["labels"])
    )
    assert hits / len(data["labels"]) > 0.95
    proba = forest.predict_proba(data["features"][0])
    assert math.isclose(sum(proba), 1.0, abs_tol=1e-9)


def test_shap_efficiency(data, forest):
    background = data["features"][:32]
    x = data["features"][5]
    result = ct.shap_values(forest, x, background)
    proba = forest.predict_proba(x)
    target_index = ct.CLASS_NAMES.index(result["target"])
    assert math.isclose(
        result["base_value"] + sum(result["per_feature"]),
        proba[target_index],
        abs_tol=1e-9,
    )

    brute = ct.shap_values(forest, x, background, method="bruteforce")
    for a, b in zip(result["per_feature"], brute["per_feature"]):
        assert abs(a - b) < 1e-9


def test_explanations(data, forest):
    background = data["features"][:32]
    red_light = [14, 0, 0, 21, 1]
    factual = ct.explain_factual(forest, red_light, background)
    assert factual["action"] == "stop"
    assert factual["text"].endswith("so ego stops")
    assert 0.0 <= factual["entropy"] <= 2.0
    assert factual["causes"]

    counterfactual = ct.explain_counterfactual(
        forest, red_light, constraints=["EgoPlan"]
    )
    assert counterfactual["target_action"] != "stop"
    assert counterfactual["text"].startswith("If ego must")
    assert all(c["feature"] != "EgoPlan" for c in counterfactual["conditions"])


def test_desired_equals_factual_raises(data, forest):
    red_light = [14, 0, 0, 21, 1]
    with pytest.raises(RuntimeError):
        ct.explain_counterfactual(forest, red_light, desired="stop")


def test_model_round_trip(tmp_path, data, forest):
    path = str(tmp_path / "model.json")
    background = data["features"][:16]
    ct.save_model(forest, background, path)
    loaded, loaded_background = ct.load_model(path)
    assert loaded.n_trees == forest.n_trees
    assert loaded_background == background
    for x in data["features"][:50]:
        assert loaded.predict(x) == forest.predict(x)


def test_metrics():
    assert ct.bleu4("ego stops at the light", ["ego stops at the light"]) == pytest.approx(1.0)
    assert ct.rouge_w("ego stops", "ego stops") == pytest.approx(1.0)
    assert ct.rouge_w("purple quartz", "marsh wren") == 0.0
